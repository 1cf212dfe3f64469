"""Online gradient descent driven by one-point loss evaluations.

Two learners live here. ``ogd_step`` perturbs the scalar prediction and
only ever moves along the context direction, which is what makes its
regret dimension-free. ``flaxman_step`` is the structure-agnostic baseline
that perturbs the full parameter vector on the unit sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import ProblemConfig, project_ball, project_w_alpha

LOSS_SLACK = 1e-9


@dataclass(frozen=True)
class OgdParams:
    eta: float
    delta: float
    alpha: float

    def __post_init__(self):
        if not (self.eta > 0 and self.delta > 0 and self.alpha > 0):
            raise ValueError(f"eta, delta, alpha must be positive: {self}")


@dataclass
class OgdState:
    w: np.ndarray


@dataclass
class OgdStepResult:
    a_t: float
    u: float
    incurred_loss: float
    gradient: np.ndarray
    w_played: np.ndarray  # iterate after the start-of-round projection
    state_next: OgdState


@dataclass
class FlaxmanStepResult:
    w_played: np.ndarray
    incurred_loss: float
    gradient: np.ndarray
    state_next: OgdState


def ogd_defaults(config: ProblemConfig) -> OgdParams:
    W, D, C, L, T = config.W, config.D, config.C, config.L, config.T
    delta = math.sqrt(W * D * C / (3.0 * L * math.sqrt(T)))
    eta = W * delta / (D * C * math.sqrt(T))
    return OgdParams(eta=eta, delta=delta, alpha=delta)


def flaxman_defaults(config: ProblemConfig) -> OgdParams:
    """Same ``delta`` as OGD; the step uses the sphere estimator's gradient bound ``d C / delta``."""
    base = ogd_defaults(config)
    eta = config.W * base.delta / (config.d * config.C * math.sqrt(config.T))
    return OgdParams(eta=eta, delta=base.delta, alpha=base.alpha)


def check_params(params: OgdParams, config: ProblemConfig):
    if not params.alpha < (config.beta_W - config.alpha_W) / 2:
        raise ValueError(
            f"alpha={params.alpha} must be below half the prediction width "
            f"{(config.beta_W - config.alpha_W) / 2}")


def one_point_gradient(observed_loss: float, u: float, delta: float, grad_g) -> np.ndarray:
    return (observed_loss * u / delta) * np.asarray(grad_g, dtype=float)


def _check_loss(loss, bounds):
    if bounds is not None:
        lo, hi = bounds
        if not (lo - LOSS_SLACK <= loss <= hi + LOSS_SLACK):
            raise ValueError(f"loss oracle returned {loss}, outside declared range [{lo}, {hi}]")


def ogd_step(state: OgdState, x_t, loss_oracle: Callable[[float], float], params: OgdParams,
             config: ProblemConfig, rng: np.random.Generator,
             loss_bounds: tuple[float, float] | None = None) -> OgdStepResult:
    """One round: project, perturb the prediction by ``delta*u``, take a gradient step.

    The new iterate is left unprojected; the projection for the next round
    happens at the start of that round.
    """
    x_t = np.asarray(x_t, dtype=float)
    u = 1.0 if rng.random() < 0.5 else -1.0
    w = project_w_alpha(state.w, x_t, config, params.alpha)
    a_t = float(w @ x_t) + params.delta * u
    loss = float(loss_oracle(a_t))
    _check_loss(loss, loss_bounds)
    grad = one_point_gradient(loss, u, params.delta, x_t)  # grad of <w, x> w.r.t. w is x
    return OgdStepResult(a_t=a_t, u=u, incurred_loss=loss, gradient=grad, w_played=w,
                         state_next=OgdState(w - params.eta * grad))


def sample_sphere(d: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        g = rng.standard_normal(d)
        n = np.linalg.norm(g)
        if n > 0:
            return g / n


def flaxman_step(state: OgdState, loss_oracle_full: Callable[[np.ndarray], float], params: OgdParams,
                 config: ProblemConfig, rng: np.random.Generator,
                 loss_bounds: tuple[float, float] | None = None) -> FlaxmanStepResult:
    W = config.W
    radius = (1.0 - params.delta / W) * W
    if radius <= 0:
        raise ValueError(f"delta={params.delta} leaves no room inside the ball of radius {W}")
    d = state.w.shape[0]
    u = sample_sphere(d, rng)
    w = project_ball(state.w, radius)
    played = w + params.delta * u
    loss = float(loss_oracle_full(played))
    _check_loss(loss, loss_bounds)
    grad = (d * loss / params.delta) * u
    return FlaxmanStepResult(w_played=played, incurred_loss=loss, gradient=grad,
                             state_next=OgdState(project_ball(w - params.eta * grad, radius)))


class OgdLearner:
    def __init__(self, config: ProblemConfig, params: OgdParams, rng: np.random.Generator, loss_bounds=None):
        check_params(params, config)
        self.config = config
        self.params = params
        self.rng = rng
        self.loss_bounds = loss_bounds
        self.state = OgdState(np.zeros(config.d))

    def step(self, x_t, loss_oracle) -> OgdStepResult:
        res = ogd_step(self.state, x_t, loss_oracle, self.params, self.config, self.rng, self.loss_bounds)
        self.state = res.state_next
        return res


class FlaxmanLearner:
    def __init__(self, config: ProblemConfig, params: OgdParams, rng: np.random.Generator, loss_bounds=None):
        self.config = config
        self.params = params
        self.rng = rng
        self.loss_bounds = loss_bounds
        self.state = OgdState(np.zeros(config.d))

    def step(self, loss_oracle_full) -> FlaxmanStepResult:
        res = flaxman_step(self.state, loss_oracle_full, self.params, self.config, self.rng, self.loss_bounds)
        self.state = res.state_next
        return res
