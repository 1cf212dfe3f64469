"""Kernelized exponential weights over a finite net of parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernel1d as k1
from .geometry import MAX_NET_POINTS, ParameterNet, PredictionRange, ProblemConfig, build_net, prediction_range

LOSS_SLACK = 1e-9


@dataclass(frozen=True)
class KexpParams:
    eta: float
    eps: float

    def __post_init__(self):
        if not (self.eta > 0 and self.eps > 0):
            raise ValueError(f"eta and eps must be positive, got eta={self.eta}, eps={self.eps}")


def variance_constant(config: ProblemConfig) -> float:
    """``B = 2(1 + ln(3LT) + ln(beta_W - alpha_W))``, floored at 2."""
    B = 2.0 * (1.0 + math.log(3 * config.L * config.T) + math.log(config.beta_W - config.alpha_W))
    return max(B, 2.0)


def log_LT(config: ProblemConfig) -> float:
    return max(math.log(config.L_prime * config.T), math.log(2.0))


def kexp_defaults(config: ProblemConfig) -> KexpParams:
    eps = 1.0 / (3.0 * config.L * config.T)
    B = variance_constant(config)
    eta = math.sqrt(2.0 * config.d * log_LT(config) / (B * config.C**2 * config.T))
    return KexpParams(eta=eta, eps=eps)


def uniform_weights(net: ParameterNet) -> np.ndarray:
    return np.full(len(net), 1.0 / len(net))


def check_weights(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be >= 0 and sum to 1 (sum={p.sum()!r})")
    return p


def marginalize(p, net: ParameterNet, x, rng_range: PredictionRange) -> k1.BinnedDensity:
    """Push ``p`` forward to per-bin mass of the predictions ``<w, x>``."""
    bins = rng_range.bin_index(net.predictions(x))
    return _marginal(p, bins, rng_range)


def _marginal(p, bins, rng_range):
    mass = np.bincount(bins, weights=p, minlength=rng_range.bins)
    return k1.BinnedDensity(rng_range, mass / mass.sum())


def _select_index(point_bins, target_bin: int, rng: np.random.Generator) -> int:
    hits = np.flatnonzero(point_bins == target_bin)
    if hits.size == 0:
        occupied = np.unique(point_bins)
        if occupied.size == 0:
            raise ValueError("empty net")
        pos = np.searchsorted(occupied, target_bin)
        below = occupied[pos - 1] if pos > 0 else None
        above = occupied[pos] if pos < occupied.size else None
        if above is None or (below is not None and target_bin - below <= above - target_bin):
            nearest = below
        else:
            nearest = above
        hits = np.flatnonzero(point_bins == nearest)
    return int(hits[rng.integers(hits.size)])


def select_parameter(net: ParameterNet, p, x, y_t: float, rng_range: PredictionRange,
                     rng: np.random.Generator) -> np.ndarray:
    """Uniform net point in the bin of ``y_t``, else from the nearest occupied bin (lower wins ties).

    ``p`` is accepted for interface symmetry; the pick is uniform, not p-weighted.
    """
    if len(net) == 0:
        raise ValueError("empty net")
    point_bins = rng_range.bin_index(net.predictions(x))
    idx = _select_index(point_bins, int(rng_range.bin_index(y_t)), rng)
    return net.points[idx].copy()


@dataclass
class KexpState:
    p: np.ndarray
    net: ParameterNet


@dataclass
class KexpStepResult:
    w_t: np.ndarray
    y_t: float
    prediction: float
    incurred_loss: float
    p_next: np.ndarray
    q: k1.BinnedDensity
    smoothed: k1.BinnedDensity
    kernel: k1.KernelParams
    density_at_y_t: float
    f_tilde: np.ndarray  # per net point, constant within a bin
    point_bins: np.ndarray


def exp_update(p, f_tilde, eta: float) -> np.ndarray:
    """``p * exp(-eta * f_tilde)`` renormalised in log space (no underflow to all-zero)."""
    with np.errstate(divide="ignore"):
        logw = np.log(p) - eta * np.asarray(f_tilde, dtype=float)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def kernel_range(net: ParameterNet, x, eps: float, bins: int | None = None) -> PredictionRange:
    """Prediction range padded by ``eps`` below so the kernel window stays inside."""
    base = prediction_range(net, x, 1)
    lo = base.lo - eps
    M = k1.default_bins(lo, base.hi, eps) if bins is None else bins
    return PredictionRange(lo, base.hi, M)


def kexp_step(state: KexpState, x_t, loss_oracle: Callable[[float], float], params: KexpParams,
              rng: np.random.Generator, bins: int | None = None,
              loss_bounds: tuple[float, float] | None = None) -> KexpStepResult:
    net, p = state.net, state.p
    x_t = np.asarray(x_t, dtype=float)
    rng_range = kernel_range(net, x_t, params.eps, bins)
    preds = net.predictions(x_t)
    point_bins = rng_range.bin_index(preds)

    q = _marginal(p, point_bins, rng_range)
    kp = k1.kernel_params(q, params.eps)
    smoothed = k1.smooth(q, params.eps, kp)
    y_t, dens = k1.sample_binned(smoothed, rng)

    idx = _select_index(point_bins, int(rng_range.bin_index(y_t)), rng)
    loss = float(loss_oracle(float(preds[idx])))
    if loss_bounds is not None:
        lo, hi = loss_bounds
        if not (lo - LOSS_SLACK <= loss <= hi + LOSS_SLACK):
            raise ValueError(f"loss oracle returned {loss}, outside declared range [{lo}, {hi}]")

    centers = rng_range.centers
    f_tilde = k1.loss_estimate(loss, y_t, dens, centers[point_bins], kp)
    p_next = exp_update(p, f_tilde, params.eta)
    return KexpStepResult(
        w_t=net.points[idx].copy(), y_t=y_t, prediction=float(preds[idx]), incurred_loss=loss,
        p_next=p_next, q=q, smoothed=smoothed, kernel=kp, density_at_y_t=dens,
        f_tilde=f_tilde, point_bins=point_bins)


def net_for_budget(config: ProblemConfig, max_points: int = 10_000) -> ParameterNet:
    """Finest odd-per-axis grid (so the origin is a net point) with at most ``max_points`` points."""
    best = build_net(config, config.W)  # 3 points per axis
    if len(best) > max_points:
        raise ValueError(f"even the coarsest net in d={config.d} exceeds {max_points} points")
    n = 3
    while True:
        n += 2
        try:
            cand = build_net(config, 2 * config.W / (n - 1), max_points=max_points)
        except ValueError:
            return best
        best = cand


class KexpLearner:
    """Stateful wrapper: one call to :meth:`step` per round."""

    def __init__(self, net: ParameterNet, params: KexpParams, rng: np.random.Generator,
                 bins: int | None = None, loss_bounds=None):
        self.state = KexpState(uniform_weights(net), net)
        self.params = params
        self.rng = rng
        self.bins = bins
        self.loss_bounds = loss_bounds

    @property
    def p(self):
        return self.state.p

    def step(self, x_t, loss_oracle) -> KexpStepResult:
        res = kexp_step(self.state, x_t, loss_oracle, self.params, self.rng, self.bins, self.loss_bounds)
        self.state = KexpState(res.p_next, self.state.net)
        return res


__all__ = [
    "KexpParams", "KexpState", "KexpStepResult", "KexpLearner", "MAX_NET_POINTS",
    "kexp_defaults", "variance_constant", "marginalize", "select_parameter", "kexp_step",
    "exp_update", "kernel_range", "net_for_budget", "uniform_weights", "check_weights",
]
