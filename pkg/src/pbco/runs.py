"""Round loops that drive one learner against one environment and record regret."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ParameterNet, ProblemConfig, build_net
from .kexp import KexpLearner, KexpParams, kexp_defaults, net_for_budget
from .ogd import FlaxmanLearner, OgdLearner, OgdParams, ogd_defaults

LEARNER_STREAM = 100
DEFAULT_NET_BUDGET = 10_000


@dataclass
class RegretTrace:
    cumulative: np.ndarray
    incurred: np.ndarray | None = field(default=None, repr=False)
    comparator: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.cumulative = np.asarray(self.cumulative, dtype=float)

    def __len__(self):
        return self.cumulative.shape[0]

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, len(self) + 1, dtype=float)

    @property
    def scaled_34(self) -> np.ndarray:
        return self.cumulative / self.t**0.75

    @property
    def scaled_12(self) -> np.ndarray:
        return self.cumulative / np.sqrt(self.t)

    @property
    def final(self) -> float:
        return float(self.cumulative[-1])

    @classmethod
    def from_losses(cls, incurred, comparator) -> "RegretTrace":
        incurred = np.asarray(incurred, dtype=float)
        comparator = np.asarray(comparator, dtype=float)
        return cls(np.cumsum(incurred - comparator), incurred, comparator)


def config_for(env, T: int | None = None) -> ProblemConfig:
    """Problem constants an environment declares (unit ball, unit contexts)."""
    return ProblemConfig(d=env.d, T=env.horizon if T is None else T, W=1.0, D=1.0, C=env.C, L=env.L)


def learner_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, LEARNER_STREAM])


def _check_horizon(config, env):
    if env.horizon < config.T:
        raise ValueError(f"environment horizon {env.horizon} shorter than T={config.T}")


def run_kexp(config: ProblemConfig, env, seed: int, params: KexpParams | None = None,
             net: ParameterNet | None = None, net_step: float | None = None, bins: int | None = None) -> RegretTrace:
    _check_horizon(config, env)
    params = kexp_defaults(config) if params is None else params
    if net is None:
        net = build_net(config, net_step) if net_step else net_for_budget(config, DEFAULT_NET_BUDGET)
    learner = KexpLearner(net, params, learner_rng(seed), bins=bins, loss_bounds=env.loss_bounds)
    inc = np.empty(config.T)
    comp = np.empty(config.T)
    for t in range(1, config.T + 1):
        res = learner.step(env.context_at(t), lambda y, t=t: env.loss_at(t, y))
        inc[t - 1] = res.incurred_loss
        comp[t - 1] = env.comparator_loss_at(t)
    return RegretTrace.from_losses(inc, comp)


def run_ogd(config: ProblemConfig, env, seed: int, params: OgdParams | None = None) -> RegretTrace:
    _check_horizon(config, env)
    params = ogd_defaults(config) if params is None else params
    learner = OgdLearner(config, params, learner_rng(seed), loss_bounds=env.loss_bounds)
    inc = np.empty(config.T)
    comp = np.empty(config.T)
    for t in range(1, config.T + 1):
        res = learner.step(env.context_at(t), lambda y, t=t: env.loss_at(t, y))
        inc[t - 1] = res.incurred_loss
        comp[t - 1] = env.comparator_loss_at(t)
    return RegretTrace.from_losses(inc, comp)


def run_flaxman(config: ProblemConfig, env, seed: int, params: OgdParams | None = None) -> RegretTrace:
    _check_horizon(config, env)
    params = ogd_defaults(config) if params is None else params
    learner = FlaxmanLearner(config, params, learner_rng(seed), loss_bounds=env.loss_bounds)
    inc = np.empty(config.T)
    comp = np.empty(config.T)
    for t in range(1, config.T + 1):
        res = learner.step(lambda w, t=t: env.full_loss_at(t, w))
        inc[t - 1] = res.incurred_loss
        comp[t - 1] = env.comparator_loss_at(t)
    return RegretTrace.from_losses(inc, comp)
