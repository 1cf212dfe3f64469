"""Experiment runner: seeds in, averaged regret traces and CSV out."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dispatcher import Regime, choose_regime
from .environments import make_env
from .kexp import KexpParams, kexp_defaults
from .ogd import OgdParams, flaxman_defaults, ogd_defaults
from .runs import RegretTrace, config_for, run_flaxman, run_kexp, run_ogd

ALGORITHMS = ("optpbco", "kexp", "ogd", "flaxman")
ENVIRONMENTS = ("squared", "absolute", "lower_bound", "zero")
CSV_HEADER = "t,cum_regret,scaled_t34,scaled_t12"


@dataclass(frozen=True)
class ExperimentConfig:
    """One (algorithm, environment) pair over a list of seeds.

    ``eta_scale`` multiplies the default step size of whichever learner runs;
    1.0 keeps the theoretical formulas untouched.
    """

    algorithm: str
    env: str
    d: int
    T: int
    seeds: tuple = (0,)
    net_step: float | None = None
    out: str | None = None
    eta_scale: float = 1.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.env!r}; expected one of {ENVIRONMENTS}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.T < 1 or self.d < 1:
            raise ValueError(f"need d >= 1 and T >= 1, got d={self.d}, T={self.T}")
        if not (self.eta_scale > 0 and math.isfinite(self.eta_scale)):
            raise ValueError(f"eta_scale must be positive, got {self.eta_scale}")
        if self.net_step is not None and not self.net_step > 0:
            raise ValueError(f"net_step must be positive, got {self.net_step}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass
class ExperimentResult:
    mean: RegretTrace
    per_seed: list = field(default_factory=list)
    seeds: tuple = ()


def _scaled_kexp(config, scale):
    p = kexp_defaults(config)
    return KexpParams(eta=p.eta * scale, eps=p.eps)


def _scaled_ogd(p: OgdParams, scale):
    return OgdParams(eta=p.eta * scale, delta=p.delta, alpha=p.alpha)


def run_seed(cfg: ExperimentConfig, seed: int) -> RegretTrace:
    env = make_env(cfg.env, cfg.d, cfg.T, seed)
    config = config_for(env)
    algo = cfg.algorithm
    if algo == "optpbco":
        algo = "kexp" if choose_regime(config).regime is Regime.KEXP else "ogd"
    if algo == "kexp":
        return run_kexp(config, env, seed, _scaled_kexp(config, cfg.eta_scale), net_step=cfg.net_step)
    if algo == "ogd":
        return run_ogd(config, env, seed, _scaled_ogd(ogd_defaults(config), cfg.eta_scale))
    return run_flaxman(config, env, seed, _scaled_ogd(flaxman_defaults(config), cfg.eta_scale))


def _run_seed_safe(args):
    cfg, seed = args
    try:
        return run_seed(cfg, seed)
    except Exception as exc:  # re-raised with the seed attached
        raise RuntimeError(f"seed {seed}: {type(exc).__name__}: {exc}") from exc


def mean_trace(traces) -> RegretTrace:
    return RegretTrace(np.mean([tr.cumulative for tr in traces], axis=0))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every seed (in worker processes when ``cfg.workers > 1``) and
    average the cumulative regret pointwise, always in seed order."""
    jobs = [(cfg, s) for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            traces = list(pool.map(_run_seed_safe, jobs))
    else:
        traces = [_run_seed_safe(j) for j in jobs]
    return ExperimentResult(mean_trace(traces), traces, cfg.seeds)


def format_value(v: float) -> str:
    """Fixed-point with at least 9 decimals and at least 9 significant digits."""
    v = float(v)
    if v == 0.0 or not math.isfinite(v):
        return f"{v:.9f}"
    decimals = max(9, 8 - math.floor(math.log10(abs(v))))
    return f"{v:.{decimals}f}"


def csv_lines(trace: RegretTrace):
    yield CSV_HEADER
    if len(trace) == 0:
        return
    cum, s34, s12 = trace.cumulative, trace.scaled_34, trace.scaled_12
    for i in range(len(trace)):
        yield f"{i + 1},{format_value(cum[i])},{format_value(s34[i])},{format_value(s12[i])}"


def emit_csv(trace: RegretTrace, path) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            for line in csv_lines(trace):
                fh.write(line + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def loglog_slope(series, t=None, start_fraction: float = 0.5) -> float:
    """Least-squares slope of ``log(series)`` on ``log(t)`` over the last part of the run."""
    series = np.asarray(series, dtype=float)
    t = np.arange(1, series.size + 1, dtype=float) if t is None else np.asarray(t, dtype=float)
    start = int(series.size * start_fraction)
    s, tt = series[start:], t[start:]
    if np.any(s <= 0):
        raise ValueError("log-log slope needs a positive series")
    return float(np.polyfit(np.log(tt), np.log(s), 1)[0])


def with_d(cfg: ExperimentConfig, d: int, out: str | None) -> ExperimentConfig:
    return replace(cfg, d=d, out=out)
