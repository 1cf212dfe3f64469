"""Regime switch between the exponential-weights learner and OGD."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

from .geometry import ProblemConfig
from .runs import RegretTrace, run_kexp, run_ogd


class Regime(enum.Enum):
    KEXP = "kexp"
    OGD = "ogd"


@dataclass(frozen=True)
class RegimeChoice:
    regime: Regime
    threshold: float
    warning: str | None = None


def regime_threshold(config: ProblemConfig) -> float:
    """``W L D sqrt(T) / (C ln(L' T))``; only meaningful when ``L' T > 1``."""
    log_term = math.log(config.L_prime * config.T)
    return config.W * config.L * config.D * math.sqrt(config.T) / (config.C * log_term)


def choose_regime(config: ProblemConfig) -> RegimeChoice:
    if config.L_prime * config.T <= 1:
        msg = f"L'T = {config.L_prime * config.T} <= 1: threshold undefined, falling back to OGD"
        warnings.warn(msg, stacklevel=2)
        return RegimeChoice(Regime.OGD, float("nan"), msg)
    threshold = regime_threshold(config)
    regime = Regime.KEXP if config.d <= threshold else Regime.OGD
    return RegimeChoice(regime, threshold)


def run(config: ProblemConfig, environment, rng_seed: int, net_step: float | None = None) -> RegretTrace:
    """Pick the regime for ``config`` and play ``config.T`` rounds with default parameters.

    Building the net for the exponential-weights regime raises if it would
    exceed the point cap; there is no silent switch to OGD.
    """
    choice = choose_regime(config)
    if choice.regime is Regime.KEXP:
        return run_kexp(config, environment, rng_seed, net_step=net_step)
    return run_ogd(config, environment, rng_seed)
