import math
import warnings

import numpy as np
import pytest
from mpmath import mp, mpf, log, sqrt

from pbco.dispatcher import Regime, choose_regime, regime_threshold, run
from pbco.environments import ZeroLossEnv, synthetic_env
from pbco.geometry import ProblemConfig

mp.dps = 40


def oracle_threshold(W, L, D, C, T):
    """High-precision reference for W L D sqrt(T) / (C ln(L D W T))."""
    W, L, D, C, T = (mpf(v) for v in (W, L, D, C, T))
    return W * L * D * sqrt(T) / (C * log(L * D * W * T))


# (d, T, W, D, C, L); the three cases with L = e/4, T = 4 put the threshold exactly on 1, 2 and 4
E = math.e
TABLE = [
    (5, 10_000, 1, 1, 1, 1), (10, 10_000, 1, 1, 1, 1), (11, 10_000, 1, 1, 1, 1), (50, 10_000, 1, 1, 1, 1),
    (1, 100, 1, 1, 1, 1), (3, 100, 1, 1, 1, 1), (2, 100, 1, 1, 1, 1),
    (20, 50_000, 1, 1, 4, 4), (21, 50_000, 1, 1, 4, 4), (40, 50_000, 1, 1, 4, 4),
    (2, 5_000, 1, 1, 4, 4), (5, 5_000, 1, 1, 4, 4), (9, 5_000, 1, 1, 4, 4),
    (3, 1_000, 2, 0.5, 1, 3), (30, 1_000, 2, 0.5, 1, 3),
    (1, 4, 1, 1, E / 2, E / 4), (2, 4, 1, 1, E / 2, E / 4),
    (2, 4, 1, 1, E / 4, E / 4), (3, 4, 1, 1, E / 4, E / 4), (4, 4, 1, 1, E / 8, E / 4),
]


def test_table_has_twenty_cases_on_both_sides():
    assert len(TABLE) == 20
    sides = {d <= oracle_threshold(W, L, D, C, T) for d, T, W, D, C, L in TABLE}
    assert sides == {True, False}


@pytest.mark.parametrize("d,T,W,D,C,L", TABLE)
def test_choice_matches_inequality(d, T, W, D, C, L):
    choice = choose_regime(ProblemConfig(d=d, T=T, W=W, D=D, C=C, L=L))
    ref = oracle_threshold(W, L, D, C, T)
    assert choice.threshold == pytest.approx(float(ref), rel=1e-13)
    expected = Regime.KEXP if d <= choice.threshold else Regime.OGD
    assert choice.regime is expected
    if abs(d - ref) > 1e-9:
        assert (choice.regime is Regime.KEXP) == (d < ref)


@pytest.mark.parametrize("C,thr", [(E / 2, 1.0), (E / 4, 2.0), (E / 8, 4.0)])
def test_exact_equality_goes_to_kexp(C, thr):
    cfg = ProblemConfig(d=int(thr), T=4, C=C, L=E / 4)
    choice = choose_regime(cfg)
    assert choice.threshold == thr
    assert choice.regime is Regime.KEXP


def test_examples():
    assert regime_threshold(ProblemConfig(d=5, T=10_000)) == pytest.approx(10.857362047581296, rel=1e-14)
    assert choose_regime(ProblemConfig(d=5, T=10_000)).regime is Regime.KEXP
    assert choose_regime(ProblemConfig(d=50, T=10_000)).regime is Regime.OGD


def test_degenerate_log_falls_back_to_ogd():
    with pytest.warns(UserWarning, match="OGD"):
        choice = choose_regime(ProblemConfig(d=1, T=1, L=0.5))
    assert choice.regime is Regime.OGD and choice.warning


def test_choice_is_pure():
    cfg = ProblemConfig(d=7, T=3000, C=2, L=1)
    assert choose_regime(cfg) == choose_regime(ProblemConfig(d=7, T=3000, C=2, L=1))


@pytest.mark.parametrize("d,T", [(2, 200), (40, 200)])
def test_zero_loss_run_is_flat(d, T):
    cfg = ProblemConfig(d=d, T=T)
    trace = run(cfg, ZeroLossEnv(d, T, seed=0), rng_seed=0)
    assert len(trace) == T
    np.testing.assert_array_equal(trace.cumulative, np.zeros(T))


def test_run_is_deterministic():
    cfg = ProblemConfig(d=2, T=150, C=4, L=4)
    a = run(cfg, synthetic_env("squared", 2, 150, 3), rng_seed=3)
    b = run(cfg, synthetic_env("squared", 2, 150, 3), rng_seed=3)
    np.testing.assert_array_equal(a.cumulative, b.cumulative)


def test_kexp_net_cap_is_an_error():
    cfg = ProblemConfig(d=2, T=100)
    assert choose_regime(cfg).regime is Regime.KEXP
    with pytest.raises(ValueError, match="points"):  # about 3.1 million grid points in the disc
        run(cfg, ZeroLossEnv(2, 100, 0), rng_seed=0, net_step=1e-3)


def test_short_environment_rejected():
    with pytest.raises(ValueError, match="horizon"):
        run(ProblemConfig(d=50, T=100), ZeroLossEnv(50, 50, 0), rng_seed=0)
