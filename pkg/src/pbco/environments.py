"""Loss and context generators for pseudo-1d bandit problems.

Every environment precomputes its whole context stream (and any noise)
from the seed, so a learner's queries never shift the random stream and
two learners on the same seed see identical rounds. Rounds are 1-indexed.

``loss_at`` and ``full_loss_at`` are the bandit oracles: together they may
be called once per round. ``loss_value`` / ``full_loss_value`` are the
same functions without the audit, for tests and diagnostics.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

NOISE_SD = 0.25


class OracleAuditError(RuntimeError):
    pass


def uniform_ball(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """``n`` points uniform in the unit ball of R^d (direction times radius^(1/d))."""
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = rng.random((n, 1)) ** (1.0 / d)
    return g / norms * r


class Environment:
    """Base class. Subclasses set ``contexts`` (T, d), ``w_star`` and implement ``_ell``."""

    name = "base"
    C = 1.0
    L = 1.0
    loss_bounds: tuple[float, float] | None = None

    def __init__(self, d: int, T: int, seed: int):
        self.d = d
        self.horizon = T
        self.seed = seed
        self.notes: list[str] = []
        self._queried = np.zeros(T + 1, dtype=bool)
        self.oracle_calls = 0

    # -- subclass hooks -------------------------------------------------
    def _ell(self, t: int, y, noisy: bool = True):
        raise NotImplementedError

    # -- public interface -----------------------------------------------
    def _check_t(self, t: int):
        if not 1 <= t <= self.horizon:
            raise IndexError(f"round {t} outside 1..{self.horizon}")

    def context_at(self, t: int) -> np.ndarray:
        self._check_t(t)
        return self.contexts[t - 1]

    def loss_value(self, t: int, y):
        self._check_t(t)
        return self._ell(t, y)

    def full_loss_value(self, t: int, w):
        return self.loss_value(t, float(np.asarray(w, dtype=float) @ self.context_at(t)))

    def expected_loss(self, t: int, w) -> float:
        """Noise-free ``E[f_t(w)]``."""
        self._check_t(t)
        return float(self._ell(t, float(np.asarray(w, dtype=float) @ self.contexts[t - 1]), noisy=False))

    def _audit(self, t: int):
        self._check_t(t)
        if self._queried[t]:
            raise OracleAuditError(f"loss oracle queried twice in round {t}")
        self._queried[t] = True
        self.oracle_calls += 1

    def loss_at(self, t: int, y: float) -> float:
        self._audit(t)
        return float(self._ell(t, y))

    def full_loss_at(self, t: int, w) -> float:
        self._audit(t)
        return float(self.full_loss_value(t, w))

    def comparator_loss_at(self, t: int) -> float:
        return float(self.full_loss_value(t, self.w_star))

    def reset_audit(self):
        self._queried[:] = False
        self.oracle_calls = 0

    def expected_totals(self, candidates) -> np.ndarray:
        """``sum_t E[f_t(w)]`` for each row of ``candidates``."""
        cands = np.atleast_2d(np.asarray(candidates, dtype=float))
        preds = self.contexts @ cands.T  # (T, n)
        ts = np.arange(1, self.horizon + 1)[:, None]
        return np.asarray(self._ell(ts, preds, noisy=False), dtype=float).sum(axis=0)


class LowerBoundEnv(Environment):
    """Hard instance: coordinate i is probed on the i-th block of rounds with a
    signed linear loss of slope ``mu * sigma_i`` plus Gaussian noise."""

    name = "lower_bound"
    C = 1.0
    L = 1.0
    loss_bounds = None  # Gaussian noise: unbounded

    def __init__(self, d: int, T: int, seed: int, shift: bool = True, sigma=None):
        if d > T:
            raise ValueError(f"lower-bound instance needs d <= T, got d={d}, T={T}")
        d_eff = d
        cap = int(math.floor(16 * math.sqrt(T)))
        notes = []
        if d > 16 * math.sqrt(T):
            d_eff = cap
            notes.append(f"d={d} > 16*sqrt(T); only the first {d_eff} coordinates are probed")
        T_eff = d_eff * (T // d_eff)
        if T_eff != T:
            notes.append(f"T={T} truncated to {T_eff} so {d_eff} blocks have equal length")
        super().__init__(d, T_eff, seed)
        self.notes = notes
        for n in notes:
            warnings.warn(n, stacklevel=2)
        self.d_eff = d_eff
        self.interval_length = T_eff // d_eff
        self.mu = min(1.0, d_eff / (16.0 * math.sqrt(T_eff)))
        self.noise_sd = NOISE_SD

        rng = np.random.default_rng([seed, 0])
        self.sigma = np.where(rng.random(d) < 0.5, -1.0, 1.0)
        if sigma is not None:
            sigma = np.asarray(sigma, dtype=float)
            if sigma.shape != (d,) or not np.all(np.abs(sigma) == 1):
                raise ValueError(f"sigma must be a length-{d} vector of +-1")
            self.sigma = sigma
        self.noise = np.random.default_rng([seed, 1]).normal(0.0, NOISE_SD, T_eff)
        self.block = np.arange(T_eff) // self.interval_length  # 0-based coordinate per round
        self.contexts = np.zeros((T_eff, d))
        self.contexts[np.arange(T_eff), self.block] = 1.0
        self.w_star = np.zeros(d)
        self.w_star[:d_eff] = -self.sigma[:d_eff] / math.sqrt(d_eff)
        self.shift = self.mu / math.sqrt(d_eff) + 0.5 if shift else 0.0

    def _ell(self, t, y, noisy=True):
        idx = np.asarray(t) - 1
        val = self.mu * self.sigma[self.block[idx]] * y + self.shift
        if noisy:
            val = val + self.noise[idx]
        return val


class SyntheticEnv(Environment):
    """Fixed hidden ``w*`` in the unit ball; loss is the squared or absolute
    error of the prediction against ``<w*, x_t>``."""

    KINDS = {"squared": (4.0, 4.0), "absolute": (2.0, 1.0)}

    def __init__(self, kind: str, d: int, T: int, seed: int):
        if kind not in self.KINDS:
            raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {sorted(self.KINDS)}")
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        super().__init__(d, T, seed)
        self.name = kind
        self.kind = kind
        self.C, self.L = self.KINDS[kind]
        self.loss_bounds = (0.0, self.C)
        rng = np.random.default_rng([seed, 2])
        self.w_star = uniform_ball(rng, 1, d)[0]
        self.contexts = uniform_ball(rng, T, d)
        self.targets = self.contexts @ self.w_star

    def _ell(self, t, y, noisy=True):
        r = y - self.targets[np.asarray(t) - 1]
        return r * r if self.kind == "squared" else np.abs(r)

    def comparator_loss_at(self, t: int) -> float:
        return 0.0


class ZeroLossEnv(Environment):
    name = "zero"
    C = 1.0
    L = 1.0
    loss_bounds = (0.0, 1.0)

    def __init__(self, d: int, T: int, seed: int):
        super().__init__(d, T, seed)
        self.contexts = uniform_ball(np.random.default_rng([seed, 3]), T, d)
        self.w_star = np.zeros(d)

    def _ell(self, t, y, noisy=True):
        return np.zeros_like(np.asarray(y, dtype=float))


def lower_bound_env(d: int, T: int, seed: int, shift: bool = True, sigma=None) -> LowerBoundEnv:
    return LowerBoundEnv(d, T, seed, shift=shift, sigma=sigma)


def synthetic_env(kind: str, d: int, T: int, seed: int) -> SyntheticEnv:
    return SyntheticEnv(kind, d, T, seed)


def make_env(kind: str, d: int, T: int, seed: int) -> Environment:
    if kind in SyntheticEnv.KINDS:
        return SyntheticEnv(kind, d, T, seed)
    if kind in ("lower_bound", "lowerbound", "lb"):
        return LowerBoundEnv(d, T, seed)
    if kind == "zero":
        return ZeroLossEnv(d, T, seed)
    raise ValueError(f"unknown environment {kind!r}")


def hypercube_corners(d: int) -> np.ndarray:
    """All ``2^d`` points of ``{+-1/sqrt(d)}^d``."""
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
    return signs / math.sqrt(d)


def comparator_check(env: Environment, candidates) -> np.ndarray:
    """Brute-force argmin of the noise-free cumulative loss over ``candidates``."""
    cands = np.asarray(candidates, dtype=float)
    if cands.size == 0:
        raise ValueError("empty candidate set")
    cands = np.atleast_2d(cands)
    totals = env.expected_totals(cands)
    return cands[int(np.argmin(totals))].copy()
