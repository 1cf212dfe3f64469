"""Parameter-space primitives: the radius-W ball, its grid net, projections
and the binned scalar prediction range.

The parameter set is always the Euclidean ball of radius ``W`` centred at the
origin. With a linear link ``g(w; x) = <w, x>`` and ``||x|| <= D`` the
predictions live in ``[-D*W, D*W]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_NET_POINTS = 2**20
DEGENERATE_WIDTH = 1e-9


@dataclass(frozen=True)
class ProblemConfig:
    """Dimensions, horizon and the constants the parameter formulas use.

    ``W`` is a ball *radius*. ``alpha_W``/``beta_W`` bound the prediction
    space and default to ``-D*W``/``D*W`` (linear link on the ball).
    """

    d: int
    T: int
    W: float = 1.0
    D: float = 1.0
    C: float = 1.0
    L: float = 1.0
    alpha_W: float | None = None
    beta_W: float | None = None

    def __post_init__(self):
        if self.alpha_W is None:
            object.__setattr__(self, "alpha_W", -self.D * self.W)
        if self.beta_W is None:
            object.__setattr__(self, "beta_W", self.D * self.W)
        if self.d < 1 or self.T < 1:
            raise ValueError(f"need d >= 1 and T >= 1, got d={self.d}, T={self.T}")
        for name in ("W", "D", "C", "L"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if not self.alpha_W < self.beta_W:
            raise ValueError(f"alpha_W={self.alpha_W} must be < beta_W={self.beta_W}")

    @property
    def L_prime(self) -> float:
        return self.L * self.D * self.W


@dataclass(frozen=True)
class ParameterNet:
    points: np.ndarray  # (n, d), lexicographically sorted
    step: float

    def __len__(self):
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def predictions(self, x) -> np.ndarray:
        return self.points @ np.asarray(x, dtype=float)


@dataclass(frozen=True)
class PredictionRange:
    """``bins`` equal-width bins over ``[lo, hi]``.

    A value sitting exactly on an interior edge belongs to the lower bin;
    ``lo`` maps to bin 0 and ``hi`` to the last bin.
    """

    lo: float
    hi: float
    bins: int
    _edges: np.ndarray = field(init=False, repr=False, compare=False)
    _centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError(f"bins must be >= 1, got {self.bins}")
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        edges = self.lo + self.bin_width * np.arange(self.bins + 1)
        edges[-1] = self.hi
        object.__setattr__(self, "_edges", edges)
        object.__setattr__(self, "_centers", self.lo + (np.arange(self.bins) + 0.5) * self.bin_width)

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return self._edges

    @property
    def centers(self) -> np.ndarray:
        return self._centers

    def bin_index(self, y):
        pos = (np.asarray(y, dtype=float) - self.lo) / self.bin_width
        idx = np.ceil(pos).astype(np.int64) - 1
        return np.clip(idx, 0, self.bins - 1)

    def padded_below(self, pad: float, bins: int | None = None) -> "PredictionRange":
        return PredictionRange(self.lo - pad, self.hi, self.bins if bins is None else bins)


def _check_finite(v, what="input"):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite {what}: {v}")
    return v


def project_ball(w, R: float) -> np.ndarray:
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    w = _check_finite(w, "vector")
    norm = np.linalg.norm(w)
    if norm <= R:
        return w.copy()
    return w * (R / norm)


def build_net(config: ProblemConfig, step: float, max_points: int = MAX_NET_POINTS) -> ParameterNet:
    """All points of the axis grid ``{-W, -W+step, ...}^d`` inside the ball."""
    W = config.W
    if not 0 < step <= 2 * W:
        raise ValueError(f"step must lie in (0, 2W]=(0, {2 * W}], got {step}")
    n_axis = int(math.floor(2 * W / step + 1e-9)) + 1
    axis = -W + step * np.arange(n_axis)
    axis[np.abs(axis) < 1e-12] = 0.0
    r2 = W * W * (1 + 1e-12)
    vmin2 = float(np.min(axis * axis))

    # prefix pruning keeps only prefixes that can still be completed inside
    # the ball, so intermediate counts never exceed the final one
    prefixes = np.zeros((1, 0))
    norms = np.zeros(1)
    for k in range(config.d):
        remaining = config.d - k - 1
        new_norms = (norms[:, None] + axis[None, :] ** 2).ravel()
        keep = new_norms + remaining * vmin2 <= r2
        count = int(keep.sum())
        if count > max_points:
            raise ValueError(
                f"net with step={step} in d={config.d} has at least {count} points "
                f"(cap {max_points})")
        rep = np.repeat(prefixes, n_axis, axis=0)
        col = np.tile(axis, prefixes.shape[0])[:, None]
        prefixes = np.hstack([rep, col])[keep]
        norms = new_norms[keep]
    if prefixes.shape[0] == 0:
        raise ValueError(f"net with step={step} is empty")
    return ParameterNet(points=prefixes, step=step)


def prediction_range(net: ParameterNet, x, bins: int) -> PredictionRange:
    if len(net) == 0:
        raise ValueError("empty net")
    x = _check_finite(x, "context")
    preds = net.predictions(x)
    lo, hi = float(preds.min()), float(preds.max())
    if hi <= lo:
        hi = lo + DEGENERATE_WIDTH
    return PredictionRange(lo, hi, bins)


def project_w_alpha(w, x, config: ProblemConfig, alpha: float,
                    tol: float = 1e-12, max_iter: int = 1000) -> np.ndarray:
    """Euclidean projection onto ``{||w|| <= W} ∩ {<w,x> in [alpha_W+alpha, beta_W-alpha]}``.

    Dykstra's alternating projections, so the limit is the nearest point of
    the intersection and not merely some feasible point.
    """
    lo_s = config.alpha_W + alpha
    hi_s = config.beta_W - alpha
    if not (0 <= alpha and lo_s <= hi_s):
        raise ValueError(f"margin alpha={alpha} leaves an empty prediction slab")
    w = _check_finite(w, "vector")
    x = _check_finite(x, "context")
    W = config.W
    xx = float(x @ x)
    reach = W * math.sqrt(xx)
    if hi_s < -reach - 1e-12 or lo_s > reach + 1e-12:
        raise ValueError(
            f"slab [{lo_s}, {hi_s}] does not meet the ball of radius {W} for this context")

    def to_slab(v):
        if xx == 0.0:
            return v.copy()
        s = float(v @ x)
        if s < lo_s:
            return v + (lo_s - s) / xx * x
        if s > hi_s:
            return v + (hi_s - s) / xx * x
        return v.copy()

    def feasible(v, slack=0.0):
        s = float(v @ x)
        return np.linalg.norm(v) <= W + slack and lo_s - slack <= s <= hi_s + slack

    if feasible(w):
        return w.copy()

    cur = w.copy()
    p_corr = np.zeros_like(w)
    q_corr = np.zeros_like(w)
    for _ in range(max_iter):
        y = project_ball(cur + p_corr, W)
        p_corr = cur + p_corr - y
        nxt = to_slab(y + q_corr)
        q_corr = y + q_corr - nxt
        moved = np.linalg.norm(nxt - cur)
        cur = nxt
        if moved < tol and feasible(cur, 1e-10):
            break
    # clean-up so both constraints hold to 1e-9 even if the loop was cut short
    cur = project_ball(cur, W)
    if not feasible(cur, 1e-9):
        cur = project_ball(to_slab(cur), W)
    return cur
