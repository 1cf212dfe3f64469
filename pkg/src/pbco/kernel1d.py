"""One-dimensional smoothing kernel on the prediction line.

Given a distribution ``q`` over predictions with mean ``y_bar`` and a width
``eps``, the kernel ``K(y, y')`` is

* uniform on the segment between ``y'`` and ``y_bar`` when ``|y' - y_bar| >= eps``,
* uniform on the window ``[y_bar - eps, y_bar]`` otherwise.

``q`` is stored as per-bin mass on a :class:`PredictionRange`. For smoothing,
each bin's mass is treated as an atom at the bin centre, so ``K q`` is a finite
mixture of uniform segments and its per-bin masses are computed exactly from
the piecewise-linear CDF.

Loss callables passed to :func:`adjoint` and friends must accept numpy arrays.
A loss may expose a ``breakpoints`` attribute (kinks); quadrature then splits
at those points and stays exact for piecewise polynomials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PredictionRange

MASS_TOL = 1e-9
ADJOINT_NODES = 64


@dataclass(frozen=True)
class BinnedDensity:
    range: PredictionRange
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (self.range.bins,):
            raise ValueError(f"mass has shape {mass.shape}, expected ({self.range.bins},)")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses must be >= 0 and sum to 1 (sum={mass.sum()!r})")
        object.__setattr__(self, "mass", mass)

    @property
    def centers(self) -> np.ndarray:
        return self.range.centers

    def density_at(self, y):
        """Piecewise-constant density ``mass[bin(y)] / bin_width``."""
        return self.mass[self.range.bin_index(y)] / self.range.bin_width


@dataclass(frozen=True)
class KernelParams:
    """``y_bar`` and ``eps`` of the kernel.

    ``floor`` clips the small-distance window to ``[max(floor, y_bar-eps), y_bar]``
    so the kernel never leaves a bounded prediction range. Ranges built by the
    learner are padded by ``eps`` below, so there the clip never binds.
    """

    y_bar: float
    eps: float
    floor: float = -math.inf

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.floor < self.y_bar:
            raise ValueError(f"floor {self.floor} must lie below y_bar {self.y_bar}")

    @property
    def window(self) -> tuple[float, float]:
        return max(self.floor, self.y_bar - self.eps), self.y_bar


def default_bins(lo: float, hi: float, eps: float) -> int:
    return max(64, int(math.ceil((hi - lo) / eps)))


def mean_of(q: BinnedDensity) -> float:
    return float(q.mass @ q.centers)


def kernel_params(q: BinnedDensity, eps: float) -> KernelParams:
    return KernelParams(mean_of(q), eps, floor=q.range.lo)


def kernel_eval(y, y_prime, kp: KernelParams):
    """Kernel density at ``y`` for the source point ``y_prime`` (broadcasts)."""
    y = np.asarray(y, dtype=float)
    y_prime = np.asarray(y_prime, dtype=float)
    dist = np.abs(y_prime - kp.y_bar)
    far = dist >= kp.eps
    seg_lo = np.minimum(y_prime, kp.y_bar)
    seg_hi = np.maximum(y_prime, kp.y_bar)
    with np.errstate(divide="ignore", invalid="ignore"):
        val_far = np.where((y >= seg_lo) & (y <= seg_hi), 1.0 / np.where(far, dist, 1.0), 0.0)
    a, b = kp.window
    val_near = np.where((y >= a) & (y <= b), 1.0 / (b - a), 0.0)
    out = np.where(far, val_far, val_near)
    return float(out) if out.ndim == 0 else out


def segment_of(y, kp: KernelParams):
    """Support ``(start, stop)`` of ``K(., y)``, vectorised over ``y``."""
    y = np.asarray(y, dtype=float)
    far = np.abs(y - kp.y_bar) >= kp.eps
    a, b = kp.window
    start = np.where(far, np.minimum(y, kp.y_bar), a)
    stop = np.where(far, np.maximum(y, kp.y_bar), b)
    return start, stop


def _count(points, z, side: str, z_sorted: bool):
    """``np.searchsorted(points, z, side)`` for sorted ``points``.

    When ``z`` is itself sorted and longer than ``points`` the atoms are
    located among the queries instead, which is much cheaper for fine grids.
    """
    if not z_sorted or z.ndim != 1 or z.size <= points.size:
        return np.searchsorted(points, z, side=side)
    # "right": count of points <= z_j; "left": count of points < z_j
    pos = np.searchsorted(z, points, side="left" if side == "right" else "right")
    return np.cumsum(np.bincount(pos, minlength=z.size + 1))[: z.size]


class _Mixture:
    """``K q`` for atoms ``masses`` at ``points``: CDF, density and ``K^(2) q``."""

    def __init__(self, points, masses, kp: KernelParams):
        points = np.asarray(points, dtype=float)
        masses = np.asarray(masses, dtype=float)
        keep = masses > 0
        points, masses = points[keep], masses[keep]
        order = np.argsort(points, kind="stable")
        points, masses = points[order], masses[order]
        self.kp = kp
        y_bar, eps = kp.y_bar, kp.eps
        dist = points - y_bar
        right = dist >= eps
        left = dist <= -eps
        near = ~(right | left)

        self.c_r = points[right]
        len_r = self.c_r - y_bar
        m_r = masses[right]
        self.cum_r = np.concatenate([[0.0], np.cumsum(m_r)])
        self.suf_r = np.concatenate([np.cumsum((m_r / len_r)[::-1])[::-1], [0.0]])
        self.suf2_r = np.concatenate([np.cumsum((m_r / len_r**2)[::-1])[::-1], [0.0]])

        self.c_l = points[left]
        len_l = y_bar - self.c_l
        m_l = masses[left]
        self.cum_l = np.concatenate([[0.0], np.cumsum(m_l)])
        self.pre_l = np.concatenate([[0.0], np.cumsum(m_l / len_l)])
        self.pre2_l = np.concatenate([[0.0], np.cumsum(m_l / len_l**2)])

        self.m_near = float(masses[near].sum())
        self.points = points

    def cdf(self, z, z_sorted: bool = False):
        z = np.asarray(z, dtype=float)
        y_bar = self.kp.y_bar
        i = _count(self.c_r, z, "right", z_sorted)
        right = np.where(z > y_bar, self.cum_r[i] + (z - y_bar) * self.suf_r[i], 0.0)
        j = _count(self.c_l, z, "left", z_sorted)
        left = np.where(z >= y_bar, self.cum_l[-1], self.cum_l[j] - (y_bar - z) * self.pre_l[j])
        a, b = self.kp.window
        near = self.m_near * np.clip((z - a) / (b - a), 0.0, 1.0)
        return right + left + near

    def _densities(self, z, right_suffix, left_prefix, power):
        z = np.asarray(z, dtype=float)
        y_bar = self.kp.y_bar
        i = np.searchsorted(self.c_r, z, side="left")
        right = np.where(z > y_bar, right_suffix[i], 0.0)
        j = np.searchsorted(self.c_l, z, side="right")
        left = np.where(z < y_bar, left_prefix[j], 0.0)
        a, b = self.kp.window
        near = np.where((z >= a) & (z <= b), self.m_near / (b - a) ** power, 0.0)
        return right + left + near

    def density(self, z):
        return self._densities(z, self.suf_r, self.pre_l, 1)

    def sq_density(self, z):
        return self._densities(z, self.suf2_r, self.pre2_l, 2)

    def breakpoints(self, lo, hi, extra=()):
        a, b = self.kp.window
        pts = np.concatenate([[lo, hi, a, b], self.points, np.asarray(extra, dtype=float)])
        pts = np.unique(np.clip(pts, lo, hi))
        return pts


def _mixture(q: BinnedDensity, kp: KernelParams) -> _Mixture:
    return _Mixture(q.centers, q.mass, kp)


def smooth(q: BinnedDensity, eps: float, kp: KernelParams | None = None) -> BinnedDensity:
    """Bin masses of ``K q``, integrated exactly over each bin."""
    kp = kernel_params(q, eps) if kp is None else kp
    cdf = _mixture(q, kp).cdf(q.range.edges, z_sorted=True)
    mass = np.clip(np.diff(cdf), 0.0, None)
    mass /= mass.sum()
    return BinnedDensity(q.range, mass)


def sample_smoothed(q: BinnedDensity, eps: float, rng: np.random.Generator, size=None):
    """Two-stage draw from ``K q``: a source atom from ``q``, then a point of its kernel segment."""
    kp = kernel_params(q, eps)
    n = 1 if size is None else size
    src = q.centers[rng.choice(q.range.bins, size=n, p=q.mass)]
    start, stop = segment_of(src, kp)
    y = start + (stop - start) * rng.random(n)
    return float(y[0]) if size is None else y


def sample_binned(density: BinnedDensity, rng: np.random.Generator) -> tuple[float, float]:
    """Draw from the piecewise-constant density; returns ``(y, density at y)``."""
    rng_range = density.range
    cum = np.cumsum(density.mass)
    k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    k = min(k, rng_range.bins - 1)
    while density.mass[k] <= 0:  # only reachable through rounding at the top end
        k -= 1
    lo = rng_range.edges[k]
    y = lo + rng_range.bin_width * rng.random()
    return float(y), float(density.mass[k] / rng_range.bin_width)


def _gauss_average(loss, start, stop, nodes: int):
    """Average of ``loss`` over ``[start, stop]`` (vectorised over intervals)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    start = np.asarray(start, dtype=float)
    stop = np.asarray(stop, dtype=float)
    kinks = np.asarray(getattr(loss, "breakpoints", ()), dtype=float)
    cuts = np.sort(np.concatenate(
        [start[..., None], np.clip(kinks, start[..., None], stop[..., None]), stop[..., None]],
        axis=-1), axis=-1)
    a, b = cuts[..., :-1], cuts[..., 1:]
    half = 0.5 * (b - a)
    pts = (0.5 * (a + b))[..., None] + half[..., None] * x
    total = (loss(pts) * w).sum(axis=-1) * half
    length = stop - start
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = total.sum(axis=-1) / length
    return np.where(length > 0, avg, loss(start))


def adjoint(loss, y, kp: KernelParams, nodes: int = ADJOINT_NODES):
    """Average of ``loss`` over the kernel segment of ``y`` (the adjoint operator)."""
    start, stop = segment_of(y, kp)
    out = _gauss_average(loss, start, stop, nodes)
    return float(out) if np.ndim(out) == 0 else out


def loss_estimate(observed_loss: float, y_t: float, density_at_y_t: float, y, kp: KernelParams):
    if not density_at_y_t > 0:
        raise ValueError(f"sampling density at y_t={y_t} is {density_at_y_t}; sampler and density disagree")
    return observed_loss / density_at_y_t * kernel_eval(y_t, y, kp)


def smoothed_expectation(q: BinnedDensity, eps: float, loss, nodes: int = 16) -> float:
    """``<K q, loss>`` by exact piecewise integration of the mixture density."""
    kp = kernel_params(q, eps)
    mix = _mixture(q, kp)
    pts = mix.breakpoints(q.range.lo, q.range.hi, getattr(loss, "breakpoints", ()))
    a, b = pts[:-1], pts[1:]
    dens = mix.density(0.5 * (a + b))
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (b - a)
    nodes_at = (0.5 * (a + b))[:, None] + half[:, None] * x
    return float(((loss(nodes_at) * w).sum(axis=1) * half * dens).sum())


def smoothed_density(q: BinnedDensity, eps: float, y):
    """Exact (unbinned) density of ``K q`` at ``y``."""
    return _mixture(q, kernel_params(q, eps)).density(y)


def variance_ratio_integral(q: BinnedDensity, eps: float) -> float:
    """``∫ K^(2) q / K q`` over the range; both are constant between breakpoints."""
    kp = kernel_params(q, eps)
    mix = _mixture(q, kp)
    pts = mix.breakpoints(q.range.lo, q.range.hi)
    mid = 0.5 * (pts[:-1] + pts[1:])
    dens = mix.density(mid)
    sq = mix.sq_density(mid)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dens > 0, sq / np.where(dens > 0, dens, 1.0), 0.0)
    return float((ratio * np.diff(pts)).sum())


def variance_bound(eps: float, length: float) -> float:
    return 2.0 * (1.0 + math.log(1.0 / eps) + math.log(length))
