"""Brute-force checks of the kernel and estimator identities.

Each check returns a :class:`CheckReport`; nothing here mutates its inputs
and every Monte-Carlo part takes an explicit seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel1d as k1
from .geometry import ParameterNet, PredictionRange, ProblemConfig, build_net, prediction_range
from .kexp import marginalize

GAUSS_NODES = 16


@dataclass
class CheckReport:
    name: str
    passed: bool
    max_dev: float
    tolerance: float
    details: dict = field(default_factory=dict)

    def summary_line(self) -> str:
        return f"CHECK {self.name} {'PASS' if self.passed else 'FAIL'} max_dev={self.max_dev:.3e}"


class PiecewiseLinearLoss:
    """Convex loss ``max_k (a_k y + b_k)``; exposes its kinks as ``breakpoints``."""

    def __init__(self, slopes, intercepts):
        self.slopes = np.asarray(slopes, dtype=float)
        self.intercepts = np.asarray(intercepts, dtype=float)
        if self.slopes.shape != self.intercepts.shape or self.slopes.size == 0:
            raise ValueError("need matching, non-empty slope and intercept arrays")
        a, b = self.slopes, self.intercepts
        kinks = []
        for i in range(a.size):
            for j in range(i + 1, a.size):
                if a[i] != a[j]:
                    kinks.append((b[j] - b[i]) / (a[i] - a[j]))
        self.breakpoints = np.unique(np.asarray(kinks, dtype=float))

    @property
    def lipschitz(self) -> float:
        return float(np.abs(self.slopes).max())

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.max(self.slopes * y[..., None] + self.intercepts, axis=-1)

    @classmethod
    def absolute(cls, center: float, scale: float = 1.0):
        return cls([scale, -scale], [-scale * center, scale * center])

    @classmethod
    def random(cls, rng: np.random.Generator, pieces: int = 4, max_slope: float = 2.0):
        slopes = rng.uniform(-max_slope, max_slope, pieces)
        intercepts = rng.uniform(-1.0, 1.0, pieces)
        return cls(slopes, intercepts)


def random_density(rng: np.random.Generator, rng_range: PredictionRange, sparsity: float = 0.0) -> k1.BinnedDensity:
    mass = rng.random(rng_range.bins)
    if sparsity > 0:
        mass *= rng.random(rng_range.bins) >= sparsity
        if mass.sum() == 0:
            mass[rng.integers(rng_range.bins)] = 1.0
    return k1.BinnedDensity(rng_range, mass / mass.sum())


# ---------------------------------------------------------------- estimator

def expected_estimate(q: k1.BinnedDensity, loss, eps: float, y, exact: bool = True):
    """``E[loss(y_t) / dens(y_t) * K(y_t, y)]`` with ``y_t`` drawn from the binned ``K q``.

    ``exact`` integrates the estimator over each bin (the learner samples
    ``y_t`` uniformly inside its bin). Otherwise ``y_t`` is pinned to the bin
    centre, a midpoint rule whose error grows as bins get wider.
    Vectorised over ``y``.
    """
    kp = k1.kernel_params(q, eps)
    sm = k1.smooth(q, eps, kp)
    rng_range = q.range
    w = rng_range.bin_width
    prob = sm.mass
    dens = prob / w
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    live = prob > 0
    if not exact:
        c = rng_range.centers[live]
        vals = prob[live] * np.asarray(loss(c), dtype=float) / dens[live]
        out = (vals * k1.kernel_eval(c[None, :], ys[:, None], kp)).sum(axis=1)
        return float(out[0]) if np.ndim(y) == 0 else out

    # elementary intervals: the integrand is smooth between these cuts for every y
    start, stop = k1.segment_of(ys, kp)
    kinks = np.asarray(getattr(loss, "breakpoints", ()), dtype=float)
    cuts = np.unique(np.concatenate([rng_range.edges, start, stop, kinks]))
    cuts = cuts[(cuts >= rng_range.lo) & (cuts <= rng_range.hi)]
    a, b = cuts[:-1], cuts[1:]
    k = rng_range.bin_index(0.5 * (a + b))
    keep = live[k]
    a, b, k = a[keep], b[keep], k[keep]
    x, gw = np.polynomial.legendre.leggauss(GAUSS_NODES)
    half = 0.5 * (b - a)
    z = (0.5 * (a + b))[:, None] + half[:, None] * x  # (intervals, nodes)
    estimate = (np.asarray(loss(z), dtype=float) / dens[k][:, None])[None] * k1.kernel_eval(z[None], ys[:, None, None], kp)
    inner = (estimate * gw).sum(axis=-1) * half  # integral of the estimate over each interval
    out = (inner * (prob[k] / w)).sum(axis=1)  # y_t | bin k is uniform with density 1/w
    return float(out[0]) if np.ndim(y) == 0 else out


def check_estimator_unbiased(q: k1.BinnedDensity, loss, eps: float, tolerance: float = 1e-6,
                             points=None, exact: bool = True) -> CheckReport:
    """Compare the expected loss estimate to the adjoint at every point of ``q``'s support.

    The default evaluation points are the centres of bins carrying mass, which
    is where the learner evaluates the estimator.
    """
    kp = k1.kernel_params(q, eps)
    if points is None:
        points = q.centers[q.mass > 0]
    points = np.atleast_1d(np.asarray(points, dtype=float))
    devs = np.abs(expected_estimate(q, loss, eps, points, exact) - k1.adjoint(loss, points, kp))
    max_dev = float(devs.max()) if devs.size else 0.0
    return CheckReport("estimator_unbiased", max_dev <= tolerance, max_dev, tolerance,
                       {"points": points.size, "bins": q.range.bins, "exact": exact})


# ---------------------------------------------------------------- gradient identities

def smoothed_poly_derivative(poly: np.polynomial.Polynomial, delta: float) -> np.polynomial.Polynomial:
    """Derivative of ``E_{v ~ U[-1,1]} poly(y + delta v)``, via the even-moment series."""
    smoothed = np.polynomial.Polynomial([0.0])
    term, k = poly, 0
    while term.coef.any():
        smoothed = smoothed + term * (delta ** (2 * k) / math.factorial(2 * k + 1))
        term, k = term.deriv(2), k + 1
    return smoothed.deriv()


def two_point_average(loss, y: float, delta: float) -> float:
    """Exact average over ``u = +-1`` of the one-point estimate ``loss(y + delta u) u / delta``."""
    return 0.5 * (loss(y + delta) / delta - loss(y - delta) / delta)


def check_gradient_identity(loss, y: float, delta: float, samples: int = 100_000, seed: int = 0,
                            smoothed_derivative=None, tolerance: float = 1e-12) -> CheckReport:
    """Exact u-average against the analytic smoothed derivative, plus a Monte-Carlo run.

    ``smoothed_derivative`` defaults to the series formula when ``loss`` is a
    numpy ``Polynomial``; otherwise it must be supplied.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if smoothed_derivative is None:
        if not isinstance(loss, np.polynomial.Polynomial):
            raise ValueError("smoothed_derivative is required for non-polynomial losses")
        smoothed_derivative = smoothed_poly_derivative(loss, delta)
    exact = two_point_average(loss, y, delta)
    target = float(smoothed_derivative(y))
    dev = abs(exact - target)

    rng = np.random.default_rng(seed)
    u = np.where(rng.random(samples) < 0.5, -1.0, 1.0)
    est = np.asarray(loss(y + delta * u), dtype=float) * u / delta
    mean = float(est.mean())
    se = float(est.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    mc_ok = abs(mean - target) <= 3 * se if se > 0 else abs(mean - target) <= tolerance
    return CheckReport("gradient_identity", dev <= tolerance and mc_ok, dev, tolerance,
                       {"exact": exact, "target": target, "mc_mean": mean, "mc_se": se})


def check_sphere_gradient(f, grad_smoothed, w, delta: float, samples: int = 100_000, seed: int = 0) -> CheckReport:
    """Monte-Carlo of ``(d/delta) f(w + delta u) u`` with ``u`` on the unit sphere,
    against the gradient of the ball-smoothed ``f``, coordinate-wise within 3 SE."""
    w = np.asarray(w, dtype=float)
    d = w.size
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((samples, d))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    vals = np.asarray(f(w + delta * u), dtype=float)
    est = (d / delta) * vals[:, None] * u
    mean = est.mean(axis=0)
    se = est.std(axis=0, ddof=1) / math.sqrt(samples)
    target = np.asarray(grad_smoothed(w), dtype=float)
    z = np.abs(mean - target) / se
    return CheckReport("sphere_gradient", bool(np.all(z <= 3.0)), float(np.abs(mean - target).max()), 0.0,
                       {"mean": mean, "se": se, "target": target, "max_z": float(z.max())})


# ---------------------------------------------------------------- kernel properties

def check_kernel_properties(q: k1.BinnedDensity, eps: float, loss, L: float, tolerance: float = 1e-6) -> CheckReport:
    """Lipschitz ratio of the adjoint, domination, and the variance integral bound.

    The adjoint jumps (by at most ``eps * L``) where ``y`` crosses
    ``y_bar + eps``; the Lipschitz ratio over bin centres stays below ``L``
    when the bin width is at least ``2 eps``.
    """
    kp = k1.kernel_params(q, eps)
    centers = q.centers
    adj = k1.adjoint(loss, centers, kp)

    diff_y = np.abs(centers[:, None] - centers[None, :])
    diff_a = np.abs(adj[:, None] - adj[None, :])
    off = diff_y > 0
    lip_ratio = float((diff_a[off] / diff_y[off]).max()) if off.any() else 0.0
    lip_excess = lip_ratio - L

    smoothed_loss = k1.smoothed_expectation(q, eps, loss)
    slack = 0.5 * smoothed_loss + 0.5 * np.asarray(loss(centers), dtype=float) + 3 * eps * L - adj
    dom_excess = -float(slack.min())

    B = k1.variance_bound(eps, q.range.hi - q.range.lo)
    var = k1.variance_ratio_integral(q, eps)
    var_excess = var - B

    worst = max(lip_excess, dom_excess, var_excess)
    passed = lip_excess <= tolerance and dom_excess <= tolerance and var_excess <= tolerance
    return CheckReport("kernel_properties", passed, max(worst, 0.0), tolerance, {
        "lipschitz_ratio": lip_ratio, "L": L, "domination_min_slack": float(slack.min()),
        "variance_integral": var, "B": B})


# ---------------------------------------------------------------- p/q duality

def check_pq_duality(p, net: ParameterNet, x, estimator_values, tolerance: float = 1e-12) -> CheckReport:
    """``<p, f~>`` over net points against ``<q, l~>`` over bins.

    ``estimator_values`` holds one value per bin; the bin count is its length.
    """
    values = np.asarray(estimator_values, dtype=float)
    p = np.asarray(p, dtype=float)
    rng_range = prediction_range(net, x, values.size)
    lifted = values[rng_range.bin_index(net.predictions(x))]
    lhs = float(p @ lifted)
    q = marginalize(p, net, x, rng_range)
    rhs = float(q.mass @ values)
    dev = abs(lhs - rhs)
    return CheckReport("pq_duality", dev <= tolerance, dev, tolerance, {"net_side": lhs, "bin_side": rhs})


# ---------------------------------------------------------------- preflight

def preflight(seed: int = 0) -> list[CheckReport]:
    """A fixed battery of checks, the one the ``verify`` command runs."""
    rng = np.random.default_rng(seed)
    reports = []

    r64 = PredictionRange(-1.0, 1.0, 64)
    worst = None
    for _ in range(5):
        q = random_density(rng, r64)
        rep = check_estimator_unbiased(q, PiecewiseLinearLoss.random(rng), 0.01, 1e-6)
        worst = rep if worst is None or rep.max_dev > worst.max_dev else worst
    reports.append(worst)

    quad = np.polynomial.Polynomial([0.3, -0.7, 1.5])
    rep = check_gradient_identity(quad, 0.4, 0.25, samples=20_000, seed=seed)
    exp_reps = [check_gradient_identity(np.exp, y, 0.3, samples=20_000, seed=seed + i,
                                        smoothed_derivative=lambda z: np.exp(z) * math.sinh(0.3) / 0.3)
                for i, y in enumerate((-1.0, -0.5, 0.0, 0.5, 1.0))]
    all_g = [rep] + exp_reps
    reports.append(CheckReport("gradient_identity", all(r.passed for r in all_g),
                               max(r.max_dev for r in all_g), 1e-12))

    reports.append(check_sphere_gradient(lambda v: (v * v).sum(axis=-1), lambda v: 2 * v,
                                         np.array([0.2, -0.1, 0.3]), 0.5, samples=50_000, seed=seed))

    worst = None
    for _ in range(5):
        q = random_density(rng, r64, sparsity=0.5)
        loss = PiecewiseLinearLoss.random(rng)
        rep = check_kernel_properties(q, 0.01, loss, loss.lipschitz)
        worst = rep if worst is None or not rep.passed or rep.max_dev > worst.max_dev else worst
    reports.append(worst)

    net = build_net(ProblemConfig(d=2, T=1), 0.25)
    devs = []
    for _ in range(5):
        p = rng.random(len(net))
        p /= p.sum()
        x = rng.standard_normal(2)
        devs.append(check_pq_duality(p, net, x, rng.standard_normal(16)))
    reports.append(max(devs, key=lambda r: (not r.passed, r.max_dev)))
    return reports
