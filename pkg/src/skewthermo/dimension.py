"""Bowen parameters, Lyapunov exponents and the ``h / chi`` dimension formulas.

All logarithms are natural: entropies are in nats and Lyapunov exponents
are expansion rates ``-integral of log|phi'|``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from . import kernels
from .systems.beta import BetaSystem, gls_partition_from_beta
from .systems.gls import GLSSystem
from .systems.ifs import IntervalIFS
from .thermo import (
    GeometricFamily,
    GibbsMarkov,
    geometric_pressure,
    pressure_derivative,
    pressure_geometric,
)

FORMULAS = ("bowen-root", "h-over-chi", "global-sum", "beta-fiber", "beta-global", "empirical-slope")


class MassDeficitError(ValueError):
    """Frequencies over a truncated partition miss too much mass."""


@dataclass
class DimensionReport:
    value: float
    formula: str
    inputs: dict = field(default_factory=dict)
    uncertainty: float = 0.0
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        if self.formula not in FORMULAS:
            raise ValueError(f"unknown formula {self.formula!r}")
        if self.value < 0:
            raise ValueError(f"dimension {self.value} is negative")

    def to_dict(self):
        inputs = {k: (v.to_dict() if isinstance(v, DimensionReport) else v) for k, v in self.inputs.items()}
        return {
            "value": self.value,
            "formula": self.formula,
            "inputs": inputs,
            "uncertainty": self.uncertainty,
            "diagnostics": list(self.diagnostics),
        }


# ---------------------------------------------------------------------------
# pressure curves


@dataclass
class PressureCurve:
    """Samples ``(t_i, P(t_i))`` of ``t -> P(t log|phi'|)`` on one truncation."""

    ts: np.ndarray
    values: np.ndarray
    truncation: int
    tail_bounds: np.ndarray
    theta: float | None
    ifs: IntervalIFS | None = None

    @property
    def summable(self):
        """Mask of samples inside the summable range ``t > theta``."""
        if self.theta is None:
            return np.ones(len(self.ts), dtype=bool)
        return self.ts > self.theta

    def strictly_decreasing(self, tol=0.0):
        """Every sampled summable pair ``t_1 < t_2`` has ``P(t_1) - P(t_2) > tol``."""
        v = self.values[self.summable]
        if len(v) < 2:
            return True
        # pairwise over all pairs reduces to consecutive ones for sorted t
        return bool(np.all(v[:-1] - v[1:] > tol))

    def second_differences(self):
        m = self.summable
        t, v = self.ts[m], self.values[m]
        if len(t) < 3:
            return np.zeros(0)
        left = (v[1:-1] - v[:-2]) / (t[1:-1] - t[:-2])
        right = (v[2:] - v[1:-1]) / (t[2:] - t[1:-1])
        return 2 * (right - left) / (t[2:] - t[:-2])

    def convex(self, tol=-1e-8):
        d2 = self.second_differences()
        return bool(np.all(d2 >= tol))

    def bracket(self):
        """Consecutive samples with a sign change of ``P``, or ``None``."""
        for i in range(len(self.ts) - 1):
            if self.values[i] > 0 >= self.values[i + 1]:
                return float(self.ts[i]), float(self.ts[i + 1])
        return None

    def rows(self):
        return [(t, p, self.truncation, b) for t, p, b in zip(self.ts, self.values, self.tail_bounds)]


def sample_pressure_curve(ifs: IntervalIFS, ts, nodes=32, workers=None) -> PressureCurve:
    """Pressure of ``t log|phi'|`` on a sorted ``t`` grid, in parallel over ``t``."""
    ts = np.asarray(sorted(float(t) for t in ts))
    if len(ts) == 0:
        raise ValueError("t grid is empty")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        ests = list(pool.map(lambda t: pressure_geometric(ifs, t, nodes=nodes), ts))
    return PressureCurve(
        ts=ts,
        values=np.array([e.value for e in ests]),
        truncation=len(ifs),
        tail_bounds=np.array([e.tail_bound for e in ests]),
        theta=ifs.theta,
        ifs=ifs,
    )


# ---------------------------------------------------------------------------
# Bowen parameter


def bowen_parameter(ifs: IntervalIFS, tol=1e-12, t_max=64.0, nodes=32) -> DimensionReport:
    """Zero of the decreasing function ``t -> P(t log|phi'|)`` by bisection.

    ``P(0) <= 0`` gives 0 (a single branch, say). When ``P`` stays positive
    up to ``t_max`` the report carries ``t_max`` with infinite uncertainty
    and a "no zero" diagnostic.
    """

    def p(t):
        return geometric_pressure(ifs, t, nodes=nodes)

    p0 = p(0.0)
    if p0 <= 0:
        return DimensionReport(0.0, "bowen-root", {"P0": p0, "bracket": [0.0, 0.0]}, 0.0)
    lo, hi = 0.0, 1.0
    while p(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > t_max:
            return DimensionReport(t_max, "bowen-root", {"P0": p0, "bracket": [lo, float("inf")]},
                                   float("inf"), [f"no zero on truncation: P(t) > 0 for all t <= {t_max}"])
    root, res = bisect(p, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, full_output=True)
    # final bracket of the bisection: width halves each iteration from hi - lo
    width = (hi - lo) / 2.0 ** res.iterations
    p_root = p(root)
    return DimensionReport(
        float(root),
        "bowen-root",
        {"P_at_root": p_root, "bracket": [root - width, root + width], "iterations": res.iterations,
         "truncation": len(ifs)},
        float(max(width, tol)),
    )


# ---------------------------------------------------------------------------
# Lyapunov exponents


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    error: float

    def __float__(self):
        return self.value


def lyapunov(mu: GibbsMarkov, ifs: IntervalIFS) -> LyapunovEstimate:
    """``chi = -integral log|phi'_{w_0}(pi(sigma w))| dmu`` by cylinder midpoints.

    Each transition ``u -> v`` of the chain gives a word ``w`` of length
    ``m + 1``; the point ``pi(sigma w)`` is replaced by the midpoint of the
    cylinder of ``w[1:]``. The error bar is the stationary average of the
    largest deviation of ``log|phi'_{w_0}|`` over that cylinder from its
    midpoint value (the cylinder's log-distortion).
    """
    P = mu.P.tocoo()
    words = np.column_stack([mu.states[P.row], mu.states[P.col][:, -1]])
    weight = mu.pi[P.row] * P.data
    a, b = ifs.cylinder(words[:, 1:])
    first = words[:, 0]
    _, dm = ifs.branch(first, 0.5 * (a + b))
    _, da = ifs.branch(first, a)
    _, db = ifs.branch(first, b)
    lm = np.log(dm)
    dev = np.maximum(np.abs(np.log(da) - lm), np.abs(np.log(db) - lm))
    return LyapunovEstimate(float(-(weight * lm).sum()), float((weight * dev).sum()))


# ---------------------------------------------------------------------------
# dimension formulas


def hd_equilibrium_fiber(s, system, h=1e-4, nodes=32) -> DimensionReport:
    """``(P(s) - s P'(s)) / (-P'(s))``, the ``h / chi`` of the equilibrium state of ``s log|phi'|``.

    ``system`` is a finite IFS or a :class:`PressureCurve` built on one; the
    derivative comes from central differences.
    """
    ifs = system.ifs if isinstance(system, PressureCurve) else system
    family = GeometricFamily(ifs, nodes=nodes)
    deriv = pressure_derivative(family, 0.0, s, h)
    est = pressure_geometric(ifs, s, nodes=nodes)
    P, dP = est.value, deriv.dt
    diagnostics = []
    if abs(dP) < 1e-10:
        diagnostics.append(f"ill-conditioned: |P'(s)| = {abs(dP):.3g} below 1e-10")
        return DimensionReport(float("inf") if P - s * dP > 0 else 0.0, "h-over-chi",
                               {"s": s, "P": P, "dP": dP}, float("inf"), diagnostics)
    entropy, chi = P - s * dP, -dP
    value = entropy / chi
    # the truncation gap moves P by at most the tail bound; the difference error is tracked too
    tail = est.tail_bound if np.isfinite(est.tail_bound) else 0.0
    fd_err = abs(deriv.dt - deriv.integral_xi)
    uncertainty = (tail + (s + value) * fd_err) / chi
    if not np.isfinite(est.tail_bound):
        diagnostics.append("tail bound unavailable; truncation error not included")
    return DimensionReport(
        float(value),
        "h-over-chi",
        {"s": s, "P": P, "dP": dP, "entropy": entropy, "chi": chi, "truncation": len(ifs),
         "tail_bound": est.tail_bound, "dP_eigen": deriv.integral_xi},
        float(uncertainty),
        diagnostics,
    )


def entropy_over_lyapunov(mu: GibbsMarkov, ifs: IntervalIFS) -> DimensionReport:
    """``h_mu / chi_mu`` for an explicit chain, with the Lyapunov quadrature error."""
    chi = lyapunov(mu, ifs)
    value = mu.entropy / chi.value
    return DimensionReport(float(value), "h-over-chi",
                           {"entropy": mu.entropy, "chi": chi.value, "chi_error": chi.error},
                           float(value * chi.error / chi.value))


def global_dimension(fiber: DimensionReport, base: DimensionReport) -> DimensionReport:
    """Fiber plus base dimension, uncertainties added."""
    for r in (fiber, base):
        if not np.isfinite(r.value):
            raise ValueError("global dimension needs finite inputs")
    return DimensionReport(fiber.value + base.value, "global-sum", {"fiber": fiber, "base": base},
                           fiber.uncertainty + base.uncertainty,
                           list(fiber.diagnostics) + list(base.diagnostics))


def hd_hat_mu_s(s, orbit, fiber: DimensionReport) -> DimensionReport:
    """``h / chi + h / (2 <log(a_1 + y)>)`` for the natural-extension measure at ``s``.

    ``fiber`` is :func:`hd_equilibrium_fiber` at ``s`` (it supplies ``h`` and
    ``chi``); ``orbit`` holds the Birkhoff average of ``log(a_1(x_k) + y_k)``
    along a long orbit, with its first-half value for the stability check.
    """
    if s <= 0.5:
        raise ValueError("s must exceed 1/2")
    entropy = fiber.inputs["entropy"]
    avg = orbit.mean_log_fiber
    first = fiber.value
    second = entropy / (2.0 * avg)
    diagnostics = list(fiber.diagnostics)
    drift = abs(orbit.half_mean_log_fiber - avg) / abs(avg)
    if drift > 5e-4:
        diagnostics.append(f"insufficient orbit length for 3-digit stability (half-orbit drift {drift:.2g})")
    rel = max(orbit.stderr_log_fiber / avg, drift)
    return DimensionReport(
        float(first + second),
        "global-sum",
        {"s": s, "fiber": first, "base": second, "entropy": entropy, "chi": fiber.inputs["chi"],
         "mean_log_fiber": avg, "orbit_length": orbit.n},
        float(fiber.uncertainty + second * rel),
        diagnostics,
    )


def _partition_weights(freqs, sys):
    if isinstance(sys, BetaSystem):
        gls = gls_partition_from_beta(sys, len(freqs))
        beta = sys.beta
    elif isinstance(sys, GLSSystem) and "k" in sys.meta:
        gls, beta = sys, None
    else:
        raise TypeError("need a BetaSystem or a GLS partition with k(n) bookkeeping")
    mu = np.asarray(freqs, dtype=float)
    if len(mu) != len(gls):
        raise ValueError("one frequency per partition interval is required")
    if np.any(mu < 0):
        raise ValueError("frequencies must be nonnegative")
    total = float(mu.sum())
    if total > 1 + 1e-6:
        raise ValueError(f"frequencies sum to {total} > 1")
    if 1 - total > 1e-3:
        raise MassDeficitError(f"truncated partition misses mass {1 - total:.3g} > 1e-3")
    # gls stores intervals sorted by left end; beta partitions are built in that order already
    k = gls.meta["k"][np.argsort(gls.order)]
    if beta is None:
        beta = float(gls.scale[0] ** (1.0 / (gls.meta["k"][0] + 1)))
    return mu, k, beta, 1 - total


def beta_fiber_dimension(freqs, sys, h) -> DimensionReport:
    """``h / (log beta * sum_n (k(n)+1) mu(I_n x [0,1)))``.

    ``freqs[n-1]`` is the measure of the rectangle over ``I_n``.
    """
    mu, k, beta, deficit = _partition_weights(freqs, sys)
    denom = math.log(beta) * float(((k + 1) * mu).sum())
    diagnostics = [] if abs(deficit) <= 1e-6 else [f"mass deficit {deficit:.3g} exceeds 1e-6"]
    lost = (int(k.max()) + 2) * deficit  # missing mass sits on intervals with at least this k
    return DimensionReport(float(h / denom), "beta-fiber",
                           {"h": h, "beta": beta, "denominator": denom, "mass_deficit": deficit},
                           float(h / denom * lost / max(denom / math.log(beta), 1.0)), diagnostics)


def beta_global_dimension(freqs, sys, h) -> DimensionReport:
    """``2 h / (log beta * sum_n (k(n)+1) mu(I_n x [0,1)))``."""
    fiber = beta_fiber_dimension(freqs, sys, h)
    return DimensionReport(2 * fiber.value, "beta-global", dict(fiber.inputs),
                           2 * fiber.uncertainty, fiber.diagnostics)


def partition_frequencies(gls: GLSSystem, x) -> np.ndarray:
    """Empirical masses of the partition intervals (in input order) from points ``x``."""
    e = gls.locate(np.asarray(x, dtype=float))
    sorted_counts = np.bincount(e[e >= 0], minlength=len(gls))
    out = np.empty(len(gls))
    out[gls.order] = sorted_counts
    return out / len(e)


# ---------------------------------------------------------------------------
# empirical dimensions


def _ball_counts(pts, r):
    return np.searchsorted(pts, pts + r, side="right") - np.searchsorted(pts, pts - r, side="left") - 1


def _mean_slope(pts, radii):
    n = len(pts)
    cnt = np.stack([_ball_counts(pts, r) for r in radii], axis=1)
    ok = np.all(cnt > 0, axis=1)
    lm = np.log(cnt[ok] / (n - 1.0))
    x = np.log(radii) - np.log(radii).mean()
    slopes = ((lm - lm.mean(axis=1, keepdims=True)) @ x) / (x @ x)
    return float(slopes.mean()), int(ok.sum())


def local_dimension_estimate(points, radii=None, drop=2, min_count=8, window=8, groups=10) -> DimensionReport:
    """Average pointwise slope of ``log mu(B(x, r))`` against ``log r``.

    Ball masses come from sorted range counts excluding the centre. The
    default radii halve from half the sample's spread while the median ball
    still holds ``min_count`` points; the fit uses the ``window`` smallest of
    them (eight halvings span a bit over two decades) and the ``drop`` radii
    just above the window are discarded. Explicit ``radii`` lose their
    ``drop`` largest. Points with an empty ball at some radius are left out.

    The standard error is a delete-a-group jackknife over ``groups``
    interleaved subsamples: every ball count shares the same sample, so the
    spread of per-point slopes alone understates the sampling error.
    """
    raw = np.asarray(points, dtype=float).ravel()
    pts = np.sort(raw)
    n = len(pts)
    if n < 1000:
        raise ValueError("need at least 1000 points")
    spread = pts[-1] - pts[0]
    if spread == 0:
        raise ValueError("degenerate sample: all points are equal")
    if radii is None:
        grid = []
        r = spread / 2
        while np.median(_ball_counts(pts, r)) >= min_count:
            grid.append(r)
            r /= 2
        radii = grid[-(window + drop):]
    radii = np.sort(np.asarray(radii, dtype=float))[::-1][drop:]
    if len(radii) < 2 or radii[0] / radii[-1] < 100 * (1 - 1e-12):
        raise ValueError("radii must span at least two decades after dropping the largest")
    value, used = _mean_slope(pts, radii)
    label = np.arange(n) % groups
    jack = np.array([_mean_slope(np.sort(raw[label != g]), radii)[0] for g in range(groups)])
    se = float(math.sqrt((groups - 1) / groups * ((jack - jack.mean()) ** 2).sum()))
    diagnostics = [] if used == n else [f"{n - used} points with an empty ball left out"]
    return DimensionReport(
        max(value, 0.0),
        "empirical-slope",
        {"points": n, "used": used, "radii": radii.tolist(), "stderr": se},
        se,
        diagnostics,
    )


def conditional_fiber_sample(mu: GibbsMarkov, n, rng, forward=None, depth=40) -> np.ndarray:
    """Points ``y = [w_{-1}, w_{-2}, ...]`` of the fiber over a cylinder ``[forward]``.

    The past is drawn from the time-reversed chain started at ``forward``
    (default: the first symbol), truncated after ``depth`` digits, which is
    below float resolution for continued fractions at depth 40.
    """
    first = mu.alphabet[0] if forward is None else int(forward)
    rev = mu.reversed()
    start = rev._state((first,))
    if start < 0:
        raise ValueError(f"symbol {first} is not a state of the chain")
    indptr, indices, cum = rev._cumulative()
    pasts = np.empty((n, depth))
    for i in range(n):
        path = kernels.markov_sample(indptr, indices, cum, start, rng.random(depth))
        pasts[i] = mu.states[path[1:], 0]
    y = np.zeros(n)
    for d in range(depth - 1, -1, -1):
        y = 1.0 / (pasts[:, d] + y)
    return y


def cylinder_cover(ifs: IntervalIFS, depth) -> tuple:
    """Endpoints of all depth-``depth`` cylinder intervals, sorted by left end."""
    ifs._require_finite()
    lo = np.array([ifs.domain[0]])
    hi = np.array([ifs.domain[1]])
    for _ in range(depth):
        e = np.repeat(np.asarray(ifs.symbols), len(lo))
        a, _ = ifs.branch(e, np.tile(lo, len(ifs)))
        b, _ = ifs.branch(e, np.tile(hi, len(ifs)))
        lo, hi = np.minimum(a, b), np.maximum(a, b)
    order = np.argsort(lo, kind="stable")
    return lo[order], hi[order]


def _box_count(lo, hi, eps, offset):
    s = np.floor(lo / eps + offset).astype(np.int64)
    e = np.floor(hi / eps + offset).astype(np.int64)
    prev = np.concatenate([[np.iinfo(np.int64).min + 1], np.maximum.accumulate(e)[:-1]])
    return int(np.clip(e - np.maximum(s, prev + 1) + 1, 0, None).sum())


def box_counting_dimension(ifs: IntervalIFS, depth=20, k_lo=10.0, k_hi=None, step=0.25,
                           offsets=(0.0, 0.25, 0.5, 0.75)) -> DimensionReport:
    """Box-counting dimension of the limit set from its depth-``depth`` cylinder cover.

    Boxes of size ``2^-k`` for ``k`` from ``k_lo`` to ``k_hi`` (default: five
    halvings above the largest cylinder) are counted over shifted grids and
    averaged; the slope of ``log N`` against ``-log eps`` is the estimate and
    the spread over the two half windows is the uncertainty.
    """
    lo, hi = cylinder_cover(ifs, depth)
    if k_hi is None:
        k_hi = math.floor(-math.log2(float((hi - lo).max()))) - 5
    if k_hi - k_lo < 4:
        raise ValueError("cover too coarse for a two-decade fit; increase depth")
    ks = np.arange(k_lo, k_hi + step / 2, step)
    counts = np.array([np.mean([_box_count(lo, hi, 2.0 ** -k, o) for o in offsets]) for k in ks])
    x, y = ks * math.log(2), np.log(counts)
    slope = float(np.polyfit(x, y, 1)[0])
    mid = len(ks) // 2
    halves = [float(np.polyfit(x[:mid + 1], y[:mid + 1], 1)[0]), float(np.polyfit(x[mid:], y[mid:], 1)[0])]
    return DimensionReport(slope, "empirical-slope",
                           {"depth": depth, "k_range": [float(k_lo), float(k_hi)], "half_slopes": halves},
                           float(max(abs(h - slope) for h in halves)))
