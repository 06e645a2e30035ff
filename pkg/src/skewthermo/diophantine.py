"""Continued fractions, approximation coefficients and natural-extension statistics.

For ``x = [a_1, a_2, ...]`` with convergents ``p_k/q_k`` the objects here are
``Theta_k = q_k^2 |x - p_k/q_k|``, the tails ``T_k = [a_{k+1}, a_{k+2}, ...]``
and the pasts ``V_k = [a_k, ..., a_1] = q_{k-1}/q_k``. ``(T_k, V_k)`` is the
orbit of ``(x, 0)`` under the natural extension of the Gauss map.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
import scipy.sparse as sp
from scipy.special import zeta

from . import kernels
from .systems.gauss import gauss_map
from .systems.ifs import GaussIFS, GeometricPotential
from .thermo import GibbsMarkov, discretize, equilibrium_markov

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# expansions


@dataclass(frozen=True)
class CFExpansion:
    x: object
    digits: tuple
    p: tuple  # p_0 .. p_n
    q: tuple
    terminated: bool  # the expansion is finite (x rational) and complete

    def __len__(self):
        return len(self.digits)

    def convergent(self, k) -> Fraction:
        return Fraction(self.p[k], self.q[k])


def _convergents(digits):
    pk, pk1 = 0, 1  # p_0, p_{-1}
    qk, qk1 = 1, 0
    p, q = [pk], [qk]
    for a in digits:
        pk, pk1 = a * pk + pk1, pk
        qk, qk1 = a * qk + qk1, qk
        p.append(pk)
        q.append(qk)
    return tuple(p), tuple(q)


def _expand(x, n):
    """Digits of ``x`` to depth ``n`` and whether the expansion ended."""
    if isinstance(x, mpmath.mpf):
        digits = []
        for _ in range(n):
            if x == 0:
                return digits, True
            inv = 1 / x
            a = int(mpmath.floor(inv))
            digits.append(a)
            x = inv - a
        return digits, x == 0
    if not isinstance(x, Fraction):
        x = float(x)
    digits = []
    for _ in range(n):
        step = gauss_map(x)
        if step.terminated:
            return digits, True
        digits.append(int(step.digit))
        x = step.value
    return digits, x == 0


def cf_expand(x, n) -> CFExpansion:
    """First ``n`` digits of ``x`` in ``(0, 1)`` with exact integer convergents.

    Floats are stepped in floating point, :class:`~fractions.Fraction` and
    ``mpmath.mpf`` values in their own arithmetic. Rationals stop early.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < x < 1:
        raise ValueError("x must lie in (0, 1)")
    digits, done = _expand(x, n)
    p, q = _convergents(digits)
    return CFExpansion(x, tuple(digits), p, q, done)


# ---------------------------------------------------------------------------
# approximation coefficients


@dataclass(frozen=True)
class ThetaSeries:
    """``Theta_k``, ``T_k``, ``V_k`` for ``k = 1..n`` as floats (index 0 is ``k = 1``).

    ``theta`` is the definition ``q_k^2 |x - p_k/q_k|``; ``theta_identity``
    is ``T_k / (1 + T_k V_k)`` and ``theta_prev_identity`` is
    ``V_k / (1 + T_k V_k)``, which equals ``Theta_{k-1}``.
    """

    theta: np.ndarray
    T: np.ndarray
    V: np.ndarray
    theta_identity: np.ndarray
    theta_prev_identity: np.ndarray
    exact: bool  # identities verified exactly in rational arithmetic
    expansion: CFExpansion

    @property
    def n(self):
        return len(self.theta)

    @property
    def residual(self):
        """Largest float residual of both identities."""
        if self.n == 0:
            return 0.0
        r1 = np.abs(self.theta - self.theta_identity).max()
        prev = np.concatenate([[self._theta0], self.theta[:-1]])
        r2 = np.abs(prev - self.theta_prev_identity).max()
        return float(max(r1, r2))

    @property
    def _theta0(self):
        return float(abs(self.expansion.x))  # Theta_0 = q_0^2 |x - p_0/q_0| = x

    @property
    def v_residual(self):
        """Largest ``|V_k - q_{k-1}/q_k|`` with the ratio from the exact convergents."""
        q = self.expansion.q
        exact = np.array([float(Fraction(q[k - 1], q[k])) for k in range(1, self.n + 1)])
        return float(np.abs(self.V - exact).max()) if self.n else 0.0


def theta_series(x, n) -> ThetaSeries:
    """Approximation coefficients of ``x`` to depth ``n``.

    Floats and fractions are computed exactly in rational arithmetic (a float
    is a dyadic rational) and rounded at the end, so the identities are
    checked both exactly and in floating point. ``mpmath.mpf`` input is
    computed at the working precision of ``mpmath.mp``. The series stops
    before the last digit of a rational, where ``T_k = 0``.
    """
    high = isinstance(x, mpmath.mpf)
    xv = x if high else Fraction(x)
    exp = cf_expand(xv, n + 1)
    p, q = exp.p, exp.q
    depth = min(n, len(exp.digits) - 1) if exp.terminated else min(n, len(exp.digits))
    thetas, tails, pasts = [], [], []
    t = xv
    exact = not high
    for k in range(1, depth + 1):
        inv = 1 / t
        t = inv - exp.digits[k - 1]
        v = Fraction(q[k - 1], q[k])
        th = q[k] ** 2 * abs(xv - Fraction(p[k], q[k])) if not high else q[k] ** 2 * abs(xv - mpmath.mpf(p[k]) / q[k])
        if exact:
            prev = q[k - 1] ** 2 * abs(xv - Fraction(p[k - 1], q[k - 1]))
            exact = th == t / (1 + t * v) and prev == v / (1 + t * v)
        thetas.append(th)
        tails.append(t)
        pasts.append(v)
    T = np.array([float(v) for v in tails])
    V = np.array([float(v) for v in pasts])
    return ThetaSeries(
        theta=np.array([float(v) for v in thetas]),
        T=T,
        V=V,
        theta_identity=T / (1 + T * V),
        theta_prev_identity=V / (1 + T * V),
        exact=bool(exact and depth > 0),
        expansion=exp,
    )


# ---------------------------------------------------------------------------
# Doeblin–Lenstra


def dl_cdf(t):
    """``F(t) = t/log 2`` on ``[0, 1/2]`` and ``(1 - t + log 2t)/log 2`` on ``[1/2, 1]``."""
    arr = np.asarray(t, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("t must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        out = np.where(arr <= 0.5, arr / LN2, (1 - arr + np.log(2 * np.maximum(arr, 0.5))) / LN2)
    return float(out) if out.ndim == 0 else out


DEFAULT_T_GRID = tuple(np.round(np.linspace(0.0, 1.0, 101), 12))


@dataclass
class DLResult:
    ts: np.ndarray
    empirical: np.ndarray
    exact: np.ndarray
    counts: np.ndarray  # pooled histogram, last bin is Theta > max(ts)
    total: int
    redraws: int
    seed: object  # master seed; seed i runs on SeedSequence(seed).spawn(num_seeds)[i]
    n: int

    @property
    def deviation(self):
        return np.abs(self.empirical - self.exact)

    @property
    def max_deviation(self):
        return float(self.deviation.max())

    def at(self, t):
        i = int(np.argmin(np.abs(self.ts - t)))
        if abs(self.ts[i] - t) > 1e-12:
            raise KeyError(f"t = {t} is not on the grid")
        return float(self.empirical[i])

    def rows(self):
        return list(zip(self.ts, self.empirical, self.exact, self.deviation))


def _dl_seed(ss, n, edges):
    rng = np.random.default_rng(ss)
    hist = np.zeros(len(edges) + 1, dtype=np.int64)
    done, redraws = 0, 0
    while done < n:
        # 53-bit uniform in (0, 1); a float orbit ending at 0 is restarted from a fresh draw
        x = 0.0
        while x == 0.0:
            x = rng.random()
        h, _, _, k = kernels.dl_counts(x, 0.0, n - done, edges)
        hist += h
        done += k
        if done < n:
            redraws += 1
    return hist, redraws


def dl_experiment(num_seeds, n, seed, ts=DEFAULT_T_GRID, workers=None) -> DLResult:
    """Pooled empirical CDF of ``Theta_1..Theta_n`` over Lebesgue-random starts.

    Seed ``i`` uses the ``i``-th child of ``numpy.random.SeedSequence(seed)``;
    each draws ``x`` uniformly and follows its floating-point Gauss orbit with
    the natural-extension coordinate ``V_k``. Pooling sums integer
    histograms, so the result does not depend on the worker count.
    """
    if num_seeds < 1 or n < 1:
        raise ValueError("num_seeds and n must be positive")
    ts = np.asarray(sorted(set(float(t) for t in ts)))
    exact = dl_cdf(ts)
    children = np.random.SeedSequence(seed).spawn(num_seeds)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda ss: _dl_seed(ss, n, ts), children))
    hist = np.sum([p[0] for p in parts], axis=0)
    total = int(hist.sum())
    emp = np.cumsum(hist)[: len(ts)] / total
    return DLResult(ts, emp, np.atleast_1d(exact), hist, total, int(sum(p[1] for p in parts)), seed, n)


@dataclass(frozen=True)
class BirkhoffAverage:
    value: float
    stderr: float  # across orbits
    n: int
    orbits: int


def _lyap_orbit(ss, m):
    rng = np.random.default_rng(ss)
    total, done = 0.0, 0
    while done < m:
        x = 0.0
        while x == 0.0:
            x = rng.random()
        s, _, k = kernels.gauss_log_derivative_sum(x, m - done)
        total += s
        done += k
    return total / m


def birkhoff_lyapunov(n, seed, orbits=100, workers=None) -> BirkhoffAverage:
    """Average of ``-log|G'| = 2 log(1/x)`` over ``n`` Lebesgue-random Gauss iterates.

    The iterates are split into ``orbits`` floating-point orbits, seeded as in
    :func:`dl_experiment`; an orbit that reaches 0 restarts from a fresh draw.
    """
    if orbits < 2 or n < orbits:
        raise ValueError("need at least two orbits and one iterate per orbit")
    m = n // orbits
    children = np.random.SeedSequence(seed).spawn(orbits)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        means = np.array(list(pool.map(lambda ss: _lyap_orbit(ss, m), children)))
    return BirkhoffAverage(float(means.mean()), float(means.std(ddof=1) / math.sqrt(orbits)), m * orbits, orbits)


# ---------------------------------------------------------------------------
# mu_s digit streams


@dataclass
class DigitStream:
    digits: np.ndarray
    s: float
    k: int
    truncation: int
    mass_deficit: float
    chain: GibbsMarkov = field(repr=False)
    seed: object = None


_CHAINS = {}


def save_chain(mu: GibbsMarkov, path):
    P = mu.P.tocsr()
    np.savez(path, states=mu.states, data=P.data, indices=P.indices, indptr=P.indptr, pi=mu.pi,
             scalars=np.array([mu.pressure, mu.entropy, mu.integral]), alphabet=np.array(mu.alphabet))


def load_chain(path) -> GibbsMarkov:
    with np.load(path) as z:
        n = len(z["pi"])
        P = sp.csr_matrix((z["data"], z["indices"], z["indptr"]), shape=(n, n))
        pressure, entropy, integral = (float(v) for v in z["scalars"])
        return GibbsMarkov(z["states"], P, z["pi"], pressure, entropy, integral,
                           tuple(int(a) for a in z["alphabet"]))


def mu_s_chain(s, k=3, truncation=200, cache_dir=None) -> GibbsMarkov:
    """Equilibrium chain of the ``k``-step discretization of ``zeta_{G,s}`` on digits ``1..N``.

    Chains are memoised in-process and, with ``cache_dir``, on disk.
    """
    if s <= 0.5:
        raise ValueError(f"zeta_(G,s) is not summable for s = {s} <= 1/2")
    key = (float(s), int(k), int(truncation))
    if key in _CHAINS:
        return _CHAINS[key]
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"mu_s-{float(s).hex()}-k{k}-N{truncation}.npz"
        if path.exists():
            _CHAINS[key] = load_chain(path)
            return _CHAINS[key]
    ifs = GaussIFS(int(truncation))
    sub = ifs.subshift()
    mu = equilibrium_markov(sub, discretize(GeometricPotential(ifs, s), sub, k))
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_chain(mu, path)
    _CHAINS[key] = mu
    return mu


def mu_s_digit_sampler(s, k=3, truncation=200, seed=None, n=1_000_000, cache_dir=None) -> DigitStream:
    """Stationary digit stream of length ``n`` approximating ``mu_s``.

    The mass ``mu_s`` puts on digits above the truncation is estimated from
    the Gibbs decay ``mu_s([e]) ~ c e^{-2s}`` fitted at the last digit.
    """
    mu = mu_s_chain(s, k, truncation, cache_dir)
    rng = np.random.default_rng(seed)
    digits = mu.sample(n, rng)
    last = mu.cylinder_mass((int(truncation),))
    deficit = float(last * truncation ** (2 * s) * zeta(2 * s, truncation + 1))
    return DigitStream(digits, float(s), int(k), int(truncation), deficit, mu, seed)


def _stream(source, n, pad=0):
    """Digits ``a_1..a_{n+pad}`` from a digit array or a start value."""
    if isinstance(source, DigitStream):
        source = source.digits
    if isinstance(source, np.ndarray) and source.dtype.kind in "iu":
        if len(source) < n + pad:
            raise ValueError(f"stream holds {len(source)} digits, {n + pad} needed")
        return source[: n + pad].astype(np.int64)
    if isinstance(source, (Fraction, mpmath.mpf)):
        digits, _ = _expand(source, n + pad)
        out = np.asarray(digits, dtype=np.int64)
    else:
        out, _ = kernels.gauss_digits(float(source), n + pad)
    # a terminated expansion is complete, so it only has to reach past digit n
    if len(out) < n + 1:
        raise ValueError(f"orbit terminated after {len(out)} digits (rational start)")
    return out


# ---------------------------------------------------------------------------
# natural-extension orbit statistics

TAIL_PAD = 64  # digits beyond the last point so that T_k is exact to float precision


def natural_extension_orbit(source, n):
    """``(T_k, V_k)``, ``k = 1..n``, and the digits ``a_1..a_{n+pad}``."""
    digits = _stream(source, n, TAIL_PAD)
    tails = kernels.backward_tails(digits)  # tails[k] = T_k
    pasts = kernels.forward_pasts(digits)  # pasts[k] = V_{k+1}
    return tails[1:n + 1], pasts[:n], digits


def _batch_se(values, batches=50):
    m = len(values) // batches
    if m == 0:
        return float("nan")
    means = values[: m * batches].reshape(batches, m).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


@dataclass
class FrequencyTable:
    rect: tuple
    n: int
    hits: int
    frequency: float
    stderr: float
    seed: object = None


def _check_rect(rect):
    (a, b), (c, d) = rect
    if not (0 <= a < b <= 1 and 0 <= c < d <= 1):
        raise ValueError(f"degenerate rectangle {rect}")


def rectangle_frequency(source, n, rect, seed=None) -> FrequencyTable:
    """Frequency of ``(T_k, V_k)`` in the open rectangle ``(a,b) x (c,d)`` over ``k = 1..n``.

    ``source`` is a digit stream, an exact start value, or a float whose
    floating-point orbit supplies Lebesgue-typical digits. The standard error
    is from 50 batch means.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_rect(rect)
    (a, b), (c, d) = rect
    if seed is None:
        seed = getattr(source, "seed", None)
    T, V, _ = natural_extension_orbit(source, n)
    inside = (T > a) & (T < b) & (V > c) & (V < d)
    return FrequencyTable(tuple(map(tuple, rect)), n, int(inside.sum()), float(inside.mean()),
                          _batch_se(inside.astype(float)), seed)


@dataclass
class OrbitIntegrals:
    """Birkhoff averages along one natural-extension orbit."""

    n: int
    mean_log_fiber: float  # <log(a_{k+1} + V_k)>
    half_mean_log_fiber: float  # the same over the first half
    stderr_log_fiber: float
    chi: float  # <-log|G'(T_k)|> = <2 log(1/T_k)>
    stderr_chi: float
    digit_one: float


def orbit_integrals(source, n) -> OrbitIntegrals:
    T, V, digits = natural_extension_orbit(source, n)
    # a_{k+1} + V_k = 1/V_{k+1}
    fib = np.log(digits[1:n + 1] + V)
    lyap = -2.0 * np.log(T)
    return OrbitIntegrals(n, float(fib.mean()), float(fib[: n // 2].mean()), _batch_se(fib),
                          float(lyap.mean()), _batch_se(lyap), float(np.mean(digits[:n] == 1)))


# ---------------------------------------------------------------------------
# Theta pairs


@dataclass
class PairScaling:
    z: float
    z_prime: float
    radii: np.ndarray
    frequencies: np.ndarray
    lower: np.ndarray  # frequency of the (T, V)-box of radius r / C
    upper: np.ndarray  # frequency of the (T, V)-box of radius C r
    C: float
    slope: float
    used: np.ndarray
    notices: list

    @property
    def sandwiched(self):
        return bool(np.all((self.lower <= self.frequencies) & (self.frequencies <= self.upper)))


def _jacobian_norms(T, V):
    """Row-sum norms of ``DF`` and ``DF^{-1}`` for ``F(T,V) = (T, V)/(1 + TV)``."""
    u = 1 + T * V
    j = np.array([[1 / u**2, -T**2 / u**2], [-V**2 / u**2, 1 / u**2]])
    fwd = np.max(np.abs(j).sum(axis=1), axis=0)
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    with np.errstate(divide="ignore"):
        inv = np.array([[j[1, 1], -j[0, 1]], [-j[1, 0], j[0, 0]]]) / det
    back = np.max(np.abs(inv).sum(axis=1), axis=0)
    return fwd, back


def _box_hits(xs, ys, cx, cy, r):
    """Number of points with ``|x - cx| < r`` and ``|y - cy| < r``; ``xs`` sorted."""
    lo = np.searchsorted(xs, cx - r, side="right")
    hi = np.searchsorted(xs, cx + r, side="left")
    return int(np.count_nonzero(np.abs(ys[lo:hi] - cy) < r))


class _PairOrbit:
    """Orbit points sorted once in ``(Theta_k, Theta_{k-1})`` and in ``(T_k, V_k)`` coordinates."""

    def __init__(self, T, V):
        u = 1 + T * V
        th, th_prev = T / u, V / u
        o1 = np.argsort(th, kind="stable")
        o2 = np.argsort(T, kind="stable")
        self.n = len(T)
        self.T, self.V = T, V
        self.theta = (th[o1], th_prev[o1])
        self.tv = (T[o2], V[o2])


def theta_pair_frequency(source, n, z, z_prime, radii, orbit=None) -> PairScaling:
    """Scaling of the frequency of ``(Theta_k, Theta_{k-1})`` near ``(z, z')/(1 + z z')``.

    The event is the open square of half-side ``r`` about the image of
    ``(z, z')`` under ``F(T, V) = (T, V)/(1 + TV)``, which maps ``(T_k, V_k)``
    to ``(Theta_k, Theta_{k-1})``. ``C`` bounds the Lipschitz constants of
    ``F`` and its inverse near ``(z, z')``, so the event lies between the
    ``(T, V)``-squares of half-sides ``r/C`` and ``C r``; those frequencies are
    reported as ``lower`` and ``upper``. The slope is the least-squares fit of
    ``log frequency`` on ``log r`` over radii with at least one hit.
    """
    if not (0 < z < 1 and 0 < z_prime < 1):
        raise ValueError("(z, z') must lie in (0, 1)^2")
    if orbit is None:
        T, V, _ = natural_extension_orbit(source, n)
        orbit = _PairOrbit(T, V)
    n = orbit.n
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    cz, czp = z / (1 + z * z_prime), z_prime / (1 + z * z_prime)
    # Lipschitz bounds on a neighbourhood covering every box used below
    reach = 4 * radii[0]
    g = np.linspace(-1, 1, 41)
    gt = np.clip(z + reach * g, 0.0, 1.0)[:, None]
    gv = np.clip(z_prime + reach * g, 0.0, 1.0)[None, :]
    fwd, back = _jacobian_norms(gt, gv)
    C = float(max(fwd.max(), back.max(), 1.0))
    freq = np.array([_box_hits(*orbit.theta, cz, czp, r) for r in radii]) / n
    lower = np.array([_box_hits(*orbit.tv, z, z_prime, r / C) for r in radii]) / n
    upper = np.array([_box_hits(*orbit.tv, z, z_prime, C * r) for r in radii]) / n
    used = freq > 0
    notices = [f"radius {r:.3g} has no hits; dropped from the fit" for r in radii[~used]]
    slope = float(np.polyfit(np.log(radii[used]), np.log(freq[used]), 1)[0]) if used.sum() >= 2 else float("nan")
    return PairScaling(z, z_prime, radii, freq, lower, upper, C, slope, used, notices)


@dataclass
class PairScalingSummary:
    slope: float
    stderr: float
    points: list

    @property
    def sandwiched(self):
        return all(p.sandwiched for p in self.points)


def theta_pair_scaling(source, n, radii, pairs=16, seed=None) -> PairScalingSummary:
    """:func:`theta_pair_frequency` averaged over ``pairs`` random centres.

    Centres are orbit points ``(T_j, V_j)`` at random times, so they are
    distributed like the orbit's own measure rather than fixed (possibly
    exceptional) points.
    """
    T, V, _ = natural_extension_orbit(source, n)
    orbit = _PairOrbit(T, V)
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < pairs:
        j = int(rng.integers(n))
        if 0 < T[j] < 1 and 0 < V[j] < 1:
            pts.append(theta_pair_frequency(None, n, float(T[j]), float(V[j]), radii, orbit=orbit))
    slopes = np.array([p.slope for p in pts])
    slopes = slopes[np.isfinite(slopes)]
    return PairScalingSummary(float(slopes.mean()), float(slopes.std(ddof=1) / math.sqrt(len(slopes))), pts)


# ---------------------------------------------------------------------------
# convergent rates


@dataclass(frozen=True)
class ConvergentRate:
    """``(1/n) log|x - p_n/q_n|``; ``magnitude`` is its absolute value.

    The sign convention is recorded rather than resolved: the value is
    negative while the Lyapunov exponent it is compared with is positive.
    """

    value: float
    n: int

    @property
    def magnitude(self):
        return abs(self.value)


def lyapunov_from_convergents(source, n) -> ConvergentRate:
    """``(1/n) log|x - p_n/q_n|`` along a digit stream or from a start value.

    Uses ``x - p_n/q_n = (-1)^n T_n / (q_n (q_n + T_n q_{n-1}))`` and
    ``log q_n = -sum_{k<=n} log V_k``, which avoids forming ``q_n``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    digits = _stream(source, n, TAIL_PAD)
    tails = kernels.backward_tails(digits)
    pasts = kernels.forward_pasts(digits)
    log_q = -float(np.log(pasts[:n]).sum())
    t_n, v_n = float(tails[n]), float(pasts[n - 1])
    return ConvergentRate((math.log(t_n) - 2 * log_q - math.log1p(t_n * v_n)) / n, n)
