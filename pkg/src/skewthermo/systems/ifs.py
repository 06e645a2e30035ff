"""One-dimensional conformal IFS on an interval and their geometric potentials.

Every branch ``phi_e`` is a monotone contraction of the domain whose
derivative modulus is monotone as well; this holds for the affine, Möbius
(Gauss) and Manneville–Pomeau jump branches built here and lets cylinder
extrema be read off at interval endpoints.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import zeta

from ..shift import PotentialSpec, TruncatedSubshift, Word

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class IntervalIFS:
    """Finite or countable family of inverse branches on ``domain``.

    Subclasses provide :meth:`_branch` evaluating ``phi_e(x)`` and
    ``|phi_e'(x)|`` elementwise for branch ids ``e``.
    """

    kind = "custom"
    theta = None  # summability threshold of t -> sum |phi_e'|^t, None if finite

    def __init__(self, symbols, domain=(0.0, 1.0)):
        self.symbols = None if symbols is None else tuple(int(s) for s in symbols)
        self.domain = (float(domain[0]), float(domain[1]))

    # -- structure ---------------------------------------------------------
    @property
    def countable(self):
        return self.symbols is None

    def _require_finite(self):
        if self.symbols is None:
            raise ValueError("truncate the countable system before this computation")

    def __len__(self):
        self._require_finite()
        return len(self.symbols)

    def subshift(self) -> TruncatedSubshift:
        self._require_finite()
        return TruncatedSubshift(self.symbols)

    def truncate(self, n):
        raise NotImplementedError(f"{type(self).__name__} has no truncation schedule")

    def tail_weight(self, t, n):
        """``sum_{e beyond the first n symbols} sup |phi_e'|^t`` if known."""
        return None

    # -- evaluation ----------------------------------------------------------
    def _branch(self, e, x):
        raise NotImplementedError

    def branch(self, e, x):
        """``(phi_e(x), |phi_e'(x)|)`` with broadcasting over ``e`` and ``x``."""
        e, x = np.broadcast_arrays(np.asarray(e, dtype=np.int64), np.asarray(x, dtype=float))
        return self._branch(e, x)

    def branch_table(self, x):
        """Values and derivative moduli of every branch at the points ``x``.

        Returns two arrays of shape ``(len(x), number of branches)``.
        """
        self._require_finite()
        x = np.asarray(x, dtype=float)
        e = np.asarray(self.symbols, dtype=np.int64)
        return self.branch(e[None, :], x[:, None])

    def compose(self, words, x):
        """``phi_w(x)`` and ``|phi_w'(x)|`` for each row ``w`` of ``words``.

        ``phi_w = phi_{w_0} o ... o phi_{w_{n-1}}``; ``x`` broadcasts against the rows.
        """
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        y = np.broadcast_to(np.asarray(x, dtype=float), (len(w),)).copy()
        d = np.ones(len(w))
        for j in range(w.shape[1] - 1, -1, -1):
            y, dj = self.branch(w[:, j], y)
            d = d * dj
        return y, d

    def cylinder(self, words):
        """Endpoints ``(left, right)`` of the intervals ``phi_w(domain)``."""
        lo, hi = self.domain
        a, _ = self.compose(words, lo)
        b, _ = self.compose(words, hi)
        return np.minimum(a, b), np.maximum(a, b)

    def derivative_range(self, words):
        """``(min, max)`` of ``|phi_w'|`` over the domain (endpoint extrema)."""
        lo, hi = self.domain
        _, da = self.compose(words, lo)
        _, db = self.compose(words, hi)
        return np.minimum(da, db), np.maximum(da, db)

    def contraction_bounds(self):
        self._require_finite()
        lo, hi = self.domain
        _, da = self.branch(np.asarray(self.symbols), lo)
        _, db = self.branch(np.asarray(self.symbols), hi)
        return np.maximum(da, db)

    def periodic_points(self, words, tol=1e-15, max_iter=500):
        """Fixed points of ``phi_w`` for each row ``w`` (by contraction)."""
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        y = np.full(len(w), 0.5 * (self.domain[0] + self.domain[1]))
        for _ in range(max_iter):
            z, _ = self.compose(w, y)
            done = np.max(np.abs(z - y)) <= tol * max(1.0, np.max(np.abs(z)))
            y = z
            if done:
                break
        return y

    def open_set_check(self, n, tol=0.0):
        """True iff images of distinct length-``n`` words have disjoint interiors."""
        words = self.subshift().words(n)
        a, b = self.cylinder(words)
        order = np.argsort(a, kind="stable")
        a, b = a[order], b[order]
        return bool(np.all(a[1:] >= b[:-1] - tol))

    def hoelder_pair(self, t):
        """``(C, beta)`` with ``var_n(t log|phi'|) <= C e^{-beta n}`` (heuristic default)."""
        return (float("inf"), 1.0)


class AffineIFS(IntervalIFS):
    """Branches ``phi_e(x) = a_e x + b_e`` on ``[0, 1]`` with ``0 < a_e < 1``."""

    kind = "affine"

    def __init__(self, ratios, offsets, symbols=None):
        ratios = np.asarray(ratios, dtype=float)
        offsets = np.asarray(offsets, dtype=float)
        if ratios.shape != offsets.shape or ratios.ndim != 1 or len(ratios) == 0:
            raise ValueError("ratios and offsets must be equal-length 1-d sequences")
        if np.any(ratios <= 0) or np.any(ratios >= 1):
            raise ValueError("affine ratios must lie in (0, 1)")
        symbols = tuple(range(len(ratios))) if symbols is None else tuple(symbols)
        if len(symbols) != len(ratios) or list(symbols) != sorted(set(symbols)):
            raise ValueError("symbols must be strictly increasing, one per branch")
        super().__init__(symbols)
        self.ratios, self.offsets = ratios, offsets
        self._lut = np.asarray(self.symbols, dtype=np.int64)

    @classmethod
    def cantor(cls, m=3):
        """Middle-thirds type Cantor system: two branches of ratio ``1/m``."""
        return cls([1.0 / m, 1.0 / m], [0.0, 1.0 - 1.0 / m])

    def _branch(self, e, x):
        i = np.searchsorted(self._lut, e)
        a = self.ratios[i]
        return a * x + self.offsets[i], a

    def hoelder_pair(self, t):
        return (0.0, 1.0)


class GaussIFS(IntervalIFS):
    """Continued-fraction branches ``g_n(x) = 1/(n + x)``.

    ``digits`` is either a count ``N`` (digits ``1..N``), an explicit digit
    set, or ``None`` for the full countable system.
    """

    kind = "moebius"
    theta = 0.5

    def __init__(self, digits=None):
        if digits is None:
            symbols = None
        elif isinstance(digits, (int, np.integer)):
            if digits < 1:
                raise ValueError("need at least one digit")
            symbols = range(1, int(digits) + 1)
        else:
            symbols = sorted(int(d) for d in digits)
            if not symbols or symbols[0] < 1:
                raise ValueError("Gauss digits are positive integers")
        super().__init__(symbols)
        self.consecutive = symbols is not None and self.symbols == tuple(range(1, len(self.symbols) + 1))

    def truncate(self, n):
        return GaussIFS(int(n))

    def _branch(self, e, x):
        z = e + x
        return 1.0 / z, 1.0 / (z * z)

    def periodic_points(self, words, tol=1e-15, max_iter=500):
        """Fixed points of ``g_w`` in closed form.

        ``g_w(x) = (p_k + p_{k-1} x) / (q_k + q_{k-1} x)`` with the convergents of
        ``w``, so the fixed point is the positive root of
        ``q_{k-1} x^2 + (q_k - p_{k-1}) x - p_k = 0``.
        """
        w = np.atleast_2d(np.asarray(words, dtype=np.int64)).astype(float)
        p_prev, p = np.ones(len(w)), np.zeros(len(w))
        q_prev, q = np.zeros(len(w)), np.ones(len(w))
        for j in range(w.shape[1]):
            p_prev, p = p, w[:, j] * p + p_prev
            q_prev, q = q, w[:, j] * q + q_prev
        b = q - p_prev
        # cancellation-free root 2c / (b + sqrt(b^2 + 4ac)), with b >= 0
        return 2 * p / (b + np.sqrt(b * b + 4 * q_prev * p))

    def tail_weight(self, t, n):
        # sup over [0,1] of |g_n'|^t is n^{-2t}, so the tail sum is a Hurwitz zeta value
        if 2.0 * t <= 1.0:
            return float("inf")
        return float(zeta(2.0 * t, n + 1))

    def hoelder_pair(self, t):
        # log|g_n'| is 2-Lipschitz and depth-m cylinders shrink like GOLDEN^{-2m}
        return (2.0 * abs(t) * GOLDEN ** 4, 2.0 * math.log(GOLDEN))


class GeometricPotential(PotentialSpec):
    """``psi(omega) = t log|phi'_{omega_0}(pi(sigma omega))|``.

    For the Gauss system with ``t = s`` this is ``-2s log(omega_0 + [omega_1, ...])``.
    """

    def __init__(self, ifs: IntervalIFS, t: float):
        self.ifs = ifs
        self.t = float(t)
        self.kstep = 1 if ifs.kind == "affine" else None
        self.hoelder = ifs.hoelder_pair(self.t)

    def __repr__(self):
        return f"GeometricPotential({type(self.ifs).__name__}, t={self.t})"

    @property
    def summable(self):
        theta = self.ifs.theta
        return True if theta is None else self.t > theta

    def tail_weight(self, n_symbols):
        return self.ifs.tail_weight(self.t, n_symbols)

    def truncated(self, n):
        return GeometricPotential(self.ifs.truncate(n), self.t)

    def bounds(self, words, sub=None):
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        lo, hi = self.ifs.domain
        if w.shape[1] == 1:
            ya = np.full(len(w), lo)
            yb = np.full(len(w), hi)
        else:
            ya, yb = self.ifs.cylinder(w[:, 1:])
        _, da = self.ifs.branch(w[:, 0], ya)
        _, db = self.ifs.branch(w[:, 0], yb)
        va, vb = self.t * np.log(da), self.t * np.log(db)
        return np.minimum(va, vb), np.maximum(va, vb)

    def sup_sum(self, words, sub=None):
        """Exact ``sup S_n psi|[w] = t max log|phi_w'|`` over the domain."""
        dmin, dmax = self.ifs.derivative_range(words)
        return np.maximum(self.t * np.log(dmin), self.t * np.log(dmax))

    def value(self, windows):
        """Exact values; defined only for affine systems, where ``psi`` is 1-step."""
        if self.kstep != 1:
            raise ValueError("pointwise values need a k-step potential; discretize first")
        w = np.atleast_2d(np.asarray(windows, dtype=np.int64))
        _, d = self.ifs.branch(w[:, 0], self.ifs.domain[0])
        return self.t * np.log(d)

    def periodic_value(self, words):
        """``psi`` at the periodic point ``w w w ...`` of each row."""
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        rotated = np.roll(w, -1, axis=1)
        y = self.ifs.periodic_points(rotated)
        _, d = self.ifs.branch(w[:, 0], y)
        return self.t * np.log(d)


def distortion_constant(ifs: IntervalIFS, word, grid=257) -> float:
    """``max/min`` of ``|phi_w'|`` over the domain, sampled on a fine grid."""
    symbols = word.symbols if isinstance(word, Word) else tuple(word)
    lo, hi = ifs.domain
    x = np.linspace(lo, hi, grid)
    w = np.tile(np.asarray(symbols, dtype=np.int64), (grid, 1))
    _, d = ifs.compose(w, x)
    return float(d.max() / d.min())
