"""Manneville–Pomeau maps ``f(x) = x + x^{1+alpha} (mod 1)`` and their jump transform.

The inverse branches are ``phi_0`` onto ``[0, c]`` and ``phi_1`` onto
``[c, 1]`` with ``c + c^{1+alpha} = 1``. The jump alphabet consists of the
words ``0^n 1`` (``n >= 0``), coded here by the integer ``n``; the branch
``phi_{0^n 1} = phi_0^n o phi_1`` maps ``[0, 1]`` onto a piece of a countable
partition of ``(0, 1]``.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .ifs import IntervalIFS


class InversionError(ArithmeticError):
    """Safeguarded Newton failed to invert a branch."""


def _solve(alpha, target, lo, hi, tol=1e-14, max_iter=100):
    """Solve ``x + x^{1+alpha} = target`` on ``[lo, hi]`` elementwise.

    Newton steps that leave the bracket are replaced by bisection.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    x = np.clip(target - np.power(np.maximum(target, 0.0), 1.0 + alpha), lo, hi)
    a1 = 1.0 + alpha
    for _ in range(max_iter):
        g = x + np.power(x, a1) - target
        lo = np.where(g < 0, x, lo)
        hi = np.where(g > 0, x, hi)
        dg = 1.0 + a1 * np.power(x, alpha)
        step = g / dg
        nxt = x - step
        bad = (nxt <= lo) | (nxt >= hi) | ~np.isfinite(nxt)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        moved = np.abs(nxt - x)
        x = nxt
        if np.all(moved <= tol * np.maximum(np.abs(x), 1e-300)):
            return x
    if np.all(hi - lo <= tol * np.maximum(np.abs(x), 1e-300)) or np.all(moved <= 1e-13 * np.abs(x)):
        return x
    raise InversionError("Newton inversion of the MP branch did not converge")


class ParabolicSystem(IntervalIFS):
    """Jump transform of the MP map with branches ``0^n 1`` for ``n < cutoff``.

    ``cutoff=None`` keeps the countable alphabet (evaluation only).
    """

    kind = "custom"

    def __init__(self, alpha: float, cutoff: int | None = None):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        if cutoff is not None and cutoff < 1:
            raise ValueError("cutoff must be at least 1")
        super().__init__(None if cutoff is None else range(cutoff))
        self.alpha = float(alpha)
        self.cutoff = cutoff
        self.c = brentq(lambda z: z + z ** (1.0 + alpha) - 1.0, 0.0, 1.0, xtol=1e-17, rtol=1e-15)
        # |phi_{0^n 1}'| ~ n^{-(1+alpha)/alpha}
        self.exponent = (1.0 + alpha) / alpha
        self.theta = alpha / (1.0 + alpha)

    def truncate(self, n):
        return ParabolicSystem(self.alpha, int(n))

    def f(self, x):
        y = x + np.power(x, 1.0 + self.alpha)
        return np.where(y >= 1.0, y - 1.0, y)

    def fprime(self, x):
        return 1.0 + (1.0 + self.alpha) * np.power(x, self.alpha)

    def phi0(self, y):
        y = np.asarray(y, dtype=float)
        return _solve(self.alpha, y, 0.0, np.minimum(y, self.c))

    def phi1(self, y):
        y = np.asarray(y, dtype=float)
        return _solve(self.alpha, y + 1.0, self.c, 1.0)

    def chain(self, x, n_max):
        """Points ``phi_{0^n 1}(x)`` and derivatives for ``n = 0..n_max-1``.

        Returns arrays of shape ``(n_max,) + x.shape``; one inversion per level.
        """
        x = np.asarray(x, dtype=float)
        vals = np.empty((n_max,) + x.shape)
        ders = np.empty((n_max,) + x.shape)
        z = self.phi1(x)
        d = 1.0 / self.fprime(z)
        vals[0], ders[0] = z, d
        for n in range(1, n_max):
            z = self.phi0(z)
            d = d / self.fprime(z)
            vals[n], ders[n] = z, d
        return vals, ders

    def _branch(self, e, x):
        e = np.asarray(e, dtype=np.int64)
        if np.any(e < 0):
            raise ValueError("jump symbols are nonnegative")
        flat_e, flat_x = e.ravel(), x.ravel()
        z = self.phi1(flat_x)
        d = 1.0 / self.fprime(z)
        for n in range(1, int(flat_e.max(initial=0)) + 1):
            act = flat_e >= n
            zn = self.phi0(z[act])
            z[act] = zn
            d[act] = d[act] / self.fprime(zn)
        return z.reshape(e.shape), d.reshape(e.shape)

    def branch_table(self, x):
        self._require_finite()
        vals, ders = self.chain(np.asarray(x, dtype=float), self.cutoff)
        return vals.T, ders.T

    def tail_weight(self, t, n):
        # heuristic: tail of a series comparable to sum n^{-t * exponent}
        return None

    def hoelder_pair(self, t):
        return (float("inf"), 1.0)


def mp_jump_branches(alpha: float, cutoff: int) -> ParabolicSystem:
    """Jump-transform branch set ``{0^n 1 : 0 <= n < cutoff}`` of the MP map."""
    return ParabolicSystem(alpha, cutoff)


def derivative_slope(alpha, n_lo=100, n_hi=10_000, x=None, points=40):
    """Log-log regression slope of ``|phi_{0^n 1}'(x)|`` against ``n``.

    Returns the slope; ``x`` defaults to the midpoint of ``[0, 1]``.
    """
    sys = ParabolicSystem(alpha)
    x = 0.5 if x is None else x
    _, ders = sys.chain(np.asarray([x]), n_hi + 1)
    ns = np.unique(np.geomspace(n_lo, n_hi, points).astype(int))
    return float(np.polyfit(np.log(ns), np.log(ders[ns, 0]), 1)[0])
