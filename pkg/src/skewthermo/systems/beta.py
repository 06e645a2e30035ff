"""Beta-transformations, their natural-extension stack and the induced GLS map.

The orbit of 1 under ``T_beta`` is computed in exact rational arithmetic on
the binary value of ``beta`` (a float is a dyadic rational), so the digits
``b_j`` of the expansion of 1 are exact for the given float and only the
finiteness decision uses a tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gls import GLSSystem

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def beta_digits(beta: float, x: float, n: int) -> list:
    """Greedy digits ``d_k = floor(beta T^{k-1} x)`` for ``k = 1..n``."""
    if beta <= 1:
        raise ValueError("beta must exceed 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 <= x < 1:
        raise ValueError("x must lie in [0, 1)")
    out = []
    for _ in range(n):
        v = beta * x
        d = math.floor(v)
        out.append(d)
        x = v - d
    return out


@dataclass(frozen=True)
class BetaExpansion:
    digits: tuple
    finite: bool
    length: int | None  # number of nonzero-tail digits when finite
    tol: float
    depth: int


def _orbit_of_one(beta, n, tol):
    b = Fraction(beta)
    t = Fraction(1)
    digits, orbit = [], [Fraction(1)]
    tol_f = Fraction(tol)
    for _ in range(n):
        v = b * t
        d = math.floor(v + tol_f)
        r = v - d
        if abs(r) <= tol_f:
            digits.append(d)
            orbit.append(Fraction(0))
            return digits, orbit, True
        digits.append(d)
        orbit.append(r)
        t = r
    return digits, orbit, False


def beta_expansion_of_one(beta: float, n: int = 64, tol: float = 1e-14) -> BetaExpansion:
    """Greedy expansion ``1 = .b_1 b_2 ...`` to depth ``n``.

    The expansion is reported finite when an orbit point of 1 falls within
    ``tol`` of 0; otherwise it is "not finite by depth ``n``".
    """
    if beta <= 1:
        raise ValueError("beta must exceed 1")
    digits, _, finite = _orbit_of_one(beta, n, tol)
    return BetaExpansion(tuple(digits), finite, len(digits) if finite else None, tol, n)


class BetaSystem:
    """``T_beta(x) = beta x mod 1`` with the stack ``Z_i = [0, T^i 1) x [0, beta^{-i})``."""

    def __init__(self, beta: float, depth: int = 64, tol: float = 1e-14):
        if beta <= 1:
            raise ValueError("beta must exceed 1")
        self.beta = float(beta)
        self.tol = tol
        self.depth = depth
        self._digits, orbit, self.finite = _orbit_of_one(self.beta, depth, tol)
        self._orbit = orbit
        self._refresh()

    @classmethod
    def golden(cls):
        return cls(GOLDEN)

    def _refresh(self):
        n = len(self._digits)
        self.orbit_of_one = np.array([float(t) for t in self._orbit])
        self.inv_pow = self.beta ** -np.arange(n + 2, dtype=float)
        self.prefix = np.concatenate([[0.0], np.cumsum(np.array(self._digits, float) * self.inv_pow[1:n + 1])])

    def extend(self, depth):
        """Lazily deepen an infinite expansion of 1."""
        if self.finite or depth <= len(self._digits):
            return
        self._digits, self._orbit, self.finite = _orbit_of_one(self.beta, depth, self.tol)
        self.depth = depth
        self._refresh()

    @property
    def expansion(self) -> BetaExpansion:
        return BetaExpansion(tuple(self._digits), self.finite,
                             len(self._digits) if self.finite else None, self.tol, self.depth)

    @property
    def levels(self):
        """Number of stack levels (``None`` when the expansion of 1 is infinite)."""
        return len(self._digits) if self.finite else None

    def b(self, j):
        """Digit ``b_j`` (1-based); 0 beyond a finite expansion."""
        if j < 1:
            raise ValueError("digits are indexed from 1")
        if j > len(self._digits):
            if self.finite:
                return 0
            self.extend(max(2 * len(self._digits), j))
        return self._digits[j - 1]

    def level_width(self, i):
        """``T^i 1``, the width of ``Z_i``."""
        if self.finite and i >= len(self._digits):
            return 0.0
        self.b(i + 1)
        return float(self.orbit_of_one[i])

    def partition(self, count):
        """First ``count`` intervals ``I_n`` as ``(n, k, i, left, length)`` rows."""
        rows = []
        k = 0
        while len(rows) < count:
            bk1 = self.b(k + 1)
            if bk1 == 0 and self.finite and k + 1 > len(self._digits):
                break
            for i in range(1, bk1 + 1):
                if len(rows) == count:
                    break
                left = self.prefix[k] + (i - 1) * self.inv_pow[k + 1]
                rows.append((len(rows) + 1, k, i, left, self.inv_pow[k + 1]))
            k += 1
            if k > 4096:
                break
        return rows


def gls_partition_from_beta(sys: BetaSystem, count: int) -> GLSSystem:
    """GLS partition ``I_n``, ``n = 1..count``, with ``k(n)`` and ``i(n)``.

    ``I_n`` has left end ``sum_{j<=k} b_j beta^{-j} + (i-1) beta^{-(k+1)}`` and
    length ``beta^{-(k+1)}``, with ``n = b_1 + ... + b_k + i``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rows = sys.partition(count)
    if len(rows) < count:
        raise ValueError(f"the expansion of 1 supports only {len(rows)} intervals")
    _, k, i, left, length = (np.array(col) for col in zip(*rows))
    scales = sys.beta ** (k + 1.0)
    return GLSSystem(length, left, scales=scales, meta={"k": k.astype(int), "i": i.astype(int)})


def beta_natural_extension_step(sys: BetaSystem, level: int, x: float, y: float, tol=1e-9):
    """One step of the stack map from ``(x, y)`` in ``Z_level``.

    Returns ``(new_level, x', y')``: the fiber coordinate is
    ``.b_1 ... b_i d_1`` followed by ``y/beta`` when ``d_1 < b_{i+1}`` (back to
    level 0), else ``y/beta`` one level up.
    """
    i = int(level)
    if i < 0:
        raise ValueError("level must be nonnegative")
    width = sys.level_width(i)
    if not (0 <= x < width + tol and 0 <= y < sys.inv_pow[i] + tol):
        raise ValueError(f"point ({x}, {y}) is outside stack level {i}")
    v = sys.beta * x
    d = math.floor(v)
    xn = v - d
    bi1 = sys.b(i + 1)
    if d < bi1:
        return 0, xn, sys.prefix[i] + d * sys.inv_pow[i + 1] + y / sys.beta
    if d == bi1:
        return i + 1, xn, y / sys.beta
    raise ValueError(f"digit {d} exceeds b_{i + 1} = {bi1}; point left the stack")


def beta_induced_map(sys: BetaSystem, x: float, y: float, max_steps=10_000):
    """First return of the stack map to ``Z_0``: ``(x', y', return_time)``."""
    if not (0 <= x < 1 and 0 <= y < 1):
        raise ValueError("(x, y) must lie in [0, 1)^2")
    level, steps = 0, 0
    while True:
        level, x, y = beta_natural_extension_step(sys, level, x, y)
        steps += 1
        if level == 0:
            return x, y, steps
        if steps >= max_steps:
            raise RuntimeError(f"no return to Z_0 within {max_steps} steps from a boundary point")


def beta_orbit(sys: BetaSystem, x, y, n, level=0):
    """Stack orbit rows ``(k, x_k, y_k, level_k)`` for ``k = 0..n``."""
    rows = [(0, x, y, level)]
    for k in range(1, n + 1):
        level, x, y = beta_natural_extension_step(sys, level, x, y)
        rows.append((k, x, y, level))
    return rows


# -- golden mean case in the two-rectangle geometry ---------------------------
#
# Z = [0, 1/beta) x [0, 1)  union  [1/beta, 1) x [0, 1/beta),
# W = [0, 1) x [0, 1/beta), and Psi(x, y) = (x, y/beta) maps [0,1)^2 onto W.


def golden_natural_extension(x, y):
    """``(T x, (y + floor(beta x))/beta)`` on the two-rectangle domain."""
    b = GOLDEN
    if x < 1.0 / b:
        if not 0 <= y < 1:
            raise ValueError("point outside the golden domain")
        return b * x, y / b
    if not 0 <= y < 1.0 / b:
        raise ValueError("point outside the golden domain")
    return b * x - 1.0, (y + 1.0) / b


def golden_induced_map(x, y):
    """First return to ``W``: ``(beta x, y/beta)`` or ``(beta^2 x - beta, (y+1)/beta^2)``."""
    b = GOLDEN
    if not (0 <= x < 1 and 0 <= y < 1.0 / b):
        raise ValueError("point outside W")
    if x < 1.0 / b:
        return b * x, y / b, 1
    return b * b * x - b, (y + 1.0) / (b * b), 2


def golden_psi(x, y):
    return x, y / GOLDEN
