"""The Gauss map, its geometric potentials and its natural extension."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

from .ifs import GaussIFS, GeometricPotential


class OrbitTerminated(ArithmeticError):
    """The orbit reached 0, so the next digit is undefined."""


class GaussStep(NamedTuple):
    value: float
    digit: int
    terminated: bool = False


TERMINATED = GaussStep(0.0, 0, True)


def gauss_map(x):
    """``G(x) = 1/x - floor(1/x)`` with the digit ``floor(1/x)``.

    Accepts floats or :class:`fractions.Fraction`; fractions are stepped
    exactly. ``x == 0`` returns the :data:`TERMINATED` sentinel.
    """
    if x == 0:
        return TERMINATED
    if not 0 < x < 1:
        raise ValueError("gauss_map expects x in [0, 1)")
    if isinstance(x, Fraction):
        inv = 1 / x
        n = math.floor(inv)
        return GaussStep(inv - n, n)
    inv = 1.0 / x
    n = math.floor(inv)
    return GaussStep(inv - n, n)


def gauss_geometric_potential(s: float) -> GeometricPotential:
    """``zeta_{G,s}(omega) = -2s log(omega_0 + [omega_1, omega_2, ...])``."""
    return GeometricPotential(GaussIFS(None), s)


def gauss_natural_extension_step(x, y):
    """``(G(x), 1/(a_1(x) + y))``; iterating from ``(x, 0)`` gives ``(T_n, V_n)``."""
    step = gauss_map(x)
    if step.terminated:
        raise OrbitTerminated("x = 0 has no further digits")
    if not 0 <= y <= 1:
        raise ValueError("y must lie in [0, 1]")
    return step.value, 1 / (step.digit + y)
