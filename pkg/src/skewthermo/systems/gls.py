"""Generalized Lüroth systems and their natural extensions."""
from __future__ import annotations

import numpy as np

from .ifs import AffineIFS


class GLSSystem:
    """Countable (here: finitely truncated) partition of ``[0, 1)`` into intervals.

    Interval ``e`` is ``[b_e, b_e + a_e)`` with affine inverse branch
    ``x -> a_e x + b_e``. ``meta`` carries per-interval bookkeeping, such as
    ``k(n)`` for partitions derived from a beta-map.
    """

    def __init__(self, lengths, lefts, *, scales=None, meta=None, full_tol=1e-12):
        a = np.asarray(lengths, dtype=float)
        b = np.asarray(lefts, dtype=float)
        if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
            raise ValueError("lengths and lefts must be equal-length 1-d sequences")
        if np.any(a <= 0) or np.any(b < 0) or np.any(b + a > 1 + 1e-12):
            raise ValueError("intervals must lie in [0, 1]")
        order = np.argsort(b, kind="stable")
        self.a, self.b = a[order], b[order]
        if np.any(self.b[1:] < self.b[:-1] + self.a[:-1] - 1e-12):
            raise ValueError("partition intervals overlap")
        # 1/a_e, kept separately so exact powers of beta are not re-derived by division
        self.scale = (1.0 / self.a) if scales is None else np.asarray(scales, dtype=float)[order]
        self.meta = {k: np.asarray(v)[order] for k, v in (meta or {}).items()}
        self.order = order
        self.total_length = float(self.a.sum())
        self.lebesgue_full = abs(self.total_length - 1.0) <= full_tol

    def __len__(self):
        return len(self.a)

    def ifs(self) -> AffineIFS:
        return AffineIFS(self.a, self.b)

    def locate(self, x):
        """Index ``e`` with ``x`` in ``[b_e, b_e + a_e)``; -1 outside the partition."""
        x = np.asarray(x, dtype=float)
        e = np.searchsorted(self.b, x, side="right") - 1
        inside = (e >= 0) & (x < self.b[np.maximum(e, 0)] + self.a[np.maximum(e, 0)])
        return np.where(inside, e, -1)

    def forward(self, x):
        e = self.locate(x)
        if np.any(e < 0):
            raise ValueError("point outside the truncated partition")
        return (x - self.b[e]) * self.scale[e], e


def gls_natural_extension_step(sys: GLSSystem, x, y):
    """``((x - b_e)/a_e, a_e y + b_e)`` for the interval ``e`` containing ``x``.

    Works elementwise on arrays; intervals are left-closed and right-open.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x < 0) | (x >= 1) | (y < 0) | (y >= 1)):
        raise ValueError("(x, y) must lie in [0, 1)^2")
    xn, e = sys.forward(x)
    yn = sys.a[e] * y + sys.b[e]
    if xn.ndim == 0:
        return float(xn), float(yn)
    return xn, yn


def dyadic_gls() -> GLSSystem:
    return GLSSystem([0.5, 0.5], [0.0, 0.5], meta={"k": [0, 0], "i": [1, 2]})
