"""Pressure, Gibbs/equilibrium chains, pressure derivatives and conditional masses.

k-step potentials on a :class:`~skewthermo.shift.TruncatedSubshift` are handled
exactly through the block transfer matrix. Geometric potentials
``t log|phi'|`` of an interval IFS are handled by a Chebyshev collocation of
the transfer operator ``L_t f(x) = sum_e |phi_e'(x)|^t f(phi_e(x))``, which
keeps the whole countable tail of each branch instead of discretizing it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from . import kernels
from .shift import (
    KStepPotential,
    PotentialSpec,
    TruncatedSubshift,
    TwoSidedPotential,
    Word,
    combine,
    variation_bound,
)
from .systems.ifs import AffineIFS, GeometricPotential, IntervalIFS


class ReducibleError(ValueError):
    """The transfer matrix is not irreducible on the truncation."""


class ConvergenceError(ArithmeticError):
    """An iterative eigen-solve did not converge."""


# ---------------------------------------------------------------------------
# transfer matrices and Perron vectors


class TransferMatrix:
    """Block transfer matrix of a k-step potential.

    States are the admissible ``m``-blocks with ``m = max(k-1, 1)``; the
    transition ``u -> v`` of the ``(m+1)``-word ``w`` carries weight
    ``exp(psi(w_0..w_{k-1}))``. Weights are stored shifted by ``shift``, the
    largest log-weight, so entries lie in ``(0, 1]``.
    """

    def __init__(self, sub: TruncatedSubshift, pot: KStepPotential):
        if pot.kstep is None:
            raise ValueError("transfer matrices need a k-step potential; discretize first")
        self.sub, self.pot = sub, pot
        self.k = pot.kstep
        self.m = max(self.k - 1, 1)
        size = len(sub)
        blocks = sub.word_indices(self.m)
        if len(blocks) == 0:
            raise ReducibleError("no admissible blocks")
        dims = (size,) * self.m
        codes = np.ravel_multi_index(blocks.T, dims) if self.m > 1 else blocks[:, 0]
        words = sub.word_indices(self.m + 1)
        from_code = np.ravel_multi_index(words[:, :-1].T, dims) if self.m > 1 else words[:, 0]
        to_code = np.ravel_multi_index(words[:, 1:].T, dims) if self.m > 1 else words[:, 1]
        self.rows = np.searchsorted(codes, from_code)
        self.cols = np.searchsorted(codes, to_code)
        self.block_index = blocks
        self.states = sub.symbol_array[blocks]
        symbols = sub.symbol_array[words]
        self.words = symbols
        logw = pot.value(symbols[:, : self.k])
        if not np.all(np.isfinite(logw)):
            raise ValueError("potential must be finite on admissible words")
        self.logw = logw
        self.shift = float(logw.max())
        n = len(blocks)
        self.matrix = sp.csr_matrix((np.exp(logw - self.shift), (self.rows, self.cols)), shape=(n, n))
        self._codes = codes
        self._dims = dims

    @property
    def size(self):
        return self.matrix.shape[0]

    def state_of(self, blocks):
        """Row indices of the given symbol blocks (shape ``(r, m)``)."""
        idx = np.vectorize(self.sub.index, otypes=[np.int64])(np.atleast_2d(blocks))
        codes = np.ravel_multi_index(idx.T, self._dims) if self.m > 1 else idx[:, 0]
        pos = np.searchsorted(self._codes, codes)
        pos = np.clip(pos, 0, len(self._codes) - 1)
        return np.where(self._codes[pos] == codes, pos, -1)

    def check_irreducible(self):
        ncomp, labels = connected_components(self.matrix, directed=True, connection="strong")
        if ncomp > 1:
            sizes = np.bincount(labels)
            raise ReducibleError(
                f"transfer matrix has {ncomp} communicating classes (largest {sizes.max()} states); "
                "restrict the alphabet to one class"
            )


def _power(a, v, tol, patience, max_iter):
    lam_old, calm, lam = None, 0, float("nan")
    for _ in range(max_iter):
        w = a @ v
        lam = float(w.sum())
        if lam <= 0 or not np.isfinite(lam):
            raise ConvergenceError("power iteration collapsed; matrix may be reducible")
        v = w / lam
        if lam_old is not None and abs(lam - lam_old) <= tol * lam:
            calm += 1
            if calm >= patience:
                return lam, v, True
        else:
            calm = 0
        lam_old = lam
    return lam, v, False


def perron(matrix, *, tol=1e-13, patience=10, max_iter=20_000, transpose=False):
    """Perron root and nonnegative eigenvector by power iteration.

    Starts from the all-ones vector, renormalizes to unit sum every sweep and
    stops once the relative eigenvalue increment stays below ``tol`` for
    ``patience`` consecutive sweeps. A periodic matrix never settles; it is
    retried as ``A + rho I``, which has the same Perron vector.
    """
    a = matrix.T.tocsr() if transpose else matrix.tocsr()
    n = a.shape[0]
    v0 = np.full(n, 1.0 / n)
    lam, v, ok = _power(a, v0, tol, patience, max_iter)
    if ok:
        return lam, v
    rho = lam
    lam, v, ok = _power(a + rho * sp.identity(n, format="csr"), v0, tol, patience, max_iter)
    if ok:
        return lam - rho, v
    raise ConvergenceError(f"power iteration did not converge in {max_iter} sweeps")


@dataclass
class PressureEstimate:
    value: float
    truncation: int
    tail_bound: float
    method: str
    heuristic: bool = False
    discretization_error: float = 0.0
    possibly_infinite: bool = False
    sequence: list = field(default_factory=list)
    schedule: list = field(default_factory=list)

    def to_dict(self):
        return {
            "value": self.value,
            "truncation": self.truncation,
            "tail_bound": self.tail_bound,
            "method": self.method,
            "heuristic": self.heuristic,
            "discretization_error": self.discretization_error,
            "possibly_infinite": self.possibly_infinite,
            "sequence": list(self.sequence),
            "schedule": list(self.schedule),
        }


def pressure_spectral(sub: TruncatedSubshift, pot: KStepPotential, *, tol=1e-13) -> PressureEstimate:
    """``log`` of the Perron root of the block transfer matrix."""
    tm = TransferMatrix(sub, pot)
    tm.check_irreducible()
    lam, _ = perron(tm.matrix, tol=tol)
    return PressureEstimate(
        value=math.log(lam) + tm.shift,
        truncation=len(sub),
        tail_bound=0.0,
        method="spectral",
        discretization_error=float(getattr(pot, "error", 0.0)),
    )


# ---------------------------------------------------------------------------
# definition sequences


def pressure_definition_sequence(sub: TruncatedSubshift, pot: PotentialSpec, n_max: int,
                                 *, budget=5_000_000) -> list:
    """``a_n = (1/n) log sum_{|w| = n} exp(sup S_n psi|[w])`` for ``n = 1..n_max``.

    k-step potentials use a log-domain transfer recursion over blocks; other
    potentials enumerate cylinders, subject to ``budget`` words per length.
    An empty cylinder set gives ``-inf``.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if pot.kstep is not None:
        return _definition_kstep(sub, pot, n_max)
    out = []
    for n in range(1, n_max + 1):
        if len(sub) ** n > budget:
            raise MemoryError(f"{len(sub)}^{n} cylinders exceed the enumeration budget")
        words = sub.words(n)
        if len(words) == 0:
            out.append(-math.inf)
            continue
        out.append(float(logsumexp(pot.sup_sum(words, sub))) / n)
    return out


def _definition_kstep(sub, pot, n_max):
    k = pot.kstep
    m = max(k - 1, 1)
    out = []
    for n in range(1, min(n_max, m - 1) + 1):
        words = sub.words(n)
        out.append(float(logsumexp(pot.sup_sum(words, sub))) / n if len(words) else -math.inf)
    if n_max < m:
        return out
    try:
        tm = TransferMatrix(sub, pot)
    except ReducibleError:
        return out + [-math.inf] * (n_max - len(out))
    final = pot.sup_sum(tm.states, sub)
    fshift = float(final.max())
    ef = np.exp(final - fshift)
    lt = tm.matrix.T.tocsr()
    v = np.ones(tm.size)
    log_scale = 0.0
    for n in range(m, n_max + 1):
        if n > m:
            v = lt @ v
            s = v.sum()
            if s == 0:
                out.extend([-math.inf] * (n_max - n + 1))
                return out
            v /= s
            log_scale += math.log(s)
        total = float(v @ ef)
        if total == 0:
            out.append(-math.inf)
            continue
        out.append((log_scale + (n - m) * tm.shift + fshift + math.log(total)) / n)
    return out


def two_sided_definition_sequence(sub: TruncatedSubshift, pot: TwoSidedPotential, n_max: int) -> list:
    """Cylinder-sum pressure sequence for a finite-range two-sided potential.

    Brute force: ``sup`` of ``S_n psi`` over ``[w]_0^{n-1}`` ranges over all
    admissible pasts and futures that the windows reach.
    """
    past = max(0, -pot.lo)
    future = max(0, pot.hi)
    out = []
    for n in range(1, n_max + 1):
        length = past + n + future
        words = sub.words(length)
        if len(words) == 0:
            out.append(-math.inf)
            continue
        s = np.zeros(len(words))
        for j in range(n):
            c = past + j
            s += pot.value(words[:, c + pot.lo:c + pot.hi + 1])
        core = words[:, past:past + n]
        _, owner = np.unique(core, axis=0, return_inverse=True)
        owner = owner.ravel()
        best = np.full(owner.max() + 1, -np.inf)
        np.maximum.at(best, owner, s)
        out.append(float(logsumexp(best)) / n)
    return out


# ---------------------------------------------------------------------------
# Gibbs / equilibrium chains


@dataclass
class GibbsMarkov:
    """Stationary Markov chain on ``m``-blocks realizing an equilibrium state."""

    states: np.ndarray  # (S, m) symbol blocks
    P: sp.csr_matrix
    pi: np.ndarray
    pressure: float
    entropy: float
    integral: float
    alphabet: tuple
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    gibbs_constant: float = float("nan")
    adjacency: np.ndarray | None = None

    def __post_init__(self):
        self.m = self.states.shape[1]
        self._lookup = {tuple(int(s) for s in row): i for i, row in enumerate(self.states)}
        self._cum = None

    @classmethod
    def from_transition(cls, P, symbols=None):
        """Chain with explicit 1-step transition matrix ``P`` on symbols."""
        P = np.asarray(P, dtype=float)
        n = P.shape[0]
        symbols = tuple(range(n)) if symbols is None else tuple(symbols)
        if np.any(P < 0) or not np.allclose(P.sum(1), 1.0, atol=1e-12):
            raise ValueError("P must be a stochastic matrix")
        w, vl = scipy.linalg.eig(P.T)
        i = int(np.argmin(np.abs(w - 1.0)))
        pi = np.abs(vl[:, i].real)
        pi /= pi.sum()
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
        h = float(-(pi[:, None] * P * logs).sum())
        return cls(
            states=np.asarray(symbols, dtype=np.int64)[:, None],
            P=sp.csr_matrix(P),
            pi=pi,
            pressure=0.0,
            entropy=h,
            integral=-h,
            alphabet=symbols,
            adjacency=P > 0,
        )

    @classmethod
    def bernoulli(cls, probs, symbols=None):
        probs = np.asarray(probs, dtype=float)
        return cls.from_transition(np.tile(probs, (len(probs), 1)), symbols)

    # -- masses ----------------------------------------------------------------
    def _state(self, block):
        return self._lookup.get(tuple(int(s) for s in block), -1)

    def _transition(self, i, j):
        row = slice(self.P.indptr[i], self.P.indptr[i + 1])
        cols = self.P.indices[row]
        hit = np.flatnonzero(cols == j)
        return float(self.P.data[row][hit[0]]) if len(hit) else 0.0

    def cylinder_mass(self, word) -> float:
        """``mu([w])`` for a one-sided word ``w`` starting at coordinate 0."""
        syms = word.symbols if isinstance(word, Word) else tuple(int(s) for s in word)
        m = self.m
        if len(syms) < m:
            mask = np.all(self.states[:, : len(syms)] == np.asarray(syms), axis=1)
            return float(self.pi[mask].sum())
        i = self._state(syms[:m])
        if i < 0:
            return 0.0
        mass = float(self.pi[i])
        for j in range(1, len(syms) - m + 1):
            nxt = self._state(syms[j:j + m])
            if nxt < 0:
                return 0.0
            mass *= self._transition(i, nxt)
            if mass == 0.0:
                return 0.0
            i = nxt
        return mass

    def log_cylinder_masses(self, words) -> np.ndarray:
        """Vectorized ``log mu([w])`` for rows of equal length ``>= m``."""
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        m = self.m
        if w.shape[1] < m:
            return np.log([self.cylinder_mass(r) for r in w])
        idx = np.array([[self._state(r[j:j + m]) for j in range(w.shape[1] - m + 1)] for r in w])
        out = np.full(len(w), -np.inf)
        ok = np.all(idx >= 0, axis=1)
        dense = self.transition_dense() if self.P.shape[0] <= 4096 else None
        for r in np.flatnonzero(ok):
            path = idx[r]
            if dense is not None:
                p = dense[path[:-1], path[1:]]
            else:
                p = np.array([self._transition(a, b) for a, b in zip(path[:-1], path[1:])])
            with np.errstate(divide="ignore"):
                out[r] = math.log(self.pi[path[0]]) + float(np.log(p).sum())
        return out

    def transition_dense(self):
        if not hasattr(self, "_dense"):
            self._dense = self.P.toarray()
        return self._dense

    def reversed(self) -> "GibbsMarkov":
        """Time reversal ``R(v, u) = pi(u) P(u, v) / pi(v)``."""
        if self.m != 1:
            raise ValueError("time reversal is implemented for symbol-state chains")
        R = (sp.diags(1.0 / self.pi) @ self.P.T @ sp.diags(self.pi)).tocsr()
        return GibbsMarkov(self.states, R, self.pi.copy(), self.pressure, self.entropy,
                           self.integral, self.alphabet, adjacency=None)

    # -- sampling ------------------------------------------------------------
    def _cumulative(self):
        if self._cum is None:
            P = self.P.tocsr()
            P.sort_indices()
            cum = np.empty_like(P.data)
            for i in range(P.shape[0]):
                row = slice(P.indptr[i], P.indptr[i + 1])
                c = np.cumsum(P.data[row])
                if len(c):
                    c /= c[-1]
                cum[row] = c
            self._cum = (P.indptr.astype(np.int64), P.indices.astype(np.int64), cum)
        return self._cum

    def sample_states(self, n, rng, start=None) -> np.ndarray:
        """State path of length ``n`` (stationary start unless ``start`` is given)."""
        indptr, indices, cum = self._cumulative()
        if start is None:
            c = np.cumsum(self.pi)
            start = int(min(np.searchsorted(c, rng.random() * c[-1]), len(c) - 1))
        u = rng.random(n - 1)
        return kernels.markov_sample(indptr, indices, cum, int(start), u)

    def sample(self, n, rng, start=None) -> np.ndarray:
        """Symbol stream of length ``n`` drawn from the chain."""
        n_states = max(1, n - self.m + 1)
        path = self.sample_states(n_states, rng, start)
        head = self.states[path[0]]
        tail = self.states[path[1:], -1]
        return np.concatenate([head, tail])[:n]

    def to_json(self):
        P = self.P.tocoo()
        return {
            "states": self.states.tolist(),
            "pi": self.pi.tolist(),
            "P": {"row": P.row.tolist(), "col": P.col.tolist(), "value": P.data.tolist()},
            "pressure": self.pressure,
            "entropy": self.entropy,
            "integral": self.integral,
        }


def equilibrium_markov(sub: TruncatedSubshift, pot: KStepPotential, *, tol=1e-13) -> GibbsMarkov:
    """Equilibrium chain ``P(u,v) = L(u,v) r(v) / (lambda r(u))``, ``pi = l r``.

    ``l`` sums to 1 and ``r`` is scaled so that ``pi`` sums to 1.
    """
    tm = TransferMatrix(sub, pot)
    tm.check_irreducible()
    lam, r = perron(tm.matrix, tol=tol)
    _, left = perron(tm.matrix, tol=tol, transpose=True)
    left = left / left.sum()
    r = r / float(left @ r)
    pi = left * r
    pi /= pi.sum()
    rows, cols = tm.rows, tm.cols
    # log P(u,v) = psi(uv) + log r(v) - log lambda - log r(u), then exact row normalization
    logp = tm.logw - tm.shift + np.log(r[cols]) - math.log(lam) - np.log(r[rows])
    rowmax = np.full(tm.size, -np.inf)
    np.maximum.at(rowmax, rows, logp)
    rowsum = np.bincount(rows, weights=np.exp(logp - rowmax[rows]), minlength=tm.size)
    logp -= rowmax[rows] + np.log(rowsum[rows])
    pvals = np.exp(logp)
    P = sp.csr_matrix((pvals, (rows, cols)), shape=tm.matrix.shape)
    P.sort_indices()
    weight = pi[rows] * pvals
    entropy = float(-(weight * logp).sum())
    integral = float((weight * tm.logw).sum())
    band = (left.max() / left.min()) * (r.max() / r.min())
    return GibbsMarkov(
        states=tm.states,
        P=P,
        pi=pi,
        pressure=math.log(lam) + tm.shift,
        entropy=entropy,
        integral=integral,
        alphabet=sub.alphabet,
        left=left,
        right=r,
        gibbs_constant=float(band),
        adjacency=sub.adjacency,
    )


@dataclass
class GibbsBand:
    min_ratio: float
    max_ratio: float
    ratios: np.ndarray
    zero_mass: list

    @property
    def width(self):
        return self.max_ratio / self.min_ratio


def gibbs_ratio_check(mu: GibbsMarkov, pot: PotentialSpec, words, sub=None) -> GibbsBand:
    """Extremes of ``mu([w]) / exp(sup S_n psi|[w] - P n)`` over ``words``."""
    groups = {}
    for i, w in enumerate(words):
        syms = w.symbols if isinstance(w, Word) else tuple(int(s) for s in w)
        groups.setdefault(len(syms), []).append((i, syms))
    ratios = np.full(len(words), np.nan)
    zero = []
    for n, items in groups.items():
        arr = np.array([s for _, s in items], dtype=np.int64)
        logm = mu.log_cylinder_masses(arr)
        logs = pot.sup_sum(arr, sub)
        for (i, syms), lm, ls in zip(items, logm, logs):
            if not np.isfinite(lm):
                zero.append(Word(syms))
                continue
            ratios[i] = math.exp(lm - (ls - mu.pressure * n))
    good = ratios[np.isfinite(ratios)]
    if len(good) == 0:
        raise ValueError("every sampled word has zero mass")
    return GibbsBand(float(good.min()), float(good.max()), ratios, zero)


def conditional_cylinder_mass(mu: GibbsMarkov, forward, backward) -> float:
    """``mu([tau omega]_{-n}^{k-1}) / mu([omega]_0^{k-1})`` by the Markov ratio.

    ``backward`` occupies positions ``-n..-1`` and ``forward`` positions
    ``0..k-1``; an inadmissible junction gives 0.
    """
    f = forward.symbols if isinstance(forward, Word) else tuple(int(s) for s in forward)
    b = backward.symbols if isinstance(backward, Word) else tuple(int(s) for s in backward)
    if mu.adjacency is not None and b:
        ia = mu.alphabet.index(b[-1])
        ib = mu.alphabet.index(f[0])
        if not mu.adjacency[ia, ib]:
            return 0.0
    denom = mu.cylinder_mass(f)
    if denom == 0.0:
        raise ValueError("forward word has zero mass")
    return mu.cylinder_mass(b + f) / denom


# ---------------------------------------------------------------------------
# discretization of general potentials


def discretize(pot: PotentialSpec, sub: TruncatedSubshift, k: int, mode="periodic") -> KStepPotential:
    """k-step approximation of ``pot`` on ``sub``.

    ``mode="periodic"`` evaluates ``psi`` at the periodic point of each
    k-word, ``mode="sup"`` takes the cylinder supremum. The returned
    potential carries ``error = variation_bound(pot, k)``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if mode not in ("periodic", "sup"):
        raise ValueError(f"unknown mode {mode!r}")
    words = sub.words(k)
    if mode == "periodic":
        if not hasattr(pot, "periodic_value"):
            raise ValueError("potential has no periodic-point evaluation")
        vals = pot.periodic_value(words)
    else:
        vals = pot.bounds(words, sub)[1]
    lut = np.full(int(sub.symbol_array.max()) + 1, -1, dtype=np.int64)
    lut[sub.symbol_array] = np.arange(len(sub))
    dims = (len(sub),) * k
    idx = lut[words]
    table = np.full(len(sub) ** k, np.nan)
    table[np.ravel_multi_index(idx.T, dims)] = vals

    def func(w):
        w = np.asarray(w, dtype=np.int64)
        if np.any(w > len(lut) - 1) or np.any(lut[w] < 0):
            raise ValueError("word outside the discretization alphabet")
        out = table[np.ravel_multi_index(lut[w].T, dims)]
        if np.any(np.isnan(out)):
            raise ValueError("word is not admissible in the discretization")
        return out

    disc = KStepPotential(k, func, name=f"{mode}-discretization")
    disc.error = variation_bound(pot, k)
    disc.source = pot
    return disc


# ---------------------------------------------------------------------------
# geometric potentials by collocation


def chebyshev_nodes(m, lo=0.0, hi=1.0):
    j = np.arange(m)
    u = np.cos((2 * j + 1) * np.pi / (2 * m))
    return lo + (hi - lo) * (u + 1) / 2


def _bary_weights(m):
    j = np.arange(m)
    return (-1.0) ** j * np.sin((2 * j + 1) * np.pi / (2 * m))


def interpolation_matrix(nodes, weights, points):
    """Barycentric Lagrange interpolation rows for ``points`` (any shape)."""
    pts = np.asarray(points, dtype=float)
    d = pts[..., None] - nodes
    exact = d == 0
    d = np.where(exact, 1.0, d)
    t = weights / d
    out = t / t.sum(-1, keepdims=True)
    hit = exact.any(-1)
    if np.any(hit):
        out[hit] = exact[hit].astype(float)
    return out


def collocation_operator(ifs: IntervalIFS, t, q=0.0, gamma=None, nodes=32):
    """Collocation matrices ``(A, dA/dt, dA/dq)`` of the weighted transfer operator.

    ``A[j, :] = sum_e |phi_e'(x_j)|^t exp(q gamma_e) l(phi_e(x_j))`` where
    ``l`` is the vector of Lagrange basis values at Chebyshev nodes ``x_j``.
    """
    lo, hi = ifs.domain
    x = chebyshev_nodes(nodes, lo, hi)
    w = _bary_weights(nodes)
    vals, ders = ifs.branch_table(x)
    logd = np.log(ders)
    g = np.zeros(vals.shape[1]) if gamma is None else np.asarray(gamma, dtype=float)
    weight = np.exp(t * logd + q * g[None, :])
    basis = interpolation_matrix(x, w, vals)  # (M, E, M)
    A = np.einsum("je,jem->jm", weight, basis)
    At = np.einsum("je,jem->jm", weight * logd, basis)
    Aq = np.einsum("je,jem->jm", weight * g[None, :], basis)
    return A, At, Aq


def _dominant(A, with_vectors=False):
    if not with_vectors:
        ev = np.linalg.eigvals(A)
        i = int(np.argmax(ev.real))
        return float(ev[i].real)
    ev, vl, vr = scipy.linalg.eig(A, left=True, right=True)
    i = int(np.argmax(ev.real))
    return float(ev[i].real), vl[:, i].real, vr[:, i].real


def geometric_pressure(ifs: IntervalIFS, t, q=0.0, gamma=None, nodes=32) -> float:
    """``P(q gamma + t log|phi'|)`` for a finite IFS.

    Affine systems use ``log sum_e a_e^t exp(q gamma_e)`` exactly.
    """
    if isinstance(ifs, AffineIFS):
        g = np.zeros(len(ifs.ratios)) if gamma is None else np.asarray(gamma, dtype=float)
        return float(logsumexp(t * np.log(ifs.ratios) + q * g))
    A, _, _ = collocation_operator(ifs, t, q, gamma, nodes)
    lam = _dominant(A)
    if lam <= 0:
        raise ConvergenceError("collocation operator has no positive dominant eigenvalue")
    return math.log(lam)


def geometric_pressure_gradient(ifs: IntervalIFS, t, q=0.0, gamma=None, nodes=32):
    """``(P, dP/dt, dP/dq)`` from left/right eigenvectors of the collocation matrix."""
    if isinstance(ifs, AffineIFS):
        g = np.zeros(len(ifs.ratios)) if gamma is None else np.asarray(gamma, dtype=float)
        logs = t * np.log(ifs.ratios) + q * g
        p = np.exp(logs - logsumexp(logs))
        return float(logsumexp(logs)), float(p @ np.log(ifs.ratios)), float(p @ g)
    A, At, Aq = collocation_operator(ifs, t, q, gamma, nodes)
    lam, left, right = _dominant(A, with_vectors=True)
    norm = lam * float(left @ right)
    return math.log(lam), float(left @ At @ right) / norm, float(left @ Aq @ right) / norm


def pressure_geometric(ifs: IntervalIFS, t, nodes=32) -> PressureEstimate:
    """Pressure of ``t log|phi'|`` with a tail bound for truncated countable systems.

    With ``h`` the positive eigenfunction, the omitted branches add at most
    ``tail * max h / min h`` to the eigenvalue, giving the bound
    ``log(1 + tail * osc(h) / lambda_F)``; ``h`` is taken from the collocation.
    """
    n = len(ifs)
    if isinstance(ifs, AffineIFS) or ifs.theta is None:
        return PressureEstimate(geometric_pressure(ifs, t, nodes=nodes), n, 0.0, "spectral")
    A, _, _ = collocation_operator(ifs, t, nodes=nodes)
    lam, _, right = _dominant(A, with_vectors=True)
    value = math.log(lam)
    tail = ifs.tail_weight(t, n) if getattr(ifs, "consecutive", False) else None
    if tail is None:
        return PressureEstimate(value, n, float("nan"), "spectral", heuristic=True)
    right = right * np.sign(right.sum())
    if right.min() <= 0:
        return PressureEstimate(value, n, float("nan"), "spectral", heuristic=True)
    osc = float(right.max() / right.min())
    return PressureEstimate(value, n, math.log1p(tail * osc / lam), "spectral")


def pressure_sup(pot: PotentialSpec, schedule, sub: TruncatedSubshift | None = None, nodes=32) -> PressureEstimate:
    """Pressures ``P_F`` over an increasing truncation schedule.

    Geometric potentials of a countable IFS truncate by branch count; k-step
    potentials truncate ``sub`` to its first ``N`` symbols. The returned
    estimate holds the last value, the full sequence and, where tail weights
    are known, the tail bound of :func:`pressure_geometric` on the remaining gap.
    Non-summable potentials are flagged ``possibly_infinite``.
    """
    schedule = [int(n) for n in schedule]
    if not schedule:
        raise ValueError("schedule is empty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    seq = []
    est = None
    for n in schedule:
        if isinstance(pot, GeometricPotential):
            ifs = pot.ifs.truncate(n) if pot.ifs.countable or n != len(pot.ifs) else pot.ifs
            est = pressure_geometric(ifs, pot.t, nodes=nodes)
        else:
            if sub is None:
                raise ValueError("k-step potentials need the subshift to truncate")
            if n > len(sub):
                raise ValueError(f"truncation {n} exceeds the alphabet size {len(sub)}")
            alphabet = sub.alphabet[:n]
            est = pressure_spectral(TruncatedSubshift(alphabet, sub.incidence), pot)
            if n < len(sub):
                est.tail_bound, est.heuristic = float("nan"), True
        seq.append(est.value)
    est.sequence = seq
    est.schedule = schedule
    if not pot.summable:
        est.possibly_infinite = True
        est.tail_bound = float("inf")
    return est


# ---------------------------------------------------------------------------
# derivatives


class LinearFamily:
    """``(q, t) -> q gamma + t xi`` for k-step potentials on one truncation."""

    def __init__(self, sub, gamma: KStepPotential, xi: KStepPotential):
        self.sub, self.gamma, self.xi = sub, gamma, xi

    def potential(self, q, t):
        return combine([(q, self.gamma), (t, self.xi)])

    def pressure(self, q, t):
        return pressure_spectral(self.sub, self.potential(q, t)).value

    def integrals(self, q, t):
        mu = equilibrium_markov(self.sub, self.potential(q, t))
        return _chain_integral(mu, self.sub, self.gamma), _chain_integral(mu, self.sub, self.xi)

    def check(self, q, t, h):
        return None


def _chain_integral(mu: GibbsMarkov, sub, pot: KStepPotential):
    P = mu.P.tocoo()
    m = mu.states.shape[1]
    words = np.column_stack([mu.states[P.row], mu.states[P.col][:, -1]])
    k = pot.kstep
    if k > m + 1:
        raise ValueError("integrand depends on more coordinates than the chain carries")
    vals = pot.value(words[:, :k]) if k > 1 else pot.value(words[:, :1])
    return float((mu.pi[P.row] * P.data * vals).sum())


class GeometricFamily:
    """``(q, t) -> q gamma(omega_0) + t log|phi'|`` on a finite IFS."""

    def __init__(self, ifs: IntervalIFS, gamma=None, nodes=32):
        self.ifs, self.gamma, self.nodes = ifs, gamma, nodes

    def pressure(self, q, t):
        return geometric_pressure(self.ifs, t, q, self.gamma, self.nodes)

    def integrals(self, q, t):
        _, dt, dq = geometric_pressure_gradient(self.ifs, t, q, self.gamma, self.nodes)
        return dq, dt

    def check(self, q, t, h):
        theta = self.ifs.theta
        if theta is not None and t - h <= theta:
            raise ValueError(f"t - h = {t - h} reaches the summability boundary {theta}")


@dataclass
class PressureDerivative:
    dq: float
    dt: float
    dqt: float
    integral_gamma: float
    integral_xi: float
    h: float

    @property
    def agreement(self):
        return max(abs(self.dq - self.integral_gamma), abs(self.dt - self.integral_xi))

    @property
    def tolerance(self):
        return max(1e-6, 10 * self.h ** 2)


def pressure_derivative(family, q0, t0, h=1e-4) -> PressureDerivative:
    """Central differences of ``P(q, t)`` with the equilibrium integrals for comparison."""
    if h <= 0 or h < 1e-8 * max(1.0, abs(q0), abs(t0)):
        raise ValueError("step underflow: h is too small for central differences")
    family.check(q0, t0, h)
    p = family.pressure
    dq = (p(q0 + h, t0) - p(q0 - h, t0)) / (2 * h)
    dt = (p(q0, t0 + h) - p(q0, t0 - h)) / (2 * h)
    dqt = (p(q0 + h, t0 + h) - p(q0 + h, t0 - h) - p(q0 - h, t0 + h) + p(q0 - h, t0 - h)) / (4 * h * h)
    ig, ix = family.integrals(q0, t0)
    return PressureDerivative(dq, dt, dqt, ig, ix, h)


# ---------------------------------------------------------------------------
# two-sided potentials


def past_independent_reduce(pot):
    """One-sided version ``psi o sigma^m`` of a finite-range two-sided potential.

    A potential depending on coordinates ``lo..hi`` becomes a
    ``(hi - lo + 1)``-step potential on coordinates ``0..hi-lo`` when
    ``lo < 0``; this differs from ``psi`` by a coboundary, so pressure is
    unchanged. One-sided potentials are returned unchanged.
    """
    if isinstance(pot, KStepPotential) or getattr(pot, "sidedness", "one-sided") == "one-sided":
        return pot
    if not isinstance(pot, TwoSidedPotential):
        raise NotImplementedError("only finite-range two-sided potentials can be reduced exactly")
    shift = max(0, -pot.lo)
    lo, hi = pot.lo + shift, pot.hi + shift

    def func(w):
        return pot.value(w[:, lo:hi + 1])

    out = KStepPotential(hi + 1, func, name="past-independent")
    out.shift = shift
    return out
