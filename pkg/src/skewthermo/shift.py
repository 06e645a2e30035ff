"""Symbolic foundations: alphabets, incidence, admissible words and potentials.

Countable alphabets are nonnegative integers. Heavy work always happens on a
:class:`TruncatedSubshift`, a finite sub-alphabet with the restricted incidence.
Potentials are exposed through cylinder ``(inf, sup)`` evaluators so that sums
of ``exp(sup S_n psi)`` over cylinders can be formed without ever evaluating at
an infinite sequence.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class DomainError(ValueError):
    """A symbol lies outside the domain of an incidence rule."""


class ConfigError(ValueError):
    """A configuration document violates its schema."""


# ---------------------------------------------------------------------------
# incidence and words


@dataclass(frozen=True)
class IncidenceSpec:
    """Incidence rule ``A(a, b)`` on a countable alphabet.

    ``kind`` is ``"full"``, ``"explicit-sparse"`` or ``"predicate"``. Sparse
    rules list the allowed pairs over a declared symbol set; predicate rules
    carry a callable and an optional domain test.
    """

    kind: str = "full"
    symbols: frozenset = frozenset()
    pairs: frozenset = frozenset()
    predicate: Callable[[int, int], bool] | None = field(default=None, compare=False)
    domain: Callable[[int], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("full", "explicit-sparse", "predicate"):
            raise ValueError(f"unknown incidence kind {self.kind!r}")
        if self.kind == "explicit-sparse":
            for a, b in self.pairs:
                if a not in self.symbols or b not in self.symbols:
                    raise DomainError(f"pair {(a, b)} references an undeclared symbol")
        if self.kind == "predicate" and self.predicate is None:
            raise ValueError("predicate incidence needs a predicate")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def from_pairs(cls, symbols, pairs):
        pairs = frozenset((int(a), int(b)) for a, b in pairs)
        return cls("explicit-sparse", frozenset(int(s) for s in symbols), pairs)

    @classmethod
    def from_forbidden(cls, symbols, forbidden):
        symbols = [int(s) for s in symbols]
        forbidden = {(int(a), int(b)) for a, b in forbidden}
        for a, b in forbidden:
            if a not in symbols or b not in symbols:
                raise DomainError(f"forbidden pair {(a, b)} references an undeclared symbol")
        pairs = [(a, b) for a in symbols for b in symbols if (a, b) not in forbidden]
        return cls.from_pairs(symbols, pairs)

    @classmethod
    def from_predicate(cls, predicate, domain=None):
        return cls("predicate", predicate=predicate, domain=domain)

    def _check(self, a):
        if not isinstance(a, (int, np.integer)) or a < 0:
            raise DomainError(f"symbol {a!r} is not a nonnegative integer")
        if self.kind == "explicit-sparse" and a not in self.symbols:
            raise DomainError(f"symbol {a} is not declared")
        if self.kind == "predicate" and self.domain is not None and not self.domain(a):
            raise DomainError(f"symbol {a} is outside the predicate domain")

    def allowed(self, a, b) -> bool:
        self._check(a)
        self._check(b)
        if self.kind == "full":
            return True
        if self.kind == "explicit-sparse":
            return (int(a), int(b)) in self.pairs
        return bool(self.predicate(int(a), int(b)))

    def matrix(self, alphabet: Sequence[int]) -> np.ndarray:
        """Boolean incidence matrix restricted to ``alphabet``."""
        alphabet = [int(a) for a in alphabet]
        n = len(alphabet)
        if self.kind == "full":
            for a in alphabet:
                self._check(a)
            return np.ones((n, n), dtype=bool)
        out = np.zeros((n, n), dtype=bool)
        for i, a in enumerate(alphabet):
            for j, b in enumerate(alphabet):
                out[i, j] = self.allowed(a, b)
        return out


@dataclass(frozen=True)
class Word:
    """Finite word; ``origin`` is the index of its first symbol."""

    symbols: tuple
    origin: int = 0

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if not self.symbols:
            raise ValueError("a word has length at least 1")

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    @property
    def end(self):
        """Index one past the last symbol."""
        return self.origin + len(self.symbols)

    def at(self, k):
        return self.symbols[k - self.origin]


def _symbols(word) -> tuple:
    return word.symbols if isinstance(word, Word) else tuple(int(s) for s in word)


def is_admissible(word, inc: IncidenceSpec) -> bool:
    """True iff every consecutive pair of ``word`` passes ``inc``."""
    syms = _symbols(word)
    if not syms:
        raise ValueError("word must be nonempty")
    for a in syms:
        inc._check(a)
    return all(inc.allowed(a, b) for a, b in zip(syms, syms[1:]))


class TruncatedSubshift:
    """Finite sub-alphabet ``F`` of a countable shift with restricted incidence."""

    def __init__(self, alphabet: Iterable[int], incidence: IncidenceSpec | None = None):
        self.alphabet = tuple(int(a) for a in alphabet)
        if not self.alphabet:
            raise ValueError("alphabet is empty")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet has repeated symbols")
        self.incidence = incidence if incidence is not None else IncidenceSpec.full()
        self.adjacency = self.incidence.matrix(self.alphabet)
        self.adjacency.setflags(write=False)
        self.symbol_array = np.asarray(self.alphabet, dtype=np.int64)
        self._index = {a: i for i, a in enumerate(self.alphabet)}

    @classmethod
    def full(cls, n, start=0):
        return cls(range(start, start + n))

    @classmethod
    def golden_mean(cls):
        return cls((0, 1), IncidenceSpec.from_forbidden((0, 1), [(1, 1)]))

    def __len__(self):
        return len(self.alphabet)

    def __repr__(self):
        return f"TruncatedSubshift(|F|={len(self)}, kind={self.incidence.kind})"

    def index(self, symbol):
        return self._index[int(symbol)]

    @property
    def is_full(self):
        return bool(self.adjacency.all())

    def irreducibility(self, max_len=4):
        return check_finite_irreducibility(self, max_len)

    def word_indices(self, n) -> np.ndarray:
        """All admissible length-``n`` words as rows of alphabet indices."""
        if n < 1:
            raise ValueError("n must be at least 1")
        m = len(self.alphabet)
        words = np.arange(m, dtype=np.int64)[:, None]
        if self.is_full:
            grids = np.indices((m,) * n).reshape(n, -1).T
            return grids.astype(np.int64)
        succ = [np.flatnonzero(self.adjacency[i]) for i in range(m)]
        for _ in range(n - 1):
            counts = np.array([len(succ[i]) for i in words[:, -1]], dtype=np.int64)
            if counts.sum() == 0:
                return np.empty((0, n), dtype=np.int64)
            rep = np.repeat(words, counts, axis=0)
            nxt = np.concatenate([succ[i] for i in words[:, -1]])
            words = np.column_stack([rep, nxt])
        return words

    def words(self, n) -> np.ndarray:
        """Admissible length-``n`` words as rows of symbols, lexicographic."""
        return self.symbol_array[self.word_indices(n)]


def enumerate_cylinders(sub: TruncatedSubshift, n: int) -> list:
    """Admissible length-``n`` words over ``sub``, each once, in lexicographic order."""
    idx = sub.word_indices(n)
    order = np.lexsort(sub.symbol_array[idx].T[::-1]) if len(idx) else []
    return [Word(tuple(sub.symbol_array[row])) for row in idx[order]]


def check_finite_irreducibility(sub: TruncatedSubshift, max_len: int):
    """Connecting set ``Lambda`` of words of length at most ``max_len``, or None.

    Every ordered pair ``(a, b)`` of ``sub`` is bridged by a shortest word
    ``gamma`` with ``a gamma b`` admissible. ``()`` stands for the empty word.
    ``None`` only says that no such set exists within the length bound.
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    adj = sub.adjacency
    m = len(sub)
    if adj.all():
        return frozenset({()})
    succ = [np.flatnonzero(adj[i]) for i in range(m)]
    bridges = set()
    for a in range(m):
        # BFS over intermediate symbols; parent[c] rebuilds the shortest gamma ending at c
        need = set(range(m)) - set(succ[a].tolist())
        if not need:
            bridges.add(())
            continue
        if len(need) < m:
            bridges.add(())
        parent = {c: None for c in succ[a].tolist()}
        frontier = deque(succ[a].tolist())
        depth = {c: 1 for c in frontier}
        while need and frontier:
            c = frontier.popleft()
            gamma = []
            node = c
            while node is not None:
                gamma.append(node)
                node = parent[node]
            gamma = tuple(sub.alphabet[i] for i in reversed(gamma))
            hit = need.intersection(succ[c].tolist())
            if hit:
                bridges.add(gamma)
                need -= hit
            if depth[c] < max_len:
                for d in succ[c].tolist():
                    if d not in parent:
                        parent[d] = c
                        depth[d] = depth[c] + 1
                        frontier.append(d)
        if need:
            return None
    return frozenset(bridges)


def word_distance(omega, tau, beta: float, *, two_sided=False, convention="prefix",
                  infinite=False) -> float:
    """Symbolic distance ``d_beta`` between two sequences.

    One-sided inputs are symbol sequences indexed from 0. Two-sided inputs are
    :class:`Word` objects (their ``origin`` fixes the index of the first symbol)
    and agreement is measured on the symmetric windows ``|k| <= n``.

    With ``convention="prefix"`` the one-sided distance is ``exp(-beta*L)``
    for an agreeing prefix of length ``L``; ``convention="literal"`` uses
    ``exp(-beta*n)`` with ``n = L - 1`` the largest agreeing index, down to
    ``n = -1``. The two differ by the constant factor ``exp(beta)``.
    ``infinite=True`` declares the inputs to be complete sequences, so full
    agreement gives distance 0.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if convention not in ("prefix", "literal"):
        raise ValueError(f"unknown convention {convention!r}")
    if two_sided:
        w1 = omega if isinstance(omega, Word) else Word(omega)
        w2 = tau if isinstance(tau, Word) else Word(tau)
        reach = min(-max(w1.origin, w2.origin), min(w1.end, w2.end) - 1)
        n = -1
        while n + 1 <= reach and w1.at(n + 1) == w2.at(n + 1) and w1.at(-(n + 1)) == w2.at(-(n + 1)):
            n += 1
        full = n == reach
    else:
        a, b = _symbols(omega), _symbols(tau)
        m = min(len(a), len(b))
        n = -1
        while n + 1 < m and a[n + 1] == b[n + 1]:
            n += 1
        full = n == m - 1
    if infinite and full:
        return 0.0
    return math.exp(-beta * (n + 1 if convention == "prefix" else n))


# ---------------------------------------------------------------------------
# potentials


class PotentialSpec:
    """Cylinder-evaluable potential with a Hölder variation bound.

    Subclasses implement :meth:`bounds`, returning ``(inf, sup)`` of ``psi``
    over each cylinder given as a row of symbols. ``sub`` supplies the
    admissible continuations when a cylinder is shorter than the dependence
    range of the potential.
    """

    kstep: int | None = None
    hoelder: tuple = (0.0, 1.0)
    sidedness: str = "one-sided"

    def bounds(self, words, sub=None):
        raise NotImplementedError

    def sup_sum(self, words, sub=None) -> np.ndarray:
        """Upper value of ``sup S_n psi`` on ``[w]`` for each row ``w``.

        The generic estimate adds the window suprema, an upper bound that
        subclasses sharpen where an exact value is available.
        """
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        total = np.zeros(len(words))
        for j in range(words.shape[1]):
            total += self.bounds(words[:, j:], sub)[1]
        return total

    def tail_weight(self, n_symbols: int):
        """``sum_{e outside F} exp(sup psi|[e])`` if known, else None."""
        return None

    @property
    def summable(self):
        return True


def variation_bound(pot: PotentialSpec, n: int) -> float:
    """``C exp(-beta n)``, or 0 once a k-step potential is determined."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if pot.kstep is not None and n >= pot.kstep:
        return 0.0
    c, b = pot.hoelder
    return c * math.exp(-b * n)


def extend_words(words, sub: TruncatedSubshift, m: int):
    """All admissible continuations of each row by ``m`` symbols.

    Returns the extended rows and, for each, the index of the row it extends.
    """
    w = np.atleast_2d(np.asarray(words, dtype=np.int64))
    owner = np.arange(len(w))
    if m == 0:
        return w, owner
    succ = [sub.symbol_array[np.flatnonzero(sub.adjacency[i])] for i in range(len(sub))]
    for _ in range(m):
        last = [sub.index(a) for a in w[:, -1]]
        counts = np.array([len(succ[i]) for i in last], dtype=np.int64)
        nxt = np.concatenate([succ[i] for i in last]) if len(last) else np.empty(0, np.int64)
        w = np.column_stack([np.repeat(w, counts, axis=0), nxt])
        owner = np.repeat(owner, counts)
    return w, owner


def _group(values, owner, size, reducer):
    out = np.full(size, np.inf if reducer is np.minimum else -np.inf)
    reducer.at(out, owner, values)
    return out


class KStepPotential(PotentialSpec):
    """Potential depending only on coordinates ``0..k-1``.

    ``func`` maps an integer array of shape ``(m, k)`` of symbols to ``m``
    values. ``oscillation`` bounds ``sup - inf`` on cylinders shorter than
    ``k``; it feeds the Hölder pair ``(oscillation, 1)``.
    """

    def __init__(self, k: int, func, *, oscillation=None, name="kstep"):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.kstep = int(k)
        self.func = func
        self.name = name
        self._osc = oscillation

    @property
    def hoelder(self):
        return (float(self._osc) if self._osc is not None else 0.0, 1.0)

    @classmethod
    def from_table(cls, table: dict, k=None):
        lookup = {(tuple(key) if isinstance(key, tuple) else (key,)): float(v) for key, v in table.items()}
        k = k or len(next(iter(lookup)))

        def func(w):
            try:
                return np.array([lookup[tuple(int(s) for s in row)] for row in w], dtype=float)
            except KeyError as exc:
                raise DomainError(f"word {exc.args[0]} has no potential value") from None

        return cls(k, func, name="table")

    @classmethod
    def from_symbol_values(cls, values: dict, position=0):
        """Potential ``v(omega_position)`` from a per-symbol table."""
        keys = np.array(sorted(values), dtype=np.int64)
        vals = np.array([float(values[s]) for s in keys])

        def func(w):
            col = np.asarray(w)[:, position]
            pos = np.clip(np.searchsorted(keys, col), 0, len(keys) - 1)
            if np.any(keys[pos] != col):
                raise DomainError("symbol without a potential value")
            return vals[pos]

        return cls(position + 1, func, name="symbol")

    def value(self, windows) -> np.ndarray:
        w = np.atleast_2d(np.asarray(windows, dtype=np.int64))
        if w.shape[1] < self.kstep:
            raise ValueError(f"need windows of length {self.kstep}")
        return np.asarray(self.func(w[:, : self.kstep]), dtype=float)

    def bounds(self, words, sub=None):
        """Exact ``(inf, sup)``; short words are extended admissibly in ``sub``."""
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        if w.shape[1] >= self.kstep:
            v = self.value(w)
            return v, v.copy()
        if sub is None:
            raise ValueError("words shorter than k need a subshift to extend in")
        ext, owner = extend_words(w, sub, self.kstep - w.shape[1])
        v = self.value(ext)
        return _group(v, owner, len(w), np.minimum), _group(v, owner, len(w), np.maximum)

    def sup_sum(self, words, sub=None):
        """Exact ``sup S_n psi|[w]``, maximising the overhanging windows jointly."""
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        n, k = w.shape[1], self.kstep
        inner = max(0, n - k + 1)
        total = np.zeros(len(w))
        for j in range(inner):
            total += self.value(w[:, j:j + k])
        if inner == n:
            return total
        if sub is None:
            raise ValueError("words need a subshift to maximise over continuations")
        ext, owner = extend_words(w[:, inner:], sub, k - 1)
        s = np.zeros(len(ext))
        for j in range(n - inner):
            s += self.value(ext[:, j:j + k])
        return total + _group(s, owner, len(w), np.maximum)

    def __add__(self, other):
        return combine([(1.0, self), (1.0, other)])

    def scaled(self, c):
        return combine([(c, self)])


def combine(terms):
    """Linear combination ``sum c_i psi_i`` of k-step potentials."""
    terms = [(float(c), p) for c, p in terms]
    k = max(p.kstep for _, p in terms)

    def func(w):
        out = np.zeros(len(w))
        for c, p in terms:
            if c != 0.0:
                out += c * p.value(w[:, : p.kstep])
        return out

    return KStepPotential(k, func, name="combination")


class ConstantPotential(KStepPotential):
    def __init__(self, c: float):
        self.c = float(c)
        super().__init__(1, lambda w: np.full(len(w), self.c), oscillation=0.0, name="constant")


class TwoSidedPotential(PotentialSpec):
    """Finite-range potential on a two-sided shift.

    ``psi(omega)`` depends on coordinates ``lo..hi`` (``lo <= hi``, possibly
    negative); ``func`` receives windows of shape ``(m, hi - lo + 1)`` whose
    column ``j`` is coordinate ``lo + j``.
    """

    sidedness = "two-sided"

    def __init__(self, lo: int, hi: int, func):
        if lo > hi:
            raise ValueError("empty dependence range")
        self.lo, self.hi = int(lo), int(hi)
        self.func = func
        self.kstep = None

    @property
    def width(self):
        return self.hi - self.lo + 1

    def value(self, windows):
        return np.asarray(self.func(np.atleast_2d(np.asarray(windows, dtype=np.int64))), dtype=float)


# ---------------------------------------------------------------------------
# JSON configuration

_POTENTIAL_KINDS = {"constant", "symbol", "table"}


def load_subshift_config(doc):
    """Parse ``{"alphabet", "forbidden_pairs", "potential"}``.

    ``potential`` is one of::

        {"kind": "constant", "params": {"c": 0.0}}
        {"kind": "symbol", "params": {"values": {"0": v0, "1": v1}}}
        {"kind": "table", "params": {"k": 2, "values": {"0,1": v, ...}}}

    Unknown keys anywhere raise :class:`ConfigError`.
    """
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _strict(doc, {"alphabet", "forbidden_pairs", "potential"}, {"alphabet"}, "config")
    alphabet = doc["alphabet"]
    if not isinstance(alphabet, list) or not all(isinstance(a, int) and a >= 0 for a in alphabet):
        raise ConfigError("alphabet must be a list of nonnegative integers")
    forbidden = doc.get("forbidden_pairs", [])
    if not isinstance(forbidden, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(s, int) for s in p) for p in forbidden
    ):
        raise ConfigError("forbidden_pairs must be a list of [a, b] integer pairs")
    try:
        inc = IncidenceSpec.from_forbidden(alphabet, forbidden) if forbidden else IncidenceSpec.full()
        sub = TruncatedSubshift(alphabet, inc)
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    pot = None
    if "potential" in doc:
        pot = _parse_potential(doc["potential"], sub)
    return sub, pot


def _strict(doc, allowed, required, where):
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = set(required) - set(doc)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def _parse_potential(spec, sub):
    if not isinstance(spec, dict):
        raise ConfigError("potential must be an object")
    _strict(spec, {"kind", "params"}, {"kind"}, "potential")
    kind = spec["kind"]
    params = spec.get("params", {})
    if kind not in _POTENTIAL_KINDS:
        raise ConfigError(f"unknown potential kind {kind!r}")
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    try:
        if kind == "constant":
            _strict(params, {"c"}, set(), "potential.params")
            return ConstantPotential(float(params.get("c", 0.0)))
        if kind == "symbol":
            _strict(params, {"values"}, {"values"}, "potential.params")
            values = {int(a): float(v) for a, v in params["values"].items()}
            if set(values) != set(sub.alphabet):
                raise ConfigError("symbol potential must cover the alphabet exactly")
            return KStepPotential.from_symbol_values(values)
        _strict(params, {"k", "values"}, {"k", "values"}, "potential.params")
        k = int(params["k"])
        table = {tuple(int(s) for s in key.split(",")): float(v) for key, v in params["values"].items()}
        if any(len(key) != k for key in table):
            raise ConfigError("table keys must be comma-separated words of length k")
        for key in table:
            if not is_admissible(key, sub.incidence):
                raise ConfigError(f"table word {key} is not admissible")
        return KStepPotential.from_table(table, k=k)
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad potential params: {exc}") from exc
