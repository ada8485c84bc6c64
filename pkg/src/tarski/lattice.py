"""Finite bounded lattices with tabulated structure.

Elements are the integers ``0 .. size-1``.  Every lattice carries its order,
meet and join as dense tables so that the flow's inner loop is a lookup.
Powerset lattices are the exception: their elements are bitmasks (bit ``k``
marks ground element ``k``) and all operations are bitwise, with tables only
materialized on request.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

#: Largest lattice for which pairwise tables are materialized.
TABLE_LIMIT = 4096
#: Largest ground set a powerset lattice accepts (canonical encoding fits int64).
MAX_GROUND = 63
#: Triple budget for associativity checks past the exhaustive threshold.
SAMPLED_TRIPLES = 10_000
EXHAUSTIVE_TRIPLES_MAX_SIZE = 64
EXHAUSTIVE_PAIRS_MAX_SIZE = 2048


class LatticeError(ValueError):
    """Raised for invalid lattice construction or queries."""


class NotALattice(LatticeError):
    pass


class CyclicCovers(LatticeError):
    pass


class NoBounds(LatticeError):
    pass


class FiniteLattice:
    """A finite bounded lattice given by its order, meet and join tables.

    The constructor trusts its inputs; use :func:`lattice_from_covers` to build
    a lattice from an order and :func:`validate_lattice` to audit tables.
    """

    def __init__(
        self,
        leq_table,
        meet_table,
        join_table,
        bottom: int,
        top: int,
        kind: str = "covers",
        meta: dict | None = None,
    ):
        leq_table = np.array(leq_table, dtype=bool)
        meet_table = np.array(meet_table, dtype=np.int64)
        join_table = np.array(join_table, dtype=np.int64)
        n = leq_table.shape[0]
        if n < 1:
            raise LatticeError("a lattice needs at least one element")
        for name, t in (("leq", leq_table), ("meet", meet_table), ("join", join_table)):
            if t.shape != (n, n):
                raise LatticeError(f"{name} table has shape {t.shape}, expected {(n, n)}")
        for t in (leq_table, meet_table, join_table):
            t.setflags(write=False)
        self._size = n
        self._leq = leq_table
        self._meet = meet_table
        self._join = join_table
        # nested lists are markedly faster than numpy for scalar lookups
        self._leq_l = leq_table.tolist()
        self._meet_l = meet_table.tolist()
        self._join_l = join_table.tolist()
        self.bottom = int(bottom)
        self.top = int(top)
        self.kind = kind
        self.meta = dict(meta or {})

    # -- basic queries -------------------------------------------------

    @property
    def size(self) -> int:
        return self._size

    @property
    def leq_table(self) -> np.ndarray:
        return self._leq

    @property
    def meet_table(self) -> np.ndarray:
        return self._meet

    @property
    def join_table(self) -> np.ndarray:
        return self._join

    @property
    def tabulated(self) -> bool:
        return True

    @property
    def is_powerset(self) -> bool:
        return False

    def elements(self) -> range:
        return range(self._size)

    def check(self, x) -> int:
        x = int(x)
        if not 0 <= x < self._size:
            raise IndexError(f"element {x} out of range for lattice of size {self._size}")
        return x

    def leq(self, x, y) -> bool:
        return self._leq_l[self.check(x)][self.check(y)]

    def meet(self, x, y) -> int:
        return self._meet_l[self.check(x)][self.check(y)]

    def join(self, x, y) -> int:
        return self._join_l[self.check(x)][self.check(y)]

    def meet_all(self, xs: Iterable[int]) -> int:
        m = self._meet_l
        acc = self.top
        for x in xs:
            acc = m[acc][self.check(x)]
        return acc

    def join_all(self, xs: Iterable[int]) -> int:
        j = self._join_l
        acc = self.bottom
        for x in xs:
            acc = j[acc][self.check(x)]
        return acc

    # -- vectorized, unchecked ----------------------------------------

    def leq_vec(self, x, y) -> np.ndarray:
        return self._leq[x, y]

    def meet_vec(self, x, y) -> np.ndarray:
        return self._meet[x, y]

    def join_vec(self, x, y) -> np.ndarray:
        return self._join[x, y]

    def join_reduce(self, xs: np.ndarray) -> int:
        """Join of a 1-d array of elements (bottom when empty)."""
        return self.join_all(xs.tolist())

    def meet_fn(self):
        """Unchecked binary meet for inner loops."""
        m = self._meet_l
        return lambda x, y: m[x][y]

    def join_fn(self):
        j = self._join_l
        return lambda x, y: j[x][y]

    # -- derived -------------------------------------------------------

    @cached_property
    def height(self) -> int:
        """Length of the longest strictly increasing chain."""
        leq = self._leq
        below = leq.sum(axis=0)
        order = np.argsort(below, kind="stable")
        h = np.zeros(self._size, dtype=np.int64)
        strict = leq & ~np.eye(self._size, dtype=bool)
        for z in order:
            preds = strict[:, z]
            if preds.any():
                h[z] = h[preds].max() + 1
        return int(h.max())

    def describe(self) -> dict:
        """JSON-ready description that :func:`lattice_from_description` inverts."""
        if self.kind == "chain":
            return {"kind": "chain", "length": self._size}
        if self.kind == "product":
            return {"kind": "product", "factors": [f.describe() for f in self.meta["factors"]]}
        covers = [[int(a), int(b)] for a, b in hasse_covers(self)]
        return {"kind": "covers", "size": self._size, "covers": covers}

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, FiniteLattice) or self.size != other.size:
            return False
        if self.bottom != other.bottom or self.top != other.top:
            return False
        if self.is_powerset and other.is_powerset:
            return True
        return bool(
            np.array_equal(self.meet_table, other.meet_table)
            and np.array_equal(self.join_table, other.join_table)
        )

    def __hash__(self):
        return hash((self.size, self.bottom, self.top))

    def __repr__(self):
        return f"{type(self).__name__}(kind={self.kind!r}, size={self.size})"


class PowersetLattice(FiniteLattice):
    """The Boolean lattice of subsets of ``{0, .., ground-1}`` as bitmasks."""

    def __init__(self, ground: int):
        ground = int(ground)
        if not 1 <= ground <= MAX_GROUND:
            raise LatticeError(f"ground set size must be in [1, {MAX_GROUND}], got {ground}")
        self.ground = ground
        self._size = 1 << ground
        self.bottom = 0
        self.top = self._size - 1
        self.kind = "powerset"
        self.meta = {"ground": ground}

    @property
    def tabulated(self) -> bool:
        return self._size <= TABLE_LIMIT

    @property
    def is_powerset(self) -> bool:
        return True

    def _tables_guard(self):
        if not self.tabulated:
            raise LatticeError(
                f"powerset over {self.ground} elements is too large to tabulate")

    @cached_property
    def leq_table(self) -> np.ndarray:
        self._tables_guard()
        x = np.arange(self._size, dtype=np.int64)
        t = (x[:, None] & ~x[None, :]) == 0
        t.setflags(write=False)
        return t

    @cached_property
    def meet_table(self) -> np.ndarray:
        self._tables_guard()
        x = np.arange(self._size, dtype=np.int64)
        t = x[:, None] & x[None, :]
        t.setflags(write=False)
        return t

    @cached_property
    def join_table(self) -> np.ndarray:
        self._tables_guard()
        x = np.arange(self._size, dtype=np.int64)
        t = x[:, None] | x[None, :]
        t.setflags(write=False)
        return t

    def leq(self, x, y) -> bool:
        return (self.check(x) & ~self.check(y)) == 0

    def meet(self, x, y) -> int:
        return self.check(x) & self.check(y)

    def join(self, x, y) -> int:
        return self.check(x) | self.check(y)

    def meet_all(self, xs: Iterable[int]) -> int:
        acc = self.top
        for x in xs:
            acc &= self.check(x)
        return acc

    def join_all(self, xs: Iterable[int]) -> int:
        acc = 0
        for x in xs:
            acc |= self.check(x)
        return acc

    def leq_vec(self, x, y):
        return (np.asarray(x, dtype=np.int64) & ~np.asarray(y, dtype=np.int64)) == 0

    def meet_vec(self, x, y):
        return np.asarray(x, dtype=np.int64) & np.asarray(y, dtype=np.int64)

    def join_vec(self, x, y):
        return np.asarray(x, dtype=np.int64) | np.asarray(y, dtype=np.int64)

    def join_reduce(self, xs: np.ndarray) -> int:
        if len(xs) == 0:
            return 0
        return int(np.bitwise_or.reduce(np.asarray(xs, dtype=np.int64)))

    @property
    def height(self) -> int:
        return self.ground

    def meet_fn(self):
        return operator.and_

    def join_fn(self):
        return operator.or_

    def to_set(self, x) -> frozenset:
        x = self.check(x)
        return frozenset(k for k in range(self.ground) if x >> k & 1)

    def from_set(self, items: Iterable[int]) -> int:
        x = 0
        for k in items:
            k = int(k)
            if not 0 <= k < self.ground:
                raise IndexError(f"ground element {k} out of range")
            x |= 1 << k
        return x

    def describe(self) -> dict:
        return {"kind": "powerset", "ground": self.ground}


@dataclass
class AxiomCheck:
    passed: bool
    witness: tuple | None = None
    exhaustive: bool = True


@dataclass
class LatticeReport:
    """Outcome of :func:`validate_lattice`, one entry per axiom."""

    size: int
    checks: dict[str, AxiomCheck] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> dict[str, AxiomCheck]:
        return {k: c for k, c in self.checks.items() if not c.passed}

    def __str__(self):
        lines = [f"lattice of size {self.size}: {'OK' if self.ok else 'FAILED'}"]
        for name, c in self.checks.items():
            mode = "exhaustive" if c.exhaustive else "sampled"
            status = "pass" if c.passed else f"FAIL witness={c.witness}"
            lines.append(f"  {name:<20} {status} ({mode})")
        return "\n".join(lines)


# -- constructors ------------------------------------------------------


def powerset_lattice(g: int) -> PowersetLattice:
    return PowersetLattice(g)


def chain_lattice(n: int) -> FiniteLattice:
    n = int(n)
    if n < 1:
        raise LatticeError(f"chain length must be >= 1, got {n}")
    if n > TABLE_LIMIT:
        raise LatticeError(f"chain of length {n} exceeds the table limit {TABLE_LIMIT}")
    x = np.arange(n)
    return FiniteLattice(
        x[:, None] <= x[None, :],
        np.minimum.outer(x, x),
        np.maximum.outer(x, x),
        bottom=0,
        top=n - 1,
        kind="chain",
        meta={"length": n},
    )


def product_lattice(first: FiniteLattice, second: FiniteLattice) -> FiniteLattice:
    """Component-wise product; the pair ``(a, b)`` is encoded as ``a*second.size + b``."""
    s1, s2 = first.size, second.size
    if s1 * s2 > TABLE_LIMIT:
        raise LatticeError(f"product of sizes {s1}x{s2} exceeds the table limit {TABLE_LIMIT}")
    idx = np.arange(s1 * s2)
    a, b = idx // s2, idx % s2
    A1, A2 = np.ix_(a, a)
    B1, B2 = np.ix_(b, b)
    leq = first.leq_table[A1, A2] & second.leq_table[B1, B2]
    meet = first.meet_table[A1, A2] * s2 + second.meet_table[B1, B2]
    join = first.join_table[A1, A2] * s2 + second.join_table[B1, B2]
    return FiniteLattice(
        leq, meet, join,
        bottom=first.bottom * s2 + second.bottom,
        top=first.top * s2 + second.top,
        kind="product",
        meta={"factors": (first, second)},
    )


def lattice_from_covers(n: int, covers: Iterable[Sequence[int]]) -> FiniteLattice:
    """Build a lattice from a generating relation ``lower < upper``.

    The pairs need not be minimal covers; the order is their
    reflexive-transitive closure.
    """
    n = int(n)
    if not 1 <= n <= TABLE_LIMIT:
        raise LatticeError(f"size must be in [1, {TABLE_LIMIT}], got {n}")
    eye = np.eye(n, dtype=bool)
    leq = eye.copy()
    for pair in covers:
        lo, up = (int(v) for v in pair)
        if not (0 <= lo < n and 0 <= up < n):
            raise LatticeError(f"cover ({lo}, {up}) references an element outside 0..{n - 1}")
        if lo == up:
            raise CyclicCovers(f"element {lo} covers itself")
        leq[lo, up] = True
    for k in range(n):
        leq |= np.outer(leq[:, k], leq[k, :])
    cyc = np.argwhere(leq & leq.T & ~eye)
    if len(cyc):
        a, b = cyc[0]
        raise CyclicCovers(f"elements {a} and {b} lie on a cycle")

    bottoms = np.flatnonzero(leq.all(axis=1))
    tops = np.flatnonzero(leq.all(axis=0))
    if len(bottoms) == 0 or len(tops) == 0:
        missing = "bottom" if len(bottoms) == 0 else "top"
        raise NoBounds(f"order has no global {missing}")

    meet = _bound_table(leq, "greatest lower")
    join = _bound_table(leq.T, "least upper")
    return FiniteLattice(leq, meet, join, int(bottoms[0]), int(tops[0]), kind="covers")


def _bound_table(leq: np.ndarray, what: str) -> np.ndarray:
    # leq[z, x]: z below x.  For each x, rows y: lower[y, z] = z below x and y.
    n = leq.shape[0]
    downsize = leq.sum(axis=0)
    out = np.empty((n, n), dtype=np.int64)
    for x in range(n):
        lower = leq[:, x][None, :] & leq.T
        if not lower.any(axis=1).all():
            y = int(np.flatnonzero(~lower.any(axis=1))[0])
            raise NotALattice(f"elements {x} and {y} have no common bound")
        score = np.where(lower, downsize[None, :], -1)
        best = score.argmax(axis=1)
        bad = (lower & ~leq[:, best].T).any(axis=1)
        if bad.any():
            y = int(np.flatnonzero(bad)[0])
            raise NotALattice(f"elements {x} and {y} have no unique {what} bound")
        out[x] = best
    return out


def hasse_covers(L: FiniteLattice) -> list[tuple[int, int]]:
    """Minimal cover pairs ``(lower, upper)`` of a tabulated lattice."""
    leq = np.asarray(L.leq_table)
    strict = leq & ~np.eye(L.size, dtype=bool)
    # x < y is a cover iff nothing lies strictly between
    between = (strict.astype(np.int64) @ strict.astype(np.int64)) > 0
    return [(int(a), int(b)) for a, b in np.argwhere(strict & ~between)]


def lattice_from_description(desc: dict) -> FiniteLattice:
    """Inverse of :meth:`FiniteLattice.describe` (the lattice file format)."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise LatticeError("lattice description must be an object with a 'kind' field")
    kind = desc["kind"]
    try:
        if kind == "powerset":
            return powerset_lattice(desc["ground"])
        if kind == "chain":
            return chain_lattice(desc["length"])
        if kind == "covers":
            return lattice_from_covers(desc["size"], desc.get("covers", []))
        if kind == "product":
            factors = [lattice_from_description(f) for f in desc["factors"]]
            if not factors:
                raise LatticeError("product needs at least one factor")
            return reduce(product_lattice, factors)
    except KeyError as exc:
        raise LatticeError(f"{kind} lattice description is missing field {exc}") from None
    raise LatticeError(f"unknown lattice kind {kind!r}")


# -- validation --------------------------------------------------------


def validate_lattice(L: FiniteLattice, seed: int = 0) -> LatticeReport:
    """Audit the lattice axioms on the stored operations.

    Pairs are checked exhaustively up to ``EXHAUSTIVE_PAIRS_MAX_SIZE`` elements
    and triples up to ``EXHAUSTIVE_TRIPLES_MAX_SIZE``; beyond that a seeded
    uniform sample is used.
    """
    n = L.size
    rng = np.random.default_rng(seed)
    report = LatticeReport(size=n)

    if L.tabulated and not L.is_powerset:
        for name, t in (("meet", L.meet_table), ("join", L.join_table)):
            bad = np.argwhere((t < 0) | (t >= n))
            if len(bad):
                report.checks[f"{name}_closed"] = AxiomCheck(False, tuple(int(v) for v in bad[0]))
                return report
        report.checks["tables_closed"] = AxiomCheck(True)

    if n <= EXHAUSTIVE_PAIRS_MAX_SIZE:
        X, Y = (a.ravel() for a in np.meshgrid(np.arange(n), np.arange(n), indexing="ij"))
        xs = np.arange(n)
        pairs_exh = True
    else:
        X = rng.integers(0, n, SAMPLED_TRIPLES)
        Y = rng.integers(0, n, SAMPLED_TRIPLES)
        xs = rng.integers(0, n, SAMPLED_TRIPLES)
        pairs_exh = False
    if n <= EXHAUSTIVE_TRIPLES_MAX_SIZE:
        T = [a.ravel() for a in np.meshgrid(*(np.arange(n),) * 3, indexing="ij")]
        trip_exh = True
    else:
        T = [rng.integers(0, n, SAMPLED_TRIPLES) for _ in range(3)]
        trip_exh = False

    def record(name, ok, cols, exhaustive):
        ok = np.asarray(ok)
        if ok.all():
            report.checks[name] = AxiomCheck(True, None, exhaustive)
        else:
            i = int(np.flatnonzero(~ok)[0])
            report.checks[name] = AxiomCheck(False, tuple(int(c[i]) for c in cols), exhaustive)

    M, J, LE = L.meet_vec, L.join_vec, L.leq_vec
    record("meet_commutative", M(X, Y) == M(Y, X), (X, Y), pairs_exh)
    record("join_commutative", J(X, Y) == J(Y, X), (X, Y), pairs_exh)
    record("meet_idempotent", M(xs, xs) == xs, (xs,), pairs_exh)
    record("join_idempotent", J(xs, xs) == xs, (xs,), pairs_exh)
    a, b, c = T
    record("meet_associative", M(M(a, b), c) == M(a, M(b, c)), T, trip_exh)
    record("join_associative", J(J(a, b), c) == J(a, J(b, c)), T, trip_exh)
    record("absorption", (J(X, M(X, Y)) == X) & (M(X, J(X, Y)) == X), (X, Y), pairs_exh)
    bot = np.full_like(xs, L.bottom)
    top = np.full_like(xs, L.top)
    record("identities", (J(xs, bot) == xs) & (M(xs, top) == xs), (xs,), pairs_exh)
    le = LE(X, Y)
    record("order_consistency", (le == (M(X, Y) == X)) & (le == (J(X, Y) == Y)), (X, Y), pairs_exh)
    record("bounds", LE(bot, xs) & LE(xs, top), (xs,), pairs_exh)
    return report
