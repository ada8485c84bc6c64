"""Join-preserving maps between finite lattices and their residuals."""
from __future__ import annotations

from functools import cached_property
from typing import Callable

import numpy as np

from .lattice import FiniteLattice, LatticeError

#: Maps whose source has at most this many elements are stored as tables.
MAP_TABLE_LIMIT = 1 << 16
#: Pair budget for exhaustive join-preservation / adjunction checks.
EXHAUSTIVE_PAIR_LIMIT = 1 << 22
SAMPLED_PAIRS = 10_000


class NotJoinPreserving(LatticeError):
    pass


class ShapeMismatch(LatticeError):
    pass


class LatticeMap:
    """A map ``source -> target`` given as an image table or a function.

    ``func`` (scalar) and ``vfunc`` (numpy, vectorized) are only needed for
    sources too large to tabulate.  ``known_residual`` lets constructors that
    know a closed form for the residual supply it, avoiding the scan.
    """

    def __init__(
        self,
        source: FiniteLattice,
        target: FiniteLattice,
        image=None,
        func: Callable[[int], int] | None = None,
        vfunc: Callable[[np.ndarray], np.ndarray] | None = None,
        name: str = "",
        known_residual: "LatticeMap | None" = None,
    ):
        self.source = source
        self.target = target
        self.name = name
        self.known_residual = known_residual
        self._func = func
        self._vfunc = vfunc
        if image is None and func is None:
            raise ValueError("LatticeMap needs an image table or a function")
        if image is None and source.size <= MAP_TABLE_LIMIT:
            if vfunc is not None:
                image = vfunc(np.arange(source.size, dtype=np.int64))
            else:
                image = [func(x) for x in range(source.size)]
        if image is not None:
            image = np.array(image, dtype=np.int64)
            if image.shape != (source.size,):
                raise ShapeMismatch(
                    f"image table has {image.size} entries, source has {source.size} elements")
            if image.size and (image.min() < 0 or image.max() >= target.size):
                bad = int(np.flatnonzero((image < 0) | (image >= target.size))[0])
                raise ShapeMismatch(f"image of {bad} is {int(image[bad])}, outside the target")
            image.setflags(write=False)
            self._image = image
            self._image_l = image.tolist()
        else:
            self._image = None
            self._image_l = None

    @property
    def tabulated(self) -> bool:
        return self._image is not None

    @property
    def image_table(self) -> np.ndarray:
        if self._image is None:
            raise LatticeError("map is functional; its source is too large to tabulate")
        return self._image

    def __call__(self, x) -> int:
        if self._image_l is not None:
            return self._image_l[self.source.check(x)]
        return int(self._func(self.source.check(x)))

    def apply_vec(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        if self._image is not None:
            return self._image[xs]
        if self._vfunc is not None:
            return np.asarray(self._vfunc(xs), dtype=np.int64)
        return np.array([self._func(int(x)) for x in xs.ravel()], dtype=np.int64).reshape(xs.shape)

    def scalar(self) -> Callable[[int], int]:
        """Unchecked fast scalar evaluator for inner loops."""
        if self._image_l is not None:
            return self._image_l.__getitem__
        return self._func

    @cached_property
    def is_join_preserving(self) -> bool:
        return is_join_preserving(self)

    @cached_property
    def is_injective(self) -> bool:
        if self.tabulated:
            return len(np.unique(self._image)) == self.source.size
        raise LatticeError("injectivity check requires a tabulated map")

    def __eq__(self, other):
        if not isinstance(other, LatticeMap):
            return NotImplemented
        if self.source != other.source or self.target != other.target:
            return False
        xs = _probe_elements(self.source)
        return bool(np.array_equal(self.apply_vec(xs), other.apply_vec(xs)))

    __hash__ = object.__hash__

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<LatticeMap{label} {self.source.size}->{self.target.size}>"


def _probe_elements(L: FiniteLattice, limit: int = MAP_TABLE_LIMIT, seed: int = 0) -> np.ndarray:
    if L.size <= limit:
        return np.arange(L.size, dtype=np.int64)
    rng = np.random.default_rng(seed)
    return np.concatenate([[L.bottom, L.top], rng.integers(0, L.size, SAMPLED_PAIRS)])


def identity_map(L: FiniteLattice) -> LatticeMap:
    if L.size <= MAP_TABLE_LIMIT:
        m = LatticeMap(L, L, image=np.arange(L.size), name="id")
    else:
        m = LatticeMap(L, L, func=lambda x: x, vfunc=lambda xs: xs, name="id")
    m.known_residual = m
    return m


def table_map(source: FiniteLattice, target: FiniteLattice, image, name: str = "") -> LatticeMap:
    return LatticeMap(source, target, image=image, name=name)


def is_join_preserving(phi: LatticeMap, seed: int = 0) -> bool:
    """``phi(x v y) == phi(x) v phi(y)`` for all pairs, and ``phi(bottom) == bottom``.

    Exhaustive whenever the pair count allows it.  Large powerset sources use
    the exact criterion that ``phi`` is determined by its values on singletons.
    """
    P, Q = phi.source, phi.target
    if phi(P.bottom) != Q.bottom:
        return False
    n = P.size
    if n * n <= EXHAUSTIVE_PAIR_LIMIT and P.tabulated:
        img = phi.apply_vec(np.arange(n))
        lhs = img[P.join_table]
        rhs = Q.join_vec(img[:, None], img[None, :])
        return bool(np.array_equal(lhs, rhs))
    if P.is_powerset:
        atoms = phi.apply_vec(np.array([1 << k for k in range(P.ground)], dtype=np.int64))
        xs = _probe_elements(P, seed=seed)
        expect = np.array(
            [Q.join_all(atoms[[k for k in range(P.ground) if int(x) >> k & 1]].tolist()) for x in xs],
            dtype=np.int64,
        )
        return bool(np.array_equal(phi.apply_vec(xs), expect))
    rng = np.random.default_rng(seed)
    X = rng.integers(0, n, SAMPLED_PAIRS)
    Y = rng.integers(0, n, SAMPLED_PAIRS)
    lhs = phi.apply_vec(P.join_vec(X, Y))
    return bool(np.array_equal(lhs, Q.join_vec(phi.apply_vec(X), phi.apply_vec(Y))))


def residual(phi: LatticeMap, method: str = "auto") -> LatticeMap:
    """The residual ``q -> join{p : phi(p) <= q}`` of a join-preserving map.

    ``method="scan"`` always evaluates the defining join over the whole
    source; ``"auto"`` prefers a closed form supplied by the map's
    constructor and falls back on the scan (or, for untabulable powerset
    sources, the exact singleton form ``{k : phi({k}) <= q}``).
    """
    if method not in ("auto", "scan"):
        raise ValueError(f"unknown residual method {method!r}")
    if not phi.is_join_preserving:
        raise NotJoinPreserving(f"{phi!r} is not join-preserving; its residual is undefined")
    if method == "auto" and phi.known_residual is not None:
        return phi.known_residual
    P, Q = phi.source, phi.target
    if P.size <= MAP_TABLE_LIMIT and Q.size <= MAP_TABLE_LIMIT:
        img = phi.apply_vec(np.arange(P.size))
        out = np.empty(Q.size, dtype=np.int64)
        elems = np.arange(P.size)
        for q in range(Q.size):
            below = Q.leq_vec(img, np.full_like(img, q))
            out[q] = P.join_reduce(elems[below])
        return LatticeMap(Q, P, image=out, name=f"{phi.name}+" if phi.name else "")
    if not P.is_powerset:
        raise LatticeError("residual of an untabulated map needs a powerset source")
    atoms = [phi(1 << k) for k in range(P.ground)]

    def res(q: int) -> int:
        return sum(1 << k for k, a in enumerate(atoms) if Q.leq(a, q))

    return LatticeMap(Q, P, func=res, name=f"{phi.name}+" if phi.name else "")


def check_adjunction(phi: LatticeMap, phi_plus: LatticeMap, seed: int = 0) -> bool:
    """``phi(p) <= q  <=>  p <= phi_plus(q)`` over all (or >= 10,000 sampled) pairs."""
    P, Q = phi.source, phi.target
    if phi_plus.source != Q or phi_plus.target != P:
        raise ShapeMismatch("phi_plus must map phi's target back to phi's source")
    if P.size * Q.size <= EXHAUSTIVE_PAIR_LIMIT:
        ps, qs = (a.ravel() for a in np.meshgrid(np.arange(P.size), np.arange(Q.size), indexing="ij"))
    else:
        rng = np.random.default_rng(seed)
        ps = rng.integers(0, P.size, SAMPLED_PAIRS)
        qs = rng.integers(0, Q.size, SAMPLED_PAIRS)
    lhs = Q.leq_vec(phi.apply_vec(ps), qs)
    rhs = P.leq_vec(ps, phi_plus.apply_vec(qs))
    return bool(np.array_equal(lhs, rhs))


def compose(psi: LatticeMap, phi: LatticeMap) -> LatticeMap:
    """``psi o phi``, tabulated whenever ``phi`` is."""
    if phi.target != psi.source:
        raise ShapeMismatch("cannot compose: phi's target differs from psi's source")
    name = f"{psi.name}.{phi.name}" if psi.name and phi.name else ""
    if phi.tabulated:
        return LatticeMap(phi.source, psi.target, image=psi.apply_vec(phi.image_table), name=name)
    f, g = psi.scalar(), phi.scalar()
    return LatticeMap(
        phi.source, psi.target,
        func=lambda x: f(g(x)),
        vfunc=lambda xs: psi.apply_vec(phi.apply_vec(xs)),
        name=name,
    )


def pointwise_leq(f: LatticeMap, g: LatticeMap) -> bool:
    """``f(x) <= g(x)`` for every x (both maps share source and target)."""
    if f.source != g.source or f.target != g.target:
        raise ShapeMismatch("pointwise comparison needs maps with equal source and target")
    xs = _probe_elements(f.source)
    return bool(f.target.leq_vec(f.apply_vec(xs), g.apply_vec(xs)).all())


def random_join_preserving_map(
    source: FiniteLattice,
    target: FiniteLattice,
    rng: np.random.Generator,
    terms: int | None = None,
) -> LatticeMap:
    """A random join-preserving map, valid for any pair of finite lattices.

    Built as a pointwise join of step maps ``x -> bottom if x <= d else q``;
    each step map preserves joins because ``x v y <= d`` iff both are, and
    pointwise joins of join-preserving maps preserve joins.
    """
    if terms is None:
        terms = int(rng.integers(0, max(2, source.size // 2) + 1))
    xs = np.arange(source.size)
    img = np.full(source.size, target.bottom, dtype=np.int64)
    for _ in range(terms):
        d = int(rng.integers(source.size))
        q = int(rng.integers(target.size))
        above = ~source.leq_vec(xs, np.full_like(xs, d))
        img[above] = target.join_vec(img[above], np.full(int(above.sum()), q))
    return LatticeMap(source, target, image=img)
