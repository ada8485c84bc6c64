"""Random structure generators and pure-Python oracles shared by the tests.

The oracles deliberately avoid the package's tables and helpers: orders are
rebuilt from ``leq``, meets and residuals are found by scanning, so that a
bug in the package cannot hide behind a shared code path.
"""
from __future__ import annotations

import itertools

import numpy as np

from tarski.galois import LatticeMap, identity_map, random_join_preserving_map, table_map
from tarski.lattice import (
    FiniteLattice,
    chain_lattice,
    lattice_from_covers,
    powerset_lattice,
    product_lattice,
)
from tarski.sheaf import Graph, build_sheaf


def diamond(k: int) -> FiniteLattice:
    """bottom < k atoms < top; k=3 is M3."""
    return lattice_from_covers(k + 2, [(0, a) for a in range(1, k + 1)] + [(a, k + 1) for a in range(1, k + 1)])


def pentagon() -> FiniteLattice:
    # 0 < a=1 < b=2 < 4, 0 < c=3 < 4
    return lattice_from_covers(5, [(0, 1), (1, 2), (2, 4), (0, 3), (3, 4)])


def moore_lattice(ground: int, generators) -> FiniteLattice:
    """Intersection-closure of ``generators`` plus the full set, ordered by inclusion."""
    full = (1 << ground) - 1
    family = {full} | {int(g) & full for g in generators}
    changed = True
    while changed:
        changed = False
        for a, b in itertools.combinations(sorted(family), 2):
            if a & b not in family:
                family.add(a & b)
                changed = True
    sets = sorted(family, key=lambda s: (bin(s).count("1"), s))
    pairs = [(i, j) for i, a in enumerate(sets) for j, b in enumerate(sets) if i != j and a & b == a]
    return lattice_from_covers(len(sets), pairs)


def random_lattice(rng: np.random.Generator, max_size: int = 8) -> FiniteLattice:
    """A lattice of at most ``max_size`` elements drawn from a varied pool."""
    while True:
        kind = rng.integers(6)
        if kind == 0:
            L = chain_lattice(int(rng.integers(1, max_size + 1)))
        elif kind == 1:
            L = powerset_lattice(int(rng.integers(1, 4)))
        elif kind == 2:
            L = diamond(int(rng.integers(1, 4)))
        elif kind == 3:
            L = pentagon()
        elif kind == 4:
            L = product_lattice(chain_lattice(int(rng.integers(1, 4))), chain_lattice(int(rng.integers(1, 4))))
        else:
            g = int(rng.integers(2, 5))
            L = moore_lattice(g, rng.integers(0, 1 << g, size=int(rng.integers(1, 5))))
        if L.size <= max_size:
            return L


def random_graph(rng: np.random.Generator, n: int, p: float = 0.5, loops: bool = False) -> Graph:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if loops:
        edges += [(i, i) for i in range(n) if rng.random() < 0.2]
    return Graph(n, edges)


def random_map(source, target, rng) -> LatticeMap:
    if source is target and rng.random() < 0.2:
        return identity_map(source)
    return random_join_preserving_map(source, target, rng)


def random_sheaf(rng, max_vertices=5, max_lattice=8, state_cap=10**5, loops=True, edge_lattice=None,
                 min_vertices=1):
    """Heterogeneous sheaf; ``edge_lattice`` (a callable of rng) overrides edge stalks."""
    while True:
        n = int(rng.integers(min_vertices, max_vertices + 1))
        vl = [random_lattice(rng, max_lattice) for _ in range(n)]
        if np.prod([L.size for L in vl], dtype=float) <= state_cap:
            break
    graph = random_graph(rng, n, float(rng.uniform(0.3, 0.9)), loops=loops)
    return sheaf_on(rng, graph, vl, edge_lattice or (lambda r: random_lattice(r, max_lattice)))


def sheaf_on(rng, graph, vertex_lattices, edge_lattice):
    """Random join-preserving structure maps over fixed graph and vertex stalks."""
    vl = vertex_lattices
    el, maps = [], {}
    for i, j in graph.edges:
        E = edge_lattice(rng)
        el.append(E)
        if i == j and rng.random() < 0.5:
            maps[(i, (i, j))] = (random_map(vl[i], E, rng), random_map(vl[i], E, rng))
        else:
            maps[(i, (i, j))] = random_map(vl[i], E, rng)
            if i != j:
                maps[(j, (i, j))] = random_map(vl[j], E, rng)
    return build_sheaf(graph, vl, el, maps)


def random_dual_sheaf(rng, max_vertices=5, max_lattice=8, state_cap=10**5, min_vertices=1):
    """Each component shares one lattice on vertices and edges, as dual mode needs."""
    while True:
        n = int(rng.integers(min_vertices, max_vertices + 1))
        graph = random_graph(rng, n, float(rng.uniform(0.3, 0.9)), loops=rng.random() < 0.3)
        lat = [None] * n
        for comp in graph.components():
            L = random_lattice(rng, max_lattice)
            for v in comp:
                lat[v] = L
        if np.prod([L.size for L in lat], dtype=float) <= state_cap:
            break
    maps = {}
    for i, j in graph.edges:
        L = lat[i]
        maps[(i, (i, j))] = random_map(L, L, rng)
        if i != j:
            maps[(j, (i, j))] = random_map(L, L, rng)
    return build_sheaf(graph, lat, [lat[i] for i, _ in graph.edges], maps)


def random_assignment(sheaf, rng) -> tuple[int, ...]:
    return tuple(int(rng.integers(L.size)) for L in sheaf.vertex_lattices)


# -- oracles -----------------------------------------------------------------------


def glb(L: FiniteLattice, xs) -> int:
    """Greatest lower bound found by scanning the order only."""
    lower = [z for z in range(L.size) if all(L.leq(z, x) for x in xs)]
    best = [z for z in lower if all(L.leq(w, z) for w in lower)]
    assert len(best) == 1
    return best[0]


def lub(L: FiniteLattice, xs) -> int:
    upper = [z for z in range(L.size) if all(L.leq(x, z) for x in xs)]
    best = [z for z in upper if all(L.leq(z, w) for w in upper)]
    assert len(best) == 1
    return best[0]


def oracle_residual(phi: LatticeMap) -> list[int]:
    """phi+(q) as the join of {p : phi(p) <= q}, by direct scan."""
    P, Q = phi.source, phi.target
    return [lub(P, [p for p in range(P.size) if Q.leq(phi(p), q)]) for q in range(Q.size)]


def oracle_laplacian(sheaf, x, active, dual=False):
    """Direct evaluation of the synchronous (or masked) operator.

    Primal: meet over active neighbours j of F_i+ F_j x_j, top if none.
    Dual: join over active neighbours of F_i F_j+ x_j, bottom if none.
    """
    out = []
    for i in range(sheaf.n):
        L = sheaf.vertex_lattices[i]
        terms = []
        for k, (u, v) in enumerate(sheaf.graph.edges):
            if i not in (u, v):
                continue
            if u == v:
                sides = [(0, 1), (1, 0)]  # a loop constrains the vertex against itself both ways
            else:
                sides = [(0, 1)] if i == u else [(1, 0)]
            for mine, theirs in sides:
                j = (u, v)[theirs]
                if j not in active:
                    continue
                f_i, f_j = sheaf.up_maps[k][mine], sheaf.up_maps[k][theirs]
                if dual:
                    terms.append(f_i(oracle_residual(f_j)[x[j]]))
                else:
                    terms.append(oracle_residual(f_i)[f_j(x[j])])
        out.append(lub(L, terms) if dual else glb(L, terms))
    return out


def oracle_step(sheaf, x, active, dual=False):
    lap = oracle_laplacian(sheaf, x, active, dual)
    L = sheaf.vertex_lattices
    if dual:
        return tuple(lub(L[i], [x[i], lap[i]]) for i in range(sheaf.n))
    return tuple(glb(L[i], [x[i], lap[i]]) for i in range(sheaf.n))


def oracle_sections(sheaf, dual=False):
    """Every assignment checked edge by edge, in lexicographic order."""
    out = []
    for x in itertools.product(*(range(L.size) for L in sheaf.vertex_lattices)):
        ok = True
        for k, (u, v) in enumerate(sheaf.graph.edges):
            a, b = sheaf.up_maps[k]
            if dual:
                ok = oracle_residual(a)[x[u]] == oracle_residual(b)[x[v]]
            else:
                ok = a(x[u]) == b(x[v])
            if not ok:
                break
        if ok:
            out.append(x)
    return out


def order_isomorphic(A: FiniteLattice, B: FiniteLattice) -> bool:
    if A.size != B.size:
        return False
    for perm in itertools.permutations(range(B.size)):
        if all(A.leq(a, b) == B.leq(perm[a], perm[b]) for a in range(A.size) for b in range(A.size)):
            return True
    return False


def embedding(source: FiniteLattice, other: FiniteLattice, first: bool = True) -> LatticeMap:
    """x -> (x, bottom) into source x other (or other x source): injective, join-preserving."""
    if first:
        target = product_lattice(source, other)
        image = [x * other.size + other.bottom for x in range(source.size)]
    else:
        target = product_lattice(other, source)
        image = [other.bottom * source.size + x for x in range(source.size)]
    return table_map(source, target, image)
