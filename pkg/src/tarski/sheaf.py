"""Graphs, lattice-valued network sheaves and their sections."""
from __future__ import annotations

from collections import deque
from functools import cached_property
from math import prod
from typing import Iterable, Mapping, Sequence

from .galois import LatticeMap, NotJoinPreserving, ShapeMismatch, compose, identity_map, residual
from .lattice import FiniteLattice

PRIMAL = "primal"
DUAL = "dual"
MODES = (PRIMAL, DUAL)
DEFAULT_SECTION_CAP = 10**6


class SheafError(ValueError):
    pass


class MissingMap(SheafError):
    pass


class NotJoinPreservingMap(SheafError, NotJoinPreserving):
    def __init__(self, vertex: int, edge: tuple[int, int]):
        self.vertex = vertex
        self.edge = edge
        super().__init__(f"map from vertex {vertex} to edge {list(edge)} is not join-preserving")


class DualUnavailable(SheafError):
    pass


class StateSpaceTooLarge(ValueError):
    pass


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


class Graph:
    """Undirected graph on vertices ``0..n-1``; loops allowed, multi-edges not.

    Edges are stored as ``(i, j)`` with ``i <= j`` in insertion order.
    """

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = ()):
        n = int(n)
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        self.n = n
        normalized: list[tuple[int, int]] = []
        seen: set[tuple[int, int]] = set()
        for e in edges:
            if len(e) != 2:
                raise ValueError(f"edge {e!r} must have exactly two endpoints")
            i, j = sorted((int(e[0]), int(e[1])))
            if not (0 <= i and j < n):
                raise ValueError(f"edge ({i}, {j}) references a vertex outside 0..{n - 1}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            normalized.append((i, j))
        self.edges: tuple[tuple[int, int], ...] = tuple(normalized)
        self._index = {e: k for k, e in enumerate(self.edges)}
        nbrs: list[set[int]] = [set() for _ in range(n)]
        inc: list[list[int]] = [[] for _ in range(n)]
        for k, (i, j) in enumerate(self.edges):
            nbrs[i].add(j)
            nbrs[j].add(i)
            inc[i].append(k)
            if j != i:
                inc[j].append(k)
        self.neighbors: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in nbrs)
        self.incident: tuple[tuple[int, ...], ...] = tuple(tuple(v) for v in inc)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, [(i, j) for i in range(n) for j in range(i + 1, n)])

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        if n < 3:
            return cls.path(n)
        return cls(n, [(i, (i + 1) % n) for i in range(n)])

    def edge_index(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"no edge ({i}, {j})") from None

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._index

    def components(self) -> list[list[int]]:
        seen = [False] * self.n
        out = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            comp, queue = [], deque([s])
            while queue:
                v = queue.popleft()
                comp.append(v)
                for w in self.neighbors[v]:
                    if not seen[w]:
                        seen[w] = True
                        queue.append(w)
            out.append(sorted(comp))
        return out

    def is_connected(self) -> bool:
        return self.n <= 1 or len(self.components()) == 1

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and set(self.edges) == set(other.edges)

    def __repr__(self):
        return f"Graph(n={self.n}, edges={len(self.edges)})"


class NetworkSheaf:
    """A validated lattice-valued sheaf; build with :func:`build_sheaf`.

    For edge ``k = (u, v)`` the structure maps are stored as the pair
    ``up_maps[k] = (F_u, F_v)`` and their residuals as ``residuals[k]``.
    A loop carries two maps which coincide unless supplied separately.
    """

    def __init__(self, graph, vertex_lattices, edge_lattices, up_maps, residuals):
        self.graph = graph
        self.vertex_lattices: tuple[FiniteLattice, ...] = tuple(vertex_lattices)
        self.edge_lattices: tuple[FiniteLattice, ...] = tuple(edge_lattices)
        self.up_maps: tuple[tuple[LatticeMap, LatticeMap], ...] = tuple(up_maps)
        self.residuals: tuple[tuple[LatticeMap, LatticeMap], ...] = tuple(residuals)

    @property
    def n(self) -> int:
        return self.graph.n

    def state_space_size(self) -> int:
        return prod(L.size for L in self.vertex_lattices)

    @cached_property
    def supports_dual(self) -> bool:
        """Dual mode reuses residuals as structure maps, so every edge
        lattice must coincide with the lattices of its endpoints."""
        return all(
            self.vertex_lattices[w] == self.edge_lattices[k]
            for k, (u, v) in enumerate(self.graph.edges)
            for w in (u, v)
        )

    def structure_maps(self, mode: str = PRIMAL):
        """Per-edge ``(S_u, S_v)`` whose agreement defines a section in ``mode``."""
        if check_mode(mode) == PRIMAL:
            return self.up_maps
        self._require_dual()
        return self.residuals

    def adjoint_maps(self, mode: str = PRIMAL):
        if check_mode(mode) == PRIMAL:
            return self.residuals
        self._require_dual()
        return self.up_maps

    def _require_dual(self):
        if not self.supports_dual:
            raise DualUnavailable(
                "dual mode needs each edge lattice to equal its endpoint lattices")

    def transfer_maps(self, mode: str = PRIMAL) -> tuple[tuple[LatticeMap, LatticeMap], ...]:
        """Per-edge ``(into_u_from_v, into_v_from_u)`` composites used by the Laplacian.

        Primal: ``F_u^+ o F_v``; dual: ``F_u o F_v^+``.
        """
        cache = self.__dict__.setdefault("_transfer_cache", {})
        if mode not in cache:
            S, A = self.structure_maps(mode), self.adjoint_maps(mode)
            cache[mode] = tuple(
                (compose(A[k][0], S[k][1]), compose(A[k][1], S[k][0]))
                for k in range(len(self.graph.edges))
            )
        return cache[mode]

    def check_assignment(self, x: Sequence[int]) -> tuple[int, ...]:
        if len(x) != self.n:
            raise ShapeMismatch(f"assignment has {len(x)} entries, sheaf has {self.n} vertices")
        return tuple(L.check(v) for L, v in zip(self.vertex_lattices, x))

    def __repr__(self):
        return f"NetworkSheaf(n={self.n}, edges={len(self.graph.edges)})"


def _edge_key(graph: Graph, edge) -> int:
    i, j = (int(v) for v in edge)
    return graph.edge_index(i, j)


def build_sheaf(
    graph: Graph,
    vertex_lattices: Sequence[FiniteLattice],
    edge_lattices: Sequence[FiniteLattice] | Mapping,
    up_maps: Mapping,
) -> NetworkSheaf:
    """Validate incidence data and cache residuals.

    ``edge_lattices`` is either aligned with ``graph.edges`` or keyed by edge
    pairs.  ``up_maps`` is keyed by ``(vertex, (i, j))``; a loop's value may
    be a pair of maps to encode a self-constraint.
    """
    if len(vertex_lattices) != graph.n:
        raise ShapeMismatch(f"{len(vertex_lattices)} vertex lattices for {graph.n} vertices")
    if isinstance(edge_lattices, Mapping):
        elat = [None] * len(graph.edges)
        for e, L in edge_lattices.items():
            elat[_edge_key(graph, e)] = L
        missing = [graph.edges[k] for k, L in enumerate(elat) if L is None]
        if missing:
            raise ShapeMismatch(f"no lattice given for edge {list(missing[0])}")
    else:
        elat = list(edge_lattices)
        if len(elat) != len(graph.edges):
            raise ShapeMismatch(f"{len(elat)} edge lattices for {len(graph.edges)} edges")

    given: dict[tuple[int, int], object] = {}
    for (vertex, edge), m in up_maps.items():
        k = _edge_key(graph, edge)
        if int(vertex) not in graph.edges[k]:
            raise ShapeMismatch(f"vertex {vertex} is not incident to edge {list(graph.edges[k])}")
        given[(int(vertex), k)] = m

    maps, res = [], []
    for k, (u, v) in enumerate(graph.edges):
        if u == v:
            m = given.get((u, k))
            if m is None:
                raise MissingMap(f"no map for vertex {u} on loop [{u}, {u}]")
            pair = tuple(m) if isinstance(m, (tuple, list)) else (m, m)
            if len(pair) != 2:
                raise ShapeMismatch(f"loop [{u}, {u}] takes one map or a pair")
        else:
            pair = []
            for w in (u, v):
                m = given.get((w, k))
                if m is None:
                    raise MissingMap(f"no map for vertex {w} on edge [{u}, {v}]")
                pair.append(m)
        checked = []
        for w, m in zip((u, v), pair):
            if m.source != vertex_lattices[w] or m.target != elat[k]:
                raise ShapeMismatch(
                    f"map for vertex {w} on edge [{u}, {v}] does not match its lattices")
            if not m.is_join_preserving:
                raise NotJoinPreservingMap(w, (u, v))
            checked.append(m)
        maps.append(tuple(checked))
        if checked[0] is checked[1]:
            r = residual(checked[0])
            res.append((r, r))
        else:
            res.append(tuple(residual(m) for m in checked))
    return NetworkSheaf(graph, vertex_lattices, elat, maps, res)


def constant_sheaf(graph: Graph, L: FiniteLattice) -> NetworkSheaf:
    ident = identity_map(L)
    maps = {}
    for i, j in graph.edges:
        maps[(i, (i, j))] = ident
        maps[(j, (i, j))] = ident
    return build_sheaf(graph, [L] * graph.n, [L] * len(graph.edges), maps)


def is_section(sheaf: NetworkSheaf, x: Sequence[int], mode: str = PRIMAL) -> bool:
    x = sheaf.check_assignment(x)
    S = sheaf.structure_maps(mode)
    for k, (u, v) in enumerate(sheaf.graph.edges):
        fu, fv = S[k]
        if fu(x[u]) != fv(x[v]):
            return False
    return True


def enumerate_sections(
    sheaf: NetworkSheaf, cap: int = DEFAULT_SECTION_CAP, mode: str = PRIMAL
) -> list[tuple[int, ...]]:
    """All sections, in lexicographic order of vertex-value tuples.

    Depth-first over vertices in index order; an edge is checked as soon as
    both its endpoints are assigned.
    """
    total = sheaf.state_space_size()
    if total > cap:
        raise StateSpaceTooLarge(f"state space has {total} assignments, cap is {cap}")
    S = sheaf.structure_maps(mode)
    n = sheaf.n
    # edges to check once vertex w (the larger endpoint) is assigned
    closing: list[list[tuple[int, object, object]]] = [[] for _ in range(n)]
    for k, (u, v) in enumerate(sheaf.graph.edges):
        closing[v].append((u, S[k][0].scalar(), S[k][1].scalar()))
    sizes = [L.size for L in sheaf.vertex_lattices]
    out: list[tuple[int, ...]] = []
    x = [0] * n

    def extend(w: int):
        if w == n:
            out.append(tuple(x))
            return
        for val in range(sizes[w]):
            x[w] = val
            if all(fu(x[u]) == fv(val) for u, fu, fv in closing[w]):
                extend(w + 1)

    extend(0)
    return out
