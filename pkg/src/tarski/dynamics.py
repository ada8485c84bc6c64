"""Asynchronous Tarski Laplacians, heat flow and Lyapunov energy.

Primal mode meets residual-decoded neighbour messages into each vertex and
descends; dual mode joins them and ascends.  In dual mode the roles of each
structure map and its residual are exchanged, so its fixed points are the
assignments on which the residuals agree across every edge.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .galois import ShapeMismatch
from .lattice import FiniteLattice, LatticeError
from .sheaf import (
    DUAL,
    PRIMAL,
    NetworkSheaf,
    StateSpaceTooLarge,
    check_mode,
    is_section,
)

FIRING_KINDS = ("all_fire", "round_robin", "bernoulli", "explicit")


class NotPowerset(LatticeError):
    pass


class MetricUndefined(LatticeError):
    pass


class FlowStatus(str, enum.Enum):
    CONVERGED = "ConvergedToSection"
    STEP_CAP = "StepCapReached"


# -- firing sequences ----------------------------------------------------


@dataclass(frozen=True)
class FiringSequence:
    """Deterministic generator of the active vertex set at each time step.

    Iterating always restarts from ``t = 0``, so one sequence can drive any
    number of runs identically.
    """

    kind: str
    n: int
    p: float | None = None
    seed: int | None = None
    schedule: tuple[frozenset, ...] = ()

    def __iter__(self) -> Iterator[frozenset]:
        everyone = frozenset(range(self.n))
        if self.kind == "all_fire":
            return itertools.repeat(everyone)
        if self.kind == "round_robin":
            if self.n == 0:
                return itertools.repeat(frozenset())
            return (frozenset((t % self.n,)) for t in itertools.count())
        if self.kind == "explicit":
            return itertools.cycle(self.schedule)
        return self._bernoulli()

    def _bernoulli(self) -> Iterator[frozenset]:
        rng = np.random.default_rng(self.seed)
        while True:
            draw = rng.random(self.n) < self.p
            yield frozenset(np.flatnonzero(draw).tolist())

    def take(self, steps: int) -> list[frozenset]:
        return list(itertools.islice(iter(self), steps))

    @property
    def live(self) -> bool | None:
        """Structural liveness; ``None`` for Bernoulli firing, which is live
        only almost surely."""
        if self.kind in ("all_fire", "round_robin"):
            return True
        if self.kind == "explicit":
            return frozenset().union(*self.schedule) >= frozenset(range(self.n))
        return None

    def describe(self) -> dict:
        out: dict = {"kind": self.kind, "n": self.n}
        if self.kind == "bernoulli":
            out.update(p=self.p, seed=self.seed)
        if self.kind == "explicit":
            out["schedule"] = [sorted(s) for s in self.schedule]
        return out


def make_firing_sequence(
    kind: str,
    n: int,
    p: float | None = None,
    seed: int | None = None,
    schedule: Iterable[Iterable[int]] | None = None,
) -> FiringSequence:
    if kind not in FIRING_KINDS:
        raise ValueError(f"firing kind must be one of {FIRING_KINDS}, got {kind!r}")
    n = int(n)
    if n < 0:
        raise ValueError("vertex count must be non-negative")
    if kind == "bernoulli":
        if p is None or not 0 < p <= 1:
            raise ValueError(f"bernoulli firing needs p in (0, 1], got {p!r}")
        if seed is None:
            raise ValueError("bernoulli firing needs a seed")
        return FiringSequence(kind, n, p=float(p), seed=int(seed))
    if kind == "explicit":
        if not schedule:
            raise ValueError("explicit firing needs a non-empty schedule")
        sets = []
        for s in schedule:
            s = frozenset(int(v) for v in s)
            if any(not 0 <= v < n for v in s):
                raise ValueError(f"schedule entry {sorted(s)} references a vertex outside 0..{n - 1}")
            sets.append(s)
        return FiringSequence(kind, n, schedule=tuple(sets))
    return FiringSequence(kind, n)


# -- operators -----------------------------------------------------------


class _Operator:
    """Per-(sheaf, mode) unchecked kernels for the Laplacian and flow step."""

    def __init__(self, sheaf: NetworkSheaf, mode: str):
        self.mode = check_mode(mode)
        T = sheaf.transfer_maps(mode)
        self.edges = [
            (u, v, T[k][0].scalar(), T[k][1].scalar()) for k, (u, v) in enumerate(sheaf.graph.edges)
        ]
        lats = sheaf.vertex_lattices
        if mode == PRIMAL:
            self.ops = [L.meet_fn() for L in lats]
            self.unit = [L.top for L in lats]
        else:
            self.ops = [L.join_fn() for L in lats]
            self.unit = [L.bottom for L in lats]

    def laplacian(self, x: Sequence[int], active) -> list[int]:
        y = list(self.unit)
        ops = self.ops
        for u, v, into_u, into_v in self.edges:
            if v in active:
                y[u] = ops[u](y[u], into_u(x[v]))
            if u in active:
                y[v] = ops[v](y[v], into_v(x[u]))
        return y

    def step(self, x: Sequence[int], active) -> tuple[int, ...]:
        y = self.laplacian(x, active)
        return tuple(op(a, b) for op, a, b in zip(self.ops, x, y))


def _operator(sheaf: NetworkSheaf, mode: str) -> _Operator:
    cache = sheaf.__dict__.setdefault("_operator_cache", {})
    if mode not in cache:
        cache[mode] = _Operator(sheaf, mode)
    return cache[mode]


def _active_set(sheaf: NetworkSheaf, active) -> frozenset:
    active = frozenset(int(v) for v in active)
    bad = [v for v in active if not 0 <= v < sheaf.n]
    if bad:
        raise ShapeMismatch(f"active vertex {bad[0]} outside 0..{sheaf.n - 1}")
    return active


def tarski_laplacian(
    sheaf: NetworkSheaf, x: Sequence[int], active: Iterable[int] | None = None, mode: str = PRIMAL
) -> tuple[int, ...]:
    """Aggregate decoded messages from the active neighbours of every vertex.

    ``active=None`` means every vertex fires (the synchronous operator).  A
    vertex with no active neighbour receives the aggregation unit (top in
    primal mode, bottom in dual mode).
    """
    x = sheaf.check_assignment(x)
    active = frozenset(range(sheaf.n)) if active is None else _active_set(sheaf, active)
    return tuple(_operator(sheaf, check_mode(mode)).laplacian(x, active))


def flow_step(
    sheaf: NetworkSheaf, x: Sequence[int], active: Iterable[int] | None = None, mode: str = PRIMAL
) -> tuple[int, ...]:
    """One heat-flow step: ``x_i meet (L x)_i`` (primal) or ``x_i join (L* x)_i`` (dual)."""
    x = sheaf.check_assignment(x)
    active = frozenset(range(sheaf.n)) if active is None else _active_set(sheaf, active)
    return _operator(sheaf, check_mode(mode)).step(x, active)


def flow_step_batch(
    sheaf: NetworkSheaf, X, active: Iterable[int] | None = None, mode: str = PRIMAL
) -> np.ndarray:
    """Vectorized :func:`flow_step` over the rows of an ``(m, n)`` array."""
    check_mode(mode)
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != sheaf.n:
        raise ShapeMismatch(f"expected an (m, {sheaf.n}) array, got shape {X.shape}")
    active = frozenset(range(sheaf.n)) if active is None else _active_set(sheaf, active)
    T = sheaf.transfer_maps(mode)
    lats = sheaf.vertex_lattices
    agg = [L.meet_vec if mode == PRIMAL else L.join_vec for L in lats]
    Y = X.copy()
    for k, (u, v) in enumerate(sheaf.graph.edges):
        if v in active:
            Y[:, u] = agg[u](Y[:, u], T[k][0].apply_vec(X[:, v]))
        if u in active:
            Y[:, v] = agg[v](Y[:, v], T[k][1].apply_vec(X[:, u]))
    return Y


def all_assignments(sheaf: NetworkSheaf, cap: int = 10**6) -> np.ndarray:
    """Every assignment as rows of an array, in lexicographic order."""
    total = sheaf.state_space_size()
    if total > cap:
        raise StateSpaceTooLarge(f"state space has {total} assignments, cap is {cap}")
    sizes = [L.size for L in sheaf.vertex_lattices]
    if not sizes:
        return np.zeros((1, 0), dtype=np.int64)
    return np.indices(sizes).reshape(len(sizes), -1).T.astype(np.int64)


def fixed_points(sheaf: NetworkSheaf, mode: str = PRIMAL, cap: int = 10**6) -> list[tuple[int, ...]]:
    """Exhaustive fixed points of the synchronous flow step, lexicographically ordered."""
    X = all_assignments(sheaf, cap)
    Y = flow_step_batch(sheaf, X, None, mode)
    keep = (X == Y).all(axis=1)
    return [tuple(row) for row in X[keep].tolist()]


# -- metrics and energy ------------------------------------------------------


def jaccard_distance(L: FiniteLattice, a: int, b: int) -> Fraction:
    """``1 - |a & b| / |a | b|`` on a powerset lattice; 0 for two empty sets."""
    if not L.is_powerset:
        raise NotPowerset("Jaccard distance needs a powerset lattice")
    a, b = L.check(a), L.check(b)
    union = bin(a | b).count("1")
    if union == 0:
        return Fraction(0)
    return 1 - Fraction(bin(a & b).count("1"), union)


def discrete_distance(L: FiniteLattice, a: int, b: int) -> Fraction:
    return Fraction(int(L.check(a) != L.check(b)))


Metric = Callable[[FiniteLattice, int, int], Fraction]


def _resolve_metric(metric, L: FiniteLattice) -> Metric:
    if callable(metric):
        return metric
    if metric in (None, "auto"):
        return jaccard_distance if L.is_powerset else discrete_distance
    if metric == "jaccard":
        if not L.is_powerset:
            raise MetricUndefined("Jaccard metric requested on a non-powerset edge lattice")
        return jaccard_distance
    if metric == "discrete":
        return discrete_distance
    raise MetricUndefined(f"unknown metric {metric!r}")


def lyapunov_energy(
    sheaf: NetworkSheaf, x: Sequence[int], metric=None, mode: str = PRIMAL
) -> Fraction:
    """Sum over edges of the distance between the two pushed-forward values.

    ``metric`` is ``"auto"`` (Jaccard on powerset edges, discrete elsewhere),
    ``"jaccard"``, ``"discrete"`` or a callable ``(lattice, a, b)``.
    """
    x = sheaf.check_assignment(x)
    S = sheaf.structure_maps(mode)
    total = Fraction(0)
    for k, (u, v) in enumerate(sheaf.graph.edges):
        L = sheaf.edge_lattices[k]
        d = _resolve_metric(metric, L)
        total += d(L, S[k][0](x[u]), S[k][1](x[v]))
    return total


# -- runs ---------------------------------------------------------------------


@dataclass
class StepRecord:
    t: int
    fired: frozenset
    assignment: tuple[int, ...]
    energy: Fraction
    changed: int


@dataclass
class FlowTrace:
    initial: tuple[int, ...]
    initial_energy: Fraction
    mode: str
    status: FlowStatus = FlowStatus.STEP_CAP
    records: list[StepRecord] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.records)

    @property
    def final(self) -> tuple[int, ...]:
        return self.records[-1].assignment if self.records else self.initial

    @property
    def final_energy(self) -> Fraction:
        return self.records[-1].energy if self.records else self.initial_energy

    def energies(self) -> list[Fraction]:
        return [self.initial_energy] + [r.energy for r in self.records]


def default_step_cap(sheaf: NetworkSheaf) -> int:
    """``10 * n * (largest vertex-lattice height)``, at least 1."""
    h = max((L.height for L in sheaf.vertex_lattices), default=0)
    return max(1, 10 * sheaf.n * h)


def run_flow(
    sheaf: NetworkSheaf,
    firing: FiringSequence | Iterable[Iterable[int]],
    x0: Sequence[int],
    mode: str = PRIMAL,
    step_cap: int | None = None,
    metric=None,
) -> FlowTrace:
    """Iterate the flow until the state is a section or ``step_cap`` steps pass.

    An initial section terminates immediately with zero steps.
    """
    check_mode(mode)
    x = sheaf.check_assignment(x0)
    if step_cap is None:
        step_cap = default_step_cap(sheaf)
    if step_cap < 1:
        raise ValueError("step_cap must be >= 1")
    if isinstance(firing, FiringSequence) and firing.n != sheaf.n:
        raise ShapeMismatch(f"firing sequence is for {firing.n} vertices, sheaf has {sheaf.n}")
    op = _operator(sheaf, mode)
    trace = FlowTrace(initial=x, initial_energy=lyapunov_energy(sheaf, x, metric, mode), mode=mode)
    if is_section(sheaf, x, mode):
        trace.status = FlowStatus.CONVERGED
        return trace
    for t, active in enumerate(itertools.islice(iter(firing), step_cap)):
        active = frozenset(active)
        new = op.step(x, active)
        changed = sum(a != b for a, b in zip(x, new))
        x = new
        trace.records.append(StepRecord(t, active, x, lyapunov_energy(sheaf, x, metric, mode), changed))
        if changed and is_section(sheaf, x, mode):
            trace.status = FlowStatus.CONVERGED
            break
    return trace


__all__ = [
    "DUAL",
    "PRIMAL",
    "FiringSequence",
    "FlowStatus",
    "FlowTrace",
    "MetricUndefined",
    "NotPowerset",
    "StepRecord",
    "all_assignments",
    "default_step_cap",
    "discrete_distance",
    "fixed_points",
    "flow_step",
    "flow_step_batch",
    "jaccard_distance",
    "lyapunov_energy",
    "make_firing_sequence",
    "run_flow",
    "tarski_laplacian",
]
