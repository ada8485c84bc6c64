"""Kripke models, modal intents and the semantic sheaf.

Subsets of states are Python ints used as bitmasks (bit ``s`` marks state
``s``), the same canonical encoding as :class:`~tarski.lattice.PowersetLattice`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import prod
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dynamics import FiringSequence, FlowStatus
from .formula import (
    FALSE,
    TRUE,
    And,
    Atom,
    Formula,
    Implies,
    K,
    Not,
    Or,
    P,
    Top,
    conjunction,
    disjunction,
    subformulas,
)
from .galois import LatticeMap
from .lattice import MAX_GROUND, PowersetLattice, powerset_lattice
from .sheaf import DUAL, PRIMAL, Graph, NetworkSheaf, StateSpaceTooLarge, build_sheaf, check_mode, is_section

THREAT_STATE_LIMIT = 10**5


class ModelError(ValueError):
    pass


class Relation:
    """A binary relation on ``range(n)`` stored as successor bitmasks."""

    def __init__(self, n: int, successors: Sequence[int]):
        if len(successors) != n:
            raise ModelError(f"relation needs {n} successor sets, got {len(successors)}")
        self.n = n
        self.successors = list(int(s) for s in successors)

    @classmethod
    def from_matrix(cls, matrix) -> "Relation":
        m = np.asarray(matrix, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ModelError(f"relation table must be square, got shape {m.shape}")
        n = m.shape[0]
        return cls(n, [sum(1 << int(t) for t in np.flatnonzero(row)) for row in m])

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Sequence[int]]) -> "Relation":
        succ = [0] * n
        for pair in pairs:
            s, t = (int(v) for v in pair)
            if not (0 <= s < n and 0 <= t < n):
                raise ModelError(f"pair ({s}, {t}) references a state outside 0..{n - 1}")
            succ[s] |= 1 << t
        return cls(n, succ)

    @classmethod
    def identity(cls, n: int) -> "Relation":
        return cls(n, [1 << s for s in range(n)])

    def matrix(self) -> np.ndarray:
        return np.array([[bool(self.successors[s] >> t & 1) for t in range(self.n)] for s in range(self.n)])

    def pairs(self) -> list[tuple[int, int]]:
        return [(s, t) for s in range(self.n) for t in _bits(self.successors[s])]

    def __contains__(self, pair) -> bool:
        s, t = pair
        return bool(self.successors[s] >> t & 1)

    def __eq__(self, other):
        return isinstance(other, Relation) and self.successors == other.successors

    def __repr__(self):
        return f"Relation(n={self.n}, pairs={sum(bin(s).count('1') for s in self.successors)})"


def _bits(mask: int):
    s = 0
    while mask:
        if mask & 1:
            yield s
        mask >>= 1
        s += 1


def _as_relation(relation) -> Relation:
    return relation if isinstance(relation, Relation) else Relation.from_matrix(relation)


def k_exists(relation, sigma: int) -> int:
    """States reachable in one step from some state of ``sigma``.

    This is the image of ``sigma``, left adjoint to :func:`k_forall`; it is
    also the meaning of ``P<i>``.
    """
    succ = _as_relation(relation).successors
    out = 0
    for s in _bits(sigma):
        out |= succ[s]
    return out


def k_forall(relation, sigma: int) -> int:
    """States all of whose successors lie in ``sigma``."""
    succ = _as_relation(relation).successors
    out = 0
    for s, t in enumerate(succ):
        if t & ~sigma == 0:
            out |= 1 << s
    return out


def _k_exists_vec(succ: Sequence[int]):
    succ_a = np.array(succ, dtype=np.int64)

    def f(xs):
        xs = np.asarray(xs, dtype=np.int64)
        out = np.zeros_like(xs)
        for s, t in enumerate(succ_a):
            out |= np.where(((xs >> s) & 1) == 1, t, 0)
        return out

    return f


def _k_forall_vec(succ: Sequence[int]):
    succ_a = np.array(succ, dtype=np.int64)

    def f(xs):
        xs = np.asarray(xs, dtype=np.int64)
        out = np.zeros_like(xs)
        for s, t in enumerate(succ_a):
            out |= ((t & ~xs) == 0).astype(np.int64) << s
        return out

    return f


def k_exists_map(L: PowersetLattice, relation, name: str = "") -> LatticeMap:
    """``K^exists`` as a lattice map on ``L``, carrying ``K^forall`` as its residual."""
    rel = _as_relation(relation)
    if not L.is_powerset or L.ground != rel.n:
        raise ModelError(f"relation on {rel.n} states needs the powerset lattice of that size")
    fwd = LatticeMap(L, L, func=lambda x: k_exists(rel, x), vfunc=_k_exists_vec(rel.successors),
                     name=f"{name}E" if name else "")
    back = LatticeMap(L, L, func=lambda x: k_forall(rel, x), vfunc=_k_forall_vec(rel.successors),
                      name=f"{name}A" if name else "")
    fwd.known_residual = back
    return fwd


class KripkeModel:
    """States ``0..n_states-1``, one relation per agent and a valuation.

    ``valuation[s]`` is a bitmask over ``atoms`` (bit ``k`` for ``atoms[k]``).
    """

    def __init__(
        self,
        n_states: int,
        relations: Sequence,
        atoms: Sequence[str] = (),
        valuation: Sequence | None = None,
    ):
        self.n_states = int(n_states)
        if self.n_states < 1:
            raise ModelError("a model needs at least one state")
        self.relations = [_as_relation(r) for r in relations]
        for i, r in enumerate(self.relations):
            if r.n != self.n_states:
                raise ModelError(f"relation {i} is on {r.n} states, model has {self.n_states}")
        self.atoms = list(atoms)
        if len(set(self.atoms)) != len(self.atoms):
            raise ModelError("atom names must be distinct")
        self._atom_index = {a: k for k, a in enumerate(self.atoms)}
        if valuation is None:
            valuation = [0] * self.n_states
        if len(valuation) != self.n_states:
            raise ModelError(f"valuation covers {len(valuation)} states, model has {self.n_states}")
        self.valuation = [self._encode_props(v) for v in valuation]
        self._atom_intent = [
            sum(1 << s for s, v in enumerate(self.valuation) if v >> k & 1) for k in range(len(self.atoms))
        ]

    def _encode_props(self, props) -> int:
        if isinstance(props, (int, np.integer)):
            if props < 0 or props >> len(self.atoms):
                raise ModelError(f"valuation mask {props} exceeds the {len(self.atoms)} atoms")
            return int(props)
        mask = 0
        for p in props:
            if isinstance(p, str):
                if p not in self._atom_index:
                    raise ModelError(f"unknown atom {p!r}")
                mask |= 1 << self._atom_index[p]
            else:
                p = int(p)
                if not 0 <= p < len(self.atoms):
                    raise ModelError(f"atom index {p} out of range")
                mask |= 1 << p
        return mask

    @property
    def n_agents(self) -> int:
        return len(self.relations)

    @property
    def all_states(self) -> int:
        return (1 << self.n_states) - 1

    def props_at(self, s: int) -> set[str]:
        return {a for k, a in enumerate(self.atoms) if self.valuation[s] >> k & 1}

    def atom_intent(self, name: str) -> int:
        try:
            return self._atom_intent[self._atom_index[name]]
        except KeyError:
            raise ModelError(f"unknown atom {name!r}") from None

    def relation(self, agent: int) -> Relation:
        if not 0 <= agent < self.n_agents:
            raise ModelError(f"agent {agent} out of range 0..{self.n_agents - 1}")
        return self.relations[agent]

    def __repr__(self):
        return f"KripkeModel(states={self.n_states}, agents={self.n_agents}, atoms={len(self.atoms)})"


def intent(model: KripkeModel, phi: Formula) -> int:
    """The set of states satisfying ``phi``, as a bitmask.

    Evaluated bottom-up without recursion; shared subtrees are evaluated
    once, which keeps iterated syntactic flows linear in their DAG size.
    """
    full = model.all_states
    memo: dict[int, int] = {}
    stack = [(phi, False)]
    while stack:
        node, ready = stack.pop()
        if id(node) in memo:
            continue
        kids = subformulas(node)
        if kids and not ready:
            stack.append((node, True))
            stack.extend((c, False) for c in kids if id(c) not in memo)
            continue
        if isinstance(node, Top):
            val = full
        elif isinstance(node, Atom):
            val = model.atom_intent(node.name)
        elif isinstance(node, Not):
            val = full & ~memo[id(node.arg)]
        elif isinstance(node, And):
            val = memo[id(node.left)] & memo[id(node.right)]
        elif isinstance(node, K):
            val = k_forall(model.relation(node.agent), memo[id(node.arg)])
        elif isinstance(node, P):
            val = k_exists(model.relation(node.agent), memo[id(node.arg)])
        else:
            raise TypeError(f"not a formula: {node!r}")
        memo[id(node)] = val
    return memo[id(phi)]


def satisfies(model: KripkeModel, state: int, phi: Formula) -> bool:
    return bool(intent(model, phi) >> state & 1)


def semantically_equivalent(model: KripkeModel, phi: Formula, psi: Formula) -> bool:
    return intent(model, phi) == intent(model, psi)


def valid(model: KripkeModel, phi: Formula) -> bool:
    return intent(model, phi) == model.all_states


# -- sheaves and flows ----------------------------------------------------------


def semantic_sheaf(graph: Graph, model: KripkeModel) -> NetworkSheaf:
    """Powerset-of-states data everywhere, with ``K_i^exists`` out of vertex ``i``."""
    if graph.n != model.n_agents:
        raise ModelError(f"graph has {graph.n} vertices but the model has {model.n_agents} agents")
    if model.n_states > MAX_GROUND:
        raise StateSpaceTooLarge(f"semantic sheaves support at most {MAX_GROUND} states")
    L = powerset_lattice(model.n_states)
    ups = [k_exists_map(L, r, name=f"K{i}") for i, r in enumerate(model.relations)]
    maps = {}
    for i, j in graph.edges:
        maps[(i, (i, j))] = ups[i]
        maps[(j, (i, j))] = ups[j]
    return build_sheaf(graph, [L] * graph.n, [L] * len(graph.edges), maps)


def syntactic_step(
    model: KripkeModel,
    graph: Graph,
    formulas: Sequence[Formula],
    active: Iterable[int] | None = None,
    mode: str = PRIMAL,
) -> list[Formula]:
    """One heat-flow step carried out on formulas instead of state sets.

    Primal: ``phi_i & K<i> P<j> phi_j`` over active neighbours ``j``;
    dual: ``phi_i | P<i> K<j> phi_j``.  Trees are not simplified.
    """
    check_mode(mode)
    if len(formulas) != graph.n:
        raise ValueError(f"{len(formulas)} formulas for {graph.n} vertices")
    active = set(range(graph.n)) if active is None else set(active)
    out = []
    for i, phi in enumerate(formulas):
        nbrs = [j for j in graph.neighbors[i] if j in active]
        if not nbrs:
            out.append(phi)
        elif mode == PRIMAL:
            out.append(And(phi, conjunction(K(i, P(j, formulas[j])) for j in nbrs)))
        else:
            out.append(Or(phi, disjunction(P(i, K(j, formulas[j])) for j in nbrs)))
    return out


@dataclass
class SyntacticRun:
    formulas: list[Formula]
    intents: tuple[int, ...]
    steps: int
    status: FlowStatus


def run_syntactic_flow(
    model: KripkeModel,
    graph: Graph,
    formulas: Sequence[Formula],
    firing: FiringSequence | Iterable[Iterable[int]],
    mode: str = PRIMAL,
    step_cap: int = 1000,
) -> SyntacticRun:
    """Iterate :func:`syntactic_step` until the intents form a section."""
    sheaf = semantic_sheaf(graph, model)
    phis = list(formulas)
    sig = tuple(intent(model, f) for f in phis)
    if is_section(sheaf, sig, mode):
        return SyntacticRun(phis, sig, 0, FlowStatus.CONVERGED)
    steps = 0
    for active in itertools.islice(iter(firing), step_cap):
        phis = syntactic_step(model, graph, phis, active, mode)
        steps += 1
        sig = tuple(intent(model, f) for f in phis)
        if is_section(sheaf, sig, mode):
            return SyntacticRun(phis, sig, steps, FlowStatus.CONVERGED)
    return SyntacticRun(phis, sig, steps, FlowStatus.STEP_CAP)


def possibility_consensus(model: KripkeModel, graph: Graph, sigma: Sequence[int]) -> bool:
    """``K_i^exists(sigma_i) == K_j^exists(sigma_j)`` on every edge."""
    return all(k_exists(model.relations[i], sigma[i]) == k_exists(model.relations[j], sigma[j])
               for i, j in graph.edges)


def knowledge_consensus(model: KripkeModel, graph: Graph, sigma: Sequence[int]) -> bool:
    """``K_i^forall(sigma_i) == K_j^forall(sigma_j)`` on every edge."""
    return all(k_forall(model.relations[i], sigma[i]) == k_forall(model.relations[j], sigma[j])
               for i, j in graph.edges)


# -- frame axioms ----------------------------------------------------------------


@dataclass
class AxiomResult:
    holds: bool
    state: int | None = None
    formula: Formula | None = None


@dataclass
class FrameReport:
    agent: int
    reflexive: bool
    symmetric: bool
    transitive: bool
    serial: bool
    knowledge: AxiomResult
    introspection: AxiomResult
    consistency: AxiomResult
    samples: int = 0

    def __str__(self):
        lines = [f"agent {self.agent}: reflexive={self.reflexive} symmetric={self.symmetric} "
                 f"transitive={self.transitive} serial={self.serial}"]
        for name in ("knowledge", "introspection", "consistency"):
            r = getattr(self, name)
            detail = "" if r.holds else f" (fails at state {r.state})"
            lines.append(f"  {name}: {'holds' if r.holds else 'FAILS'}{detail}")
        return "\n".join(lines)


def _first_state(mask: int) -> int | None:
    return None if mask == 0 else (mask & -mask).bit_length() - 1


def check_frame_axioms(model: KripkeModel, agent: int, sample: int = 50, seed: int = 0) -> FrameReport:
    """Relational properties of ``K_agent`` plus semantic spot checks.

    Knowledge and introspection are evaluated on ``sample`` random formulas
    (and a few fixed ones); consistency needs no sampling.
    """
    rel = model.relation(agent)
    succ = rel.successors
    n = model.n_states
    reflexive = all(succ[s] >> s & 1 for s in range(n))
    symmetric = all(succ[t] >> s & 1 for s in range(n) for t in _bits(succ[s]))
    transitive = all(succ[t] & ~succ[s] == 0 for s in range(n) for t in _bits(succ[s]))
    serial = all(succ[s] != 0 for s in range(n))

    rng = np.random.default_rng(seed)
    probes = [TRUE, FALSE] + [Atom(a) for a in model.atoms]
    probes += [random_formula(model, int(rng.integers(0, 4)), rng) for _ in range(sample)]
    full = model.all_states

    def scan(build) -> AxiomResult:
        for phi in probes:
            bad = full & ~intent(model, build(phi))
            if bad:
                return AxiomResult(False, _first_state(bad), phi)
        return AxiomResult(True)

    knowledge = scan(lambda f: Implies(K(agent, f), f))
    introspection = scan(lambda f: Implies(K(agent, f), K(agent, K(agent, f))))
    bad = full & ~intent(model, Not(K(agent, FALSE)))
    consistency = AxiomResult(bad == 0, _first_state(bad), None if bad == 0 else FALSE)
    return FrameReport(agent, reflexive, symmetric, transitive, serial,
                       knowledge, introspection, consistency, samples=len(probes))


# -- generators ----------------------------------------------------------------


def random_formula(model: KripkeModel, depth: int, rng: np.random.Generator) -> Formula:
    """A random formula of depth at most ``depth`` over the model's atoms and agents."""
    leaves = [TRUE] + [Atom(a) for a in model.atoms]
    if depth <= 0 or rng.random() < 0.15:
        return leaves[int(rng.integers(len(leaves)))]
    pick = int(rng.integers(4))
    if pick == 0:
        return Not(random_formula(model, depth - 1, rng))
    if pick == 1:
        return And(random_formula(model, depth - 1, rng), random_formula(model, depth - 1, rng))
    agent = int(rng.integers(model.n_agents)) if model.n_agents else None
    if agent is None:
        return Not(random_formula(model, depth - 1, rng))
    ctor = K if pick == 2 else P
    return ctor(agent, random_formula(model, depth - 1, rng))


def random_model(
    n_agents: int,
    n_states: int,
    p_diag: float = 0.9,
    p_off: float = 0.1,
    n_atoms: int = 0,
    seed: int | None = None,
) -> KripkeModel:
    """Each pair ``(x, y)`` joins ``K_i`` with probability ``p_diag`` if ``x == y``
    else ``p_off``; each atom holds at each state with probability 1/2."""
    for p in (p_diag, p_off):
        if not 0 <= p <= 1:
            raise ValueError(f"probabilities must lie in [0, 1], got {p}")
    if n_agents < 0 or n_states < 1 or n_atoms < 0:
        raise ValueError("need n_agents >= 0, n_states >= 1, n_atoms >= 0")
    rng = np.random.default_rng(seed)
    probs = np.where(np.eye(n_states, dtype=bool), p_diag, p_off)
    relations = [rng.random((n_states, n_states)) < probs for _ in range(n_agents)]
    atoms = [f"A{k + 1}" for k in range(n_atoms)]
    draws = rng.random((n_states, n_atoms)) < 0.5
    valuation = [int(sum(1 << k for k in np.flatnonzero(row))) for row in draws]
    return KripkeModel(n_states, relations, atoms, valuation)


def encode_state(local_sizes: Sequence[int], local: Sequence[int]) -> int:
    """Mixed-radix index of a global state; vertex 0 is most significant."""
    s = 0
    for size, v in zip(local_sizes, local):
        if not 0 <= v < size:
            raise ModelError(f"local state {v} out of range for a sensor with {size} states")
        s = s * size + int(v)
    return s


def decode_state(local_sizes: Sequence[int], s: int) -> tuple[int, ...]:
    out = []
    for size in reversed(local_sizes):
        s, r = divmod(s, size)
        out.append(r)
    return tuple(reversed(out))


def threat_model(
    local_sizes: Sequence[int],
    valuation: Mapping[tuple, Iterable[str]] | Callable[[tuple], Iterable[str]] | None = None,
    atoms: Sequence[str] | None = None,
) -> KripkeModel:
    """Sensors that know exactly their own local state.

    Global states are tuples of local states; ``K_i`` relates two global
    states when sensor ``i`` sees the same local state in both.
    """
    local_sizes = [int(v) for v in local_sizes]
    if any(v < 1 for v in local_sizes):
        raise ModelError("every sensor needs at least one local state")
    total = prod(local_sizes)
    if total > THREAT_STATE_LIMIT:
        raise StateSpaceTooLarge(f"{total} global states exceed the limit {THREAT_STATE_LIMIT}")
    states = [decode_state(local_sizes, s) for s in range(total)]
    relations = []
    for i, size in enumerate(local_sizes):
        classes = [0] * size
        for s, g in enumerate(states):
            classes[g[i]] |= 1 << s
        relations.append(Relation(total, [classes[g[i]] for g in states]))

    if valuation is None:
        props = [()] * total
    elif callable(valuation):
        props = [tuple(valuation(g)) for g in states]
    else:
        props = [()] * total
        for key, value in valuation.items():
            g = tuple(key) if not isinstance(key, int) else decode_state(local_sizes, key)
            props[encode_state(local_sizes, g)] = tuple(value)
    if atoms is None:
        atoms = sorted({a for p in props for a in p})
    return KripkeModel(total, relations, atoms, props)
