from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import helpers
from tarski.dynamics import (
    FlowStatus,
    MetricUndefined,
    NotPowerset,
    all_assignments,
    default_step_cap,
    fixed_points,
    flow_step,
    flow_step_batch,
    jaccard_distance,
    lyapunov_energy,
    make_firing_sequence,
    run_flow,
    tarski_laplacian,
)
from tarski.lattice import chain_lattice, powerset_lattice
from tarski.sheaf import Graph, build_sheaf, constant_sheaf, enumerate_sections, is_section

seeds = st.integers(0, 2**32 - 1)
C4 = chain_lattice(4)
EDGE = constant_sheaf(Graph.path(2), C4)


def _leq_all(sheaf, x, y):
    return all(L.leq(a, b) for L, a, b in zip(sheaf.vertex_lattices, x, y))


def test_firing_examples():
    assert make_firing_sequence("all_fire", 3).take(3) == [frozenset({0, 1, 2})] * 3
    assert make_firing_sequence("round_robin", 3).take(4) == [{0}, {1}, {2}, {0}]
    a = make_firing_sequence("bernoulli", 6, p=0.5, seed=9)
    b = make_firing_sequence("bernoulli", 6, p=0.5, seed=9)
    assert a.take(50) == b.take(50)
    assert a.take(50) == a.take(50)
    assert a.take(50) != make_firing_sequence("bernoulli", 6, p=0.5, seed=10).take(50)


def test_firing_validation():
    with pytest.raises(ValueError):
        make_firing_sequence("bernoulli", 3, p=0, seed=1)
    with pytest.raises(ValueError):
        make_firing_sequence("bernoulli", 3, p=0.5)
    with pytest.raises(ValueError):
        make_firing_sequence("explicit", 2, schedule=[[0, 2]])
    assert make_firing_sequence("explicit", 3, schedule=[[0], [1, 2]]).live
    assert not make_firing_sequence("explicit", 3, schedule=[[0], [1]]).live
    assert make_firing_sequence("bernoulli", 3, p=0.5, seed=1).live is None


def test_empty_active_set_gives_top():
    assert tarski_laplacian(EDGE, (1, 2), active=[]) == (3, 3)
    assert flow_step(EDGE, (1, 2), active=[]) == (1, 2)


def test_one_active_neighbour():
    assert tarski_laplacian(EDGE, (1, 2), active=[1]) == (2, 3)


def test_synchronous_step_on_edge():
    assert flow_step(EDGE, (1, 2)) == (1, 1)


def test_dual_step_on_edge():
    assert flow_step(EDGE, (1, 2), mode="dual") == (2, 2)
    assert tarski_laplacian(EDGE, (1, 2), active=[], mode="dual") == (0, 0)


def test_initial_section_returns_immediately():
    trace = run_flow(EDGE, make_firing_sequence("round_robin", 2), (2, 2))
    assert trace.status is FlowStatus.CONVERGED
    assert trace.steps == 0 and trace.final == (2, 2)
    assert trace.final_energy == 0


def test_round_robin_consensus_is_meet():
    s = constant_sheaf(Graph.path(4), C4)
    trace = run_flow(s, make_firing_sequence("round_robin", 4), (3, 2, 1, 3))
    assert trace.status is FlowStatus.CONVERGED
    assert trace.final == (1, 1, 1, 1)


def test_step_cap_reached():
    s = constant_sheaf(Graph.path(3), chain_lattice(3))
    trace = run_flow(s, make_firing_sequence("all_fire", 3), (2, 2, 0), step_cap=1)
    assert trace.status is FlowStatus.STEP_CAP
    assert trace.final == (2, 0, 0)
    assert not is_section(s, trace.final)


def test_dead_firing_never_converges():
    # only vertex 0 ever broadcasts, and vertex 1 already sits below it
    trace = run_flow(EDGE, make_firing_sequence("explicit", 2, schedule=[[0]]), (2, 1), step_cap=20)
    assert trace.status is FlowStatus.STEP_CAP and trace.final == (2, 1)
    assert trace.steps == 20


def test_default_step_cap():
    assert default_step_cap(EDGE) == 10 * 2 * 3


def test_jaccard_examples():
    P = powerset_lattice(4)
    assert jaccard_distance(P, 0b0110, 0b1100) == Fraction(2, 3)
    assert jaccard_distance(P, 0b0101, 0b0101) == 0
    assert jaccard_distance(P, 0, 0b0010) == 1
    with pytest.raises(NotPowerset):
        jaccard_distance(C4, 0, 1)


def test_energy_examples():
    s = constant_sheaf(Graph.path(2), powerset_lattice(2))
    assert lyapunov_energy(s, (0b01, 0b10)) == 1
    assert lyapunov_energy(s, (0b11, 0b11)) == 0
    empty = build_sheaf(Graph(2, []), [C4, C4], [], {})
    assert lyapunov_energy(empty, (0, 3)) == 0
    assert lyapunov_energy(EDGE, (0, 3)) == 1
    with pytest.raises(MetricUndefined):
        lyapunov_energy(EDGE, (0, 3), metric="jaccard")
    assert lyapunov_energy(EDGE, (0, 3), metric=lambda L, a, b: Fraction(abs(a - b))) == 3


def test_energy_is_additive_over_components():
    P = powerset_lattice(3)
    a = constant_sheaf(Graph.path(2), P)
    both = constant_sheaf(Graph(4, [(0, 1), (2, 3)]), P)
    x, y = (0b001, 0b011), (0b110, 0b100)
    assert lyapunov_energy(both, x + y) == lyapunov_energy(a, x) + lyapunov_energy(a, y)


@given(seeds)
def test_energy_is_symmetric_in_orientation(seed):
    rng = np.random.default_rng(seed)
    s = helpers.random_sheaf(rng, max_vertices=4, state_cap=5000, loops=False,
                             edge_lattice=lambda r: powerset_lattice(int(r.integers(1, 4))))
    n = s.n
    g2 = Graph(n, [(n - 1 - u, n - 1 - v) for u, v in s.graph.edges])
    maps = {}
    for k, (u, v) in enumerate(s.graph.edges):
        e = (n - 1 - u, n - 1 - v)
        maps[(e[0], e)], maps[(e[1], e)] = s.up_maps[k]
    s2 = build_sheaf(g2, s.vertex_lattices[::-1], {(n - 1 - u, n - 1 - v): s.edge_lattices[k]
                                                  for k, (u, v) in enumerate(s.graph.edges)}, maps)
    for _ in range(20):
        x = helpers.random_assignment(s, rng)
        assert lyapunov_energy(s, x) == lyapunov_energy(s2, x[::-1])


@given(seeds, st.booleans())
def test_synchronous_operator_matches_direct_evaluation(seed, dual):
    rng = np.random.default_rng(seed)
    make = helpers.random_dual_sheaf if dual else helpers.random_sheaf
    s = make(rng, max_vertices=4, max_lattice=6, state_cap=5000)
    mode = "dual" if dual else "primal"
    for _ in range(10):
        x = helpers.random_assignment(s, rng)
        active = {v for v in range(s.n) if rng.random() < 0.6}
        assert list(tarski_laplacian(s, x, None, mode)) == helpers.oracle_laplacian(s, x, set(range(s.n)), dual)
        assert list(tarski_laplacian(s, x, active, mode)) == helpers.oracle_laplacian(s, x, active, dual)
        assert flow_step(s, x, active, mode) == helpers.oracle_step(s, x, active, dual)


@given(seeds, st.booleans())
def test_batch_step_matches_scalar(seed, dual):
    rng = np.random.default_rng(seed)
    make = helpers.random_dual_sheaf if dual else helpers.random_sheaf
    s = make(rng, max_vertices=4, state_cap=3000)
    mode = "dual" if dual else "primal"
    X = all_assignments(s)
    active = [v for v in range(s.n) if rng.random() < 0.5]
    Y = flow_step_batch(s, X, active, mode)
    for x, y in zip(X.tolist(), Y.tolist()):
        assert flow_step(s, x, active, mode) == tuple(y)


@given(seeds)
def test_step_is_monotone(seed):
    rng = np.random.default_rng(seed)
    s = helpers.random_sheaf(rng, max_vertices=5)
    d = helpers.random_dual_sheaf(rng, max_vertices=5)
    for _ in range(20):
        active = [v for v in range(s.n) if rng.random() < 0.5]
        x = helpers.random_assignment(s, rng)
        assert _leq_all(s, flow_step(s, x, active), x)
        active = [v for v in range(d.n) if rng.random() < 0.5]
        x = helpers.random_assignment(d, rng)
        assert _leq_all(d, x, flow_step(d, x, active, "dual"))


@given(seeds)
def test_sections_are_fixed_under_any_firing(seed):
    rng = np.random.default_rng(seed)
    s = helpers.random_sheaf(rng, max_vertices=4, state_cap=5000)
    for x in enumerate_sections(s):
        active = [v for v in range(s.n) if rng.random() < 0.5]
        assert flow_step(s, x, active) == x
        assert _leq_all(s, x, tarski_laplacian(s, x, active))


@given(seeds)
def test_fixed_points_are_sections(seed):
    rng = np.random.default_rng(seed)
    s = helpers.random_sheaf(rng, max_vertices=4, state_cap=5000)
    assert fixed_points(s) == helpers.oracle_sections(s)


@given(seeds, st.sampled_from(["round_robin", "all_fire", "bernoulli", "explicit"]))
def test_live_runs_end_in_sections(seed, kind):
    rng = np.random.default_rng(seed)
    s = helpers.random_sheaf(rng, max_vertices=5)
    if kind == "explicit":
        order = rng.permutation(s.n).tolist()
        firing = make_firing_sequence(kind, s.n, schedule=[order[: s.n // 2], order[s.n // 2:]])
    else:
        firing = make_firing_sequence(kind, s.n, p=0.5, seed=seed)
    x0 = helpers.random_assignment(s, rng)
    trace = run_flow(s, firing, x0)
    assert trace.status is FlowStatus.CONVERGED
    assert is_section(s, trace.final)
    strict = sum(r.changed > 0 for r in trace.records)
    assert strict <= sum(L.height for L in s.vertex_lattices)


@given(seeds)
def test_dual_runs_rise_to_sections(seed):
    rng = np.random.default_rng(seed)
    s = helpers.random_dual_sheaf(rng, max_vertices=5)
    x0 = helpers.random_assignment(s, rng)
    trace = run_flow(s, make_firing_sequence("round_robin", s.n), x0, mode="dual")
    assert trace.status is FlowStatus.CONVERGED
    assert is_section(s, trace.final, "dual")
    prev = x0
    for rec in trace.records:
        assert _leq_all(s, prev, rec.assignment)
        prev = rec.assignment
