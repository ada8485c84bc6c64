import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import helpers
from tarski.galois import (
    LatticeMap,
    NotJoinPreserving,
    ShapeMismatch,
    check_adjunction,
    compose,
    identity_map,
    is_join_preserving,
    pointwise_leq,
    random_join_preserving_map,
    residual,
    table_map,
)
from tarski.kripke import Relation, k_exists_map, k_forall
from tarski.lattice import chain_lattice, powerset_lattice

C2, C3 = chain_lattice(2), chain_lattice(3)
# chain(3) -> chain(2): 0 -> 0, 1 -> 1, 2 -> 1
PHI = table_map(C3, C2, [0, 1, 1])


@st.composite
def maps(draw, max_size=12):
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    P = helpers.random_lattice(rng, max_size)
    Q = helpers.random_lattice(rng, max_size)
    return random_join_preserving_map(P, Q, rng)


def test_identity_is_join_preserving():
    for L in (C3, helpers.pentagon(), powerset_lattice(3)):
        assert is_join_preserving(identity_map(L))


def test_constant_top_is_not():
    assert not is_join_preserving(table_map(C2, C2, [1, 1]))


def test_k_exists_is_join_preserving():
    rng = np.random.default_rng(3)
    for _ in range(20):
        rel = Relation.from_matrix(rng.random((4, 4)) < 0.4)
        assert is_join_preserving(k_exists_map(powerset_lattice(4), rel))


def test_non_join_preserving_detected_on_m3():
    M3 = helpers.diamond(3)
    # send two atoms to bottom and the third to top: a1 v a2 = top, but the images join to bottom
    m = table_map(M3, M3, [0, 0, 0, 4, 4])
    assert not m.is_join_preserving
    with pytest.raises(NotJoinPreserving):
        residual(m)


def test_residual_of_identity():
    L = helpers.pentagon()
    assert residual(identity_map(L), method="scan") == identity_map(L)


def test_chain_residual():
    plus = residual(PHI)
    assert list(plus.image_table) == [0, 2]
    assert check_adjunction(PHI, plus)


def test_adjunction_examples():
    assert check_adjunction(identity_map(C3), identity_map(C3))
    nonid = table_map(C3, C3, [0, 0, 2])
    assert nonid.is_join_preserving
    assert not check_adjunction(nonid, nonid)


def test_compose_examples():
    plus = residual(PHI)
    assert list(compose(plus, PHI).image_table) == [0, 2, 2]
    assert compose(identity_map(C2), PHI) == PHI
    with pytest.raises(ShapeMismatch):
        compose(PHI, PHI)


def test_injective_map_is_retract():
    emb = table_map(C2, C3, [0, 2])
    assert emb.is_injective
    plus = residual(emb)
    assert all(plus(emb(p)) == p for p in range(2))


def test_shape_checks():
    with pytest.raises(ShapeMismatch):
        table_map(C3, C2, [0, 1])
    with pytest.raises(ShapeMismatch):
        table_map(C3, C2, [0, 1, 2])
    with pytest.raises(ValueError):
        LatticeMap(C3, C2)


def test_large_powerset_residual_uses_atoms():
    L = powerset_lattice(20)
    rng = np.random.default_rng(5)
    rel = Relation.from_matrix(rng.random((20, 20)) < 0.2)
    m = k_exists_map(L, rel)
    assert not m.tabulated
    assert m.is_join_preserving
    plus = residual(m, method="scan")
    for q in rng.integers(0, 1 << 20, 50).tolist():
        assert plus(q) == k_forall(rel, q)


@given(maps())
def test_generator_yields_join_preserving(phi):
    P, Q = phi.source, phi.target
    assert phi(P.bottom) == Q.bottom
    for x, y in itertools.product(range(P.size), repeat=2):
        assert phi(P.join(x, y)) == Q.join(phi(x), phi(y))


@given(maps())
def test_residual_matches_scan_oracle(phi):
    assert list(residual(phi).image_table) == helpers.oracle_residual(phi)


@given(maps())
def test_unit_and_counit(phi):
    plus = residual(phi)
    assert pointwise_leq(identity_map(phi.source), compose(plus, phi))
    assert pointwise_leq(compose(phi, plus), identity_map(phi.target))
    assert check_adjunction(phi, plus)


@given(maps())
def test_residual_preserves_meets(phi):
    plus = residual(phi)
    P, Q = phi.source, phi.target
    assert plus(Q.top) == P.top
    for q, r in itertools.product(range(Q.size), repeat=2):
        assert plus(Q.meet(q, r)) == P.meet(plus(q), plus(r))


@given(maps())
def test_map_recovered_from_residual(phi):
    # phi(p) = meet{q : p <= phi+(q)}
    plus = residual(phi)
    P, Q = phi.source, phi.target
    for p in range(P.size):
        assert phi(p) == helpers.glb(Q, [q for q in range(Q.size) if P.leq(p, plus(q))])
