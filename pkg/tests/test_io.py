import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import helpers
from tarski import io
from tarski.kripke import random_model
from tarski.sheaf import Graph, enumerate_sections


@given(st.integers(0, 2**32 - 1))
def test_sheaf_description_round_trip(seed):
    rng = np.random.default_rng(seed)
    s = helpers.random_sheaf(rng, max_vertices=4, state_cap=3000)
    again = io.sheaf_from_description(io.sheaf_to_description(s))
    assert again.graph == s.graph
    assert enumerate_sections(again) == enumerate_sections(s)
    for a, b in zip(again.up_maps, s.up_maps):
        assert [list(m.image_table) for m in a] == [list(m.image_table) for m in b]


def test_model_round_trip():
    m = random_model(3, 6, n_atoms=2, seed=1)
    again = io.model_from_description(io.model_to_description(m))
    assert [r.successors for r in again.relations] == [r.successors for r in m.relations]
    assert again.valuation == m.valuation


def test_file_kind():
    assert io.file_kind({"kind": "chain", "length": 2}) == "lattice"
    assert io.file_kind({"graph": {}}) == "sheaf"
    assert io.file_kind({"states": 2}) == "model"
    with pytest.raises(io.FileFormatError):
        io.file_kind([1, 2])


def test_sheaf_file_errors():
    with pytest.raises(io.FileFormatError):
        io.sheaf_from_description({"graph": {"n": 2, "edges": [[0, 1]]}, "vertex_lattices": []})
    doc = {
        "graph": {"n": 1, "edges": [[0, 0]]},
        "vertex_lattices": [{"kind": "chain", "length": 2}],
        "edge_lattices": [{"kind": "chain", "length": 2}],
        "maps": [{"vertex": 0, "edge": [0, 0], "side": "a", "map": {"type": "identity"}}],
    }
    with pytest.raises(io.FileFormatError):
        io.sheaf_from_description(doc)


def test_edge_list(tmp_path):
    g = Graph(5, [(0, 1), (3, 4)])
    p = tmp_path / "g.txt"
    p.write_text(io.format_edge_list(g))
    assert io.read_edge_list(p) == g
    p.write_text("3\n0 x\n")
    with pytest.raises(io.FileFormatError, match="line 2"):
        io.read_edge_list(p)
