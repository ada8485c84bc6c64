"""Asynchronous diffusion of lattice-valued data over networks.

Sheaves of finite lattices on graphs, the asynchronous Tarski Laplacian and
its heat flow, Kripke-semantic sheaves, and brute-force oracles for checking
that the flow's fixed points are exactly the sections.
"""
from .dynamics import (
    FiringSequence,
    FlowStatus,
    FlowTrace,
    default_step_cap,
    fixed_points,
    flow_step,
    jaccard_distance,
    lyapunov_energy,
    make_firing_sequence,
    run_flow,
    tarski_laplacian,
)
from .formula import And, Atom, K, Not, Or, P, parse_formula, to_text
from .galois import LatticeMap, check_adjunction, compose, identity_map, is_join_preserving, residual
from .kripke import (
    KripkeModel,
    check_frame_axioms,
    intent,
    k_exists,
    k_forall,
    random_model,
    semantic_sheaf,
    semantically_equivalent,
    syntactic_step,
    threat_model,
)
from .lattice import (
    FiniteLattice,
    chain_lattice,
    lattice_from_covers,
    powerset_lattice,
    product_lattice,
    validate_lattice,
)
from .sheaf import Graph, NetworkSheaf, build_sheaf, constant_sheaf, enumerate_sections, is_section

__version__ = "0.1.0"
