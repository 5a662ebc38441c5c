"""
toeplitz-forge - exact construction of Toeplitz Z^d subshifts with a prescribed simplex of invariant measures

Public API:
    LatticeChain: Nested lattices with nested fundamental domains
    default_chain, chain_from_moduli, refine_chain: Chain builders
    verify_chain: Tiling, nesting and Følner certificates
    ManagedSequence: Index chain with matrices of fixed column sums
    select_indices, telescope, augment_sequence, split_factors: Sequence tools
    SimplexSpec: Target simplex (finite or stagewise)
    build_blocks, verify_conditions, evaluate_x0: Block families and their checks
    simplex_vertices, state_chain, ordered_group_witness: Invariants
    realize_simplex, z_to_zd, worked_example, verify_bundle: End-to-end drivers
    save_bundle, load_bundle, emit_window: Bundle files and windows
    ForgeSettings: Environment configuration
"""

__version__ = "0.1.0"

from .config import ForgeSettings, configure_logging
from .errors import ForgeError
from .reports import Check, Report
from .lattice import (
    Domain,
    LatticeChain,
    canonical_domain,
    chain_from_moduli,
    default_chain,
    refine_chain,
    verify_chain,
)
from .matrices import (
    ManagedSequence,
    augment,
    augment_sequence,
    check_fillability,
    select_indices,
    split_factors,
    telescope,
    verify_managed,
)
from .choquet import SimplexSpec, approx_in_Cr, finite_simplex_sequence, stochastic_to_managed
from .blocks import BlockFamily, build_blocks, evaluate_x0, recover_incidence, verify_conditions
from .invariants import (
    evaluate_state,
    ordered_group_witness,
    simplex_vertices,
    state_chain,
    vertex_spread,
)
from .pipeline import SystemBundle, realize_simplex, verify_bundle, worked_example, z_to_zd
from .io import emit_window, load_bundle, save_bundle

__all__ = [
    "ForgeSettings",
    "configure_logging",
    "ForgeError",
    "Check",
    "Report",
    "Domain",
    "LatticeChain",
    "canonical_domain",
    "chain_from_moduli",
    "default_chain",
    "refine_chain",
    "verify_chain",
    "ManagedSequence",
    "augment",
    "augment_sequence",
    "check_fillability",
    "select_indices",
    "split_factors",
    "telescope",
    "verify_managed",
    "SimplexSpec",
    "approx_in_Cr",
    "finite_simplex_sequence",
    "stochastic_to_managed",
    "BlockFamily",
    "build_blocks",
    "evaluate_x0",
    "recover_incidence",
    "verify_conditions",
    "evaluate_state",
    "ordered_group_witness",
    "simplex_vertices",
    "state_chain",
    "vertex_spread",
    "SystemBundle",
    "realize_simplex",
    "verify_bundle",
    "worked_example",
    "z_to_zd",
    "emit_window",
    "load_bundle",
    "save_bundle",
]
