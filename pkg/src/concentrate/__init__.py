"""Exact simulation and verification of pure-state entanglement concentration."""

from .analytics import (
    ConservationReport,
    YieldCurve,
    conclusive_prob_chi,
    conservation_check,
    optimal_fraction,
    residual_schmidt,
    yield_series,
)
from .core import (
    BellKind,
    SchmidtPair,
    SchmidtReport,
    StateVector,
    apply_cnot,
    fidelity,
    make_cat_state,
    make_pair_state,
    schmidt_decompose_pair,
    single_pair_entanglement,
    tensor,
)
from .harness import CampaignConfig, EnsembleReport, emit_report, run_campaign, run_exact
from .measurement import (
    MeasurementRecord,
    Povm,
    apply_povm,
    build_chi_povm,
    build_idp_povm,
    incomplete_bell_measure,
    measure_subspace_parity,
    measure_z,
)
from .protocols import (
    OutcomeKind,
    ProtocolOutcome,
    RoundSummary,
    entanglement_assisted_single,
    enumerate_branches,
    multipartite_concentrate,
    proposal1_iterate,
    proposal1_single,
    proposal2_single,
)

__version__ = "0.1.0"
