"""Two-party protocol tooling: IR, simulation, standard form, dilution."""

from .ir import (
    AddAncilla,
    ApplyUnitary,
    Discard,
    Measure,
    ProtocolIR,
    Send,
    SimBranch,
    SimulationResult,
    compare_ensembles,
    embed_operator,
    group_by_message,
    random_toy_ir,
    simulate_dense,
)
from .protocols import BlockShiftFamily, build_block_dilution, build_shift_dilution
from .runner import (
    ConcentrationEntry,
    ConcentrationResult,
    OutcomeState,
    ProtocolRunReport,
    TheoremChainCertificate,
    concentrate,
    lift_success_probability,
    run_protocol,
    run_protocol_dense,
    verify_theorem_chain,
)
from .standard import (
    DiagonalKraus,
    StandardFormProtocol,
    run_standard_form,
    standardize,
)

__all__ = [
    "AddAncilla",
    "ApplyUnitary",
    "BlockShiftFamily",
    "ConcentrationEntry",
    "ConcentrationResult",
    "DiagonalKraus",
    "Discard",
    "Measure",
    "OutcomeState",
    "ProtocolIR",
    "ProtocolRunReport",
    "Send",
    "SimBranch",
    "SimulationResult",
    "StandardFormProtocol",
    "TheoremChainCertificate",
    "build_block_dilution",
    "build_shift_dilution",
    "compare_ensembles",
    "concentrate",
    "embed_operator",
    "group_by_message",
    "lift_success_probability",
    "random_toy_ir",
    "run_protocol",
    "run_protocol_dense",
    "run_standard_form",
    "simulate_dense",
    "standardize",
    "verify_theorem_chain",
]
