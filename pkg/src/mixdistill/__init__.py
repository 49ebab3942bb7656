"""Exact simulation of linear-optical entanglement distillation for genuine mixed states."""

from mixdistill.fock import (
    FockKet,
    MixedEnsemble,
    ModeLabel,
    ModeRegistry,
    PureState,
    TwoQubitDensity,
    inner,
    make_pure,
    reduce_two_qubit,
    tensor,
)
from mixdistill.protocols import (
    DistillationOutcome,
    ProtocolParams,
    distill_bitflip,
    distill_multipartite,
    distill_phaseflip_full,
    distill_phaseflip_stage1,
    distill_spdc,
)
from mixdistill.montecarlo import mc_validate

__version__ = "0.1.0"

__all__ = [
    "FockKet",
    "MixedEnsemble",
    "ModeLabel",
    "ModeRegistry",
    "PureState",
    "TwoQubitDensity",
    "inner",
    "make_pure",
    "reduce_two_qubit",
    "tensor",
    "DistillationOutcome",
    "ProtocolParams",
    "distill_bitflip",
    "distill_multipartite",
    "distill_phaseflip_full",
    "distill_phaseflip_stage1",
    "distill_spdc",
    "mc_validate",
]
