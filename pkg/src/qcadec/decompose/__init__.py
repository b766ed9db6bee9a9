"""Causal decomposition of ring automata into layers of routed gates."""

from .dense import (
    InnerLocalCorrection,
    SplitContext,
    VertexSplit,
    coarse_grain,
    decompose_dense,
    fine_grain,
    inner_local_to_product,
    pulled_back_outputs,
    vertex_split,
)
from .pipeline import (
    IntermediatePartition,
    LayeredDecomposition,
    VerificationReport,
    decompose,
    decompose_qca,
    decompose_ti,
    effective_radius,
    extract_layers,
    verify_reconstruction,
)

__all__ = [
    "InnerLocalCorrection",
    "IntermediatePartition",
    "LayeredDecomposition",
    "SplitContext",
    "VerificationReport",
    "VertexSplit",
    "coarse_grain",
    "decompose",
    "decompose_dense",
    "decompose_qca",
    "decompose_ti",
    "effective_radius",
    "extract_layers",
    "fine_grain",
    "inner_local_to_product",
    "pulled_back_outputs",
    "verify_reconstruction",
    "vertex_split",
]
