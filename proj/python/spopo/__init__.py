"""Multimode SPOPO simulation, entanglement witnesses and homodyne-data analysis."""

from ._core import (
    ConfigError,
    CovarianceState,
    DataError,
    FrequencyGrid,
    PhaseMatching,
    PhysicalityError,
    PumpSpectrum,
    __version__,
    analyze_traces,
    apply_loss,
    assemble_covariance,
    block_commutator_max_abs,
    build_coupling,
    correlation_matrix,
    diagonalize,
    duan,
    epr_product,
    extract_extrema,
    hermite_gauss_reference,
    ppt_min_symplectic,
    purity,
    scan_bipartitions,
    shape_id,
    shape_levels,
    simulate,
    synthesize_trace,
)

__all__ = [
    "ConfigError",
    "CovarianceState",
    "DataError",
    "FrequencyGrid",
    "PhaseMatching",
    "PhysicalityError",
    "PumpSpectrum",
    "__version__",
    "analyze_traces",
    "apply_loss",
    "assemble_covariance",
    "block_commutator_max_abs",
    "build_coupling",
    "correlation_matrix",
    "diagonalize",
    "duan",
    "epr_product",
    "extract_extrema",
    "hermite_gauss_reference",
    "ppt_min_symplectic",
    "purity",
    "scan_bipartitions",
    "shape_id",
    "shape_levels",
    "simulate",
    "synthesize_trace",
]
