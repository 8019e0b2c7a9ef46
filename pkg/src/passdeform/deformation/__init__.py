"""Passive-operator deformations: thresholds, bounds, validation, ladders."""
from ..partitions import ManifoldPartition, partition_from_generator, partition_from_values
from .bsp import BSPGroups, BSPReport, bsp_subspaces, verify_bsp_equality
from .build import build_B, identity_shift, neg_log_state, strip_shift
from .ladders import (
    EffectiveBetaReport,
    LaddersDiagram,
    PolarizationBound,
    UltraColdReport,
    effective_betas,
    ladders_diagram,
    polarization_bound,
    ultracold_analysis,
)
from .thresholds import (
    DeformationBound,
    DeformationCheck,
    XiThresholds,
    bound_from_xi,
    deformed_inequality,
    pair_constraints,
    validate_deformation,
    xi_thresholds,
)
