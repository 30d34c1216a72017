"""FFT-accelerated matvecs for block lower-triangular Toeplitz p2o maps."""
from .block_operator import (
    CompactP2O,
    Ordering,
    SpaceTimeVector,
    SpectralP2O,
    apply_adjoint,
    apply_adjoint_ewp,
    apply_forward,
    apply_forward_ewp,
    naive_apply_adjoint,
    naive_apply_forward,
    setup,
    soti_to_tosi,
    tosi_to_soti,
)
from .planner import CostParams, GridShape, ProblemDims, select_grid

__all__ = [
    "CompactP2O", "Ordering", "SpaceTimeVector", "SpectralP2O", "apply_adjoint", "apply_adjoint_ewp",
    "apply_forward", "apply_forward_ewp", "naive_apply_adjoint", "naive_apply_forward", "setup",
    "soti_to_tosi", "tosi_to_soti", "CostParams", "GridShape", "ProblemDims", "select_grid",
]
