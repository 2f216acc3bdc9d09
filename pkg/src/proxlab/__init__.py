"""Local convergence of Douglas-Rachford and ADMM on partly smooth problems."""

from .subspace import (
    AngleReport,
    Basis,
    complement,
    direct_sum,
    dr_rate,
    intersection,
    null_space_basis,
    orthonormal_basis,
    principal_angles,
    projector_of,
)
from .prox import (
    AffineIndicator,
    DiagonalIndicator,
    FunctionOracle,
    GroupL12,
    L1Ball,
    L1Norm,
    LinfBall,
    LinfNorm,
    ManifoldChart,
    NDReport,
    NuclearNorm,
    Quadratic,
    SeparableSum,
    TV1D,
    Zero,
    from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "AffineIndicator",
    "AngleReport",
    "Basis",
    "complement",
    "DiagonalIndicator",
    "direct_sum",
    "dr_rate",
    "from_dict",
    "FunctionOracle",
    "GroupL12",
    "intersection",
    "L1Ball",
    "L1Norm",
    "LinfBall",
    "LinfNorm",
    "ManifoldChart",
    "NDReport",
    "NuclearNorm",
    "null_space_basis",
    "orthonormal_basis",
    "principal_angles",
    "projector_of",
    "Quadratic",
    "SeparableSum",
    "TV1D",
    "Zero",
]
