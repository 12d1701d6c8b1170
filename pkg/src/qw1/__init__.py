"""Quantum Wasserstein-1 distances, Lipschitz constants and their inequalities on spin lattices."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    InconsistentMarginals,
    InvariantViolation,
    MaxIterExceeded,
    NonPositiveDefinite,
    NotFullRank,
    NotProduct,
    NotTraceless,
    QW1Error,
    RegionMismatch,
    RegionOverlap,
    SizeCap,
)
from .operators import (  # noqa: F401
    DensityMatrix,
    HermitianOperator,
    Region,
    partial_trace,
    rel_entropy,
    tensor,
    vn_entropy,
)
from .transport import (  # noqa: F401
    SolverConfig,
    TransportCertificate,
    lipschitz_constant,
    partial_dependence,
    w1_distance,
    w1_norm,
)
