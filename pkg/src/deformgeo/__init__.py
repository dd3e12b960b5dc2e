"""Deformed translation groups: connection, curvature and transport from a cubic deformation jet."""

from .catalog import MetricCatalogEntry
from .errors import (
    DeformationDegenerateError,
    DifferentiationError,
    DomainEscapeError,
    ExpressionError,
    GaugeError,
    GeometryError,
    IndexDisciplineError,
    MetricSignatureError,
    NearDegenerateError,
    TrustRadiusError,
)
from .fields import ChartPoint, CoefficientField, FlatMetric, IndexedTensor, contract
from .geometry import (
    connection,
    curvature_coord,
    curvature_frame_left,
    curvature_frame_right,
    curvatures,
    gamma_frame,
    gauge_transform_gl,
    rho_sigma_coefficients,
    ricci_scalar,
)
from .group import Generators, act, multiply, shift_matrices, structure_functions, verify_identities
from .jets import DeformationJet, GroupParameter, eval_H, eval_K, identity_jet, make_jet
from .riemann import (
    GaugeRotation,
    MetricProvider,
    christoffel,
    compatibility_residuals,
    curvature_obstruction,
    delta_coefficients,
    gauge_transform_so,
    orthonormal_vielbein,
    ricci_rotation,
    solve_deformation,
)
from .suite import VerificationReport, run_suite
from .transport import (
    covariant_derivative_coord,
    covariant_derivative_frame,
    holonomy_parallelogram,
    parallel_transport,
)

__version__ = "0.1.0"
