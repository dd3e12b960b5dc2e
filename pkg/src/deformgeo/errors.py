"""Exception hierarchy."""


class GeometryError(Exception):
    """Base class for all library errors."""


class IndexDisciplineError(GeometryError):
    """Contraction between slots of different frame kind or equal variance."""


class DifferentiationError(GeometryError):
    """A field produced non-finite values while being differentiated."""


class DeformationDegenerateError(GeometryError):
    """The vielbein h^m_mu (or an evaluated H matrix) is singular."""


class NearDegenerateError(DeformationDegenerateError):
    """An evaluated H matrix is too ill-conditioned to invert reliably."""


class TrustRadiusError(GeometryError):
    """A displacement exceeds the region where the cubic jet is trusted."""


class DomainEscapeError(GeometryError):
    """A displaced point left the chart domain."""


class MetricSignatureError(GeometryError):
    """The metric is not symmetric, degenerate, or has the wrong signature."""


class GaugeError(GeometryError):
    """A gauge matrix field is singular or not eta-orthogonal."""


class ExpressionError(GeometryError):
    """Malformed expression in a declarative metric file."""
