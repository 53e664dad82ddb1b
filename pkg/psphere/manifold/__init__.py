from psphere.manifold.retraction import (
    RetractionKind,
    inverse_retract,
    orthographic_alpha,
    project_onto_ball,
    retract,
)
from psphere.manifold.sphere import (
    Point,
    SpherePNorm,
    Tangent,
    membership_residual,
    normal_direction,
    project,
    tangency_residual,
)
from psphere.manifold.transport import TransportKind, transport
