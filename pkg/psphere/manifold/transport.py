from enum import Enum

import torch

from psphere.core import pnorm, sign_power
from psphere.exceptions import InvalidInputError
from psphere.manifold.sphere import Point, Tangent, project, same_base


class TransportKind(Enum):
    differentiated = "diffret"
    projection = "projection"


def transport(kind: TransportKind, x: Point, eta: Tangent, xi: Tangent) -> Tangent:
    """Carries xi from T_x to the tangent space at the normalization retraction R_x(eta).

    Both kinds are computed from z_hat = (x + eta) / ||x + eta||_p, which keeps
    every intermediate of unit size for large p.
    """
    same_base(x, eta)
    same_base(x, xi)
    if eta.is_zero():
        return Tangent.trusted(x, xi.vec.clone())

    p = x.manifold.p
    z = x.coords + eta.vec
    norm_z = pnorm(z, p)
    z_hat = z / norm_z
    target = Point.trusted(x.manifold, z_hat)

    if kind is TransportKind.differentiated:
        coef = float(torch.dot(sign_power(z_hat, p), xi.vec))
        return Tangent.trusted(target, (xi.vec - coef * z_hat) / norm_z)
    if kind is TransportKind.projection:
        return project(target, xi.vec)
    raise InvalidInputError(f"unknown transport {kind!r}")
