import math
from dataclasses import dataclass
from typing import Union

import torch

from psphere.constants import DTYPE, MEMBERSHIP_TOL, RENORMALIZE_TOL
from psphere.core import VectorLike, as_vector, check_exponent, pnorm, sign_power
from psphere.exceptions import (
    DimensionError,
    InvalidInputError,
    NotOnManifoldError,
    NotTangentError,
)


@dataclass(frozen=True)
class SpherePNorm:
    """The unit sphere of the p-norm in R^n, an (n-1)-dimensional embedded
    submanifold for 1 < p < inf.

    The metric is the one induced by the Euclidean inner product of R^n.
    """

    n: int
    p: float
    tol_membership: float = MEMBERSHIP_TOL

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidInputError(f"ambient dimension must be an integer >= 2, got {self.n}")
        if not self.tol_membership >= 0:
            raise InvalidInputError("tol_membership must be nonnegative")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", check_exponent(self.p))

    @property
    def dim(self) -> int:
        return self.n - 1

    @property
    def smoothness(self) -> Union[int, float]:
        """Differentiability class r of the sphere as a submanifold."""
        if float(self.p).is_integer():
            if int(self.p) % 2 == 0:
                return math.inf
            return int(self.p) - 1
        return math.floor(self.p)

    def __str__(self) -> str:
        return f"S^{self.n - 1}_{self.p:g}"

    #### Constructors
    def point(self, values: VectorLike) -> "Point":
        return Point(self, values)

    def tangent(self, x: "Point", values: VectorLike) -> "Tangent":
        self._check_own(x)
        return Tangent(x, values)

    def zero_tangent(self, x: "Point") -> "Tangent":
        self._check_own(x)
        return Tangent.trusted(x, torch.zeros(self.n, dtype=DTYPE))

    def random_point(self, generator: torch.Generator) -> "Point":
        while True:
            g = torch.randn(self.n, generator=generator, dtype=DTYPE)
            norm = pnorm(g, self.p)
            if norm > 0:
                return Point(self, g / norm)

    def random_positive_point(self, generator: torch.Generator, shift: float = 0.1) -> "Point":
        g = torch.randn(self.n, generator=generator, dtype=DTYPE).abs() + shift
        return Point(self, g / pnorm(g, self.p))

    def random_tangent(
        self, x: "Point", generator: torch.Generator, scale: float = 1.0
    ) -> "Tangent":
        self._check_own(x)
        while True:
            d = project(x, torch.randn(self.n, generator=generator, dtype=DTYPE)).vec
            length = float(torch.linalg.vector_norm(d))
            if length > 0:
                return Tangent.trusted(x, d * (scale / length))

    #### Metric
    def inner(self, x: "Point", xi: "Tangent", zeta: "Tangent") -> float:
        self._check_own(x)
        return float(torch.dot(xi.vec, zeta.vec))

    def norm(self, x: "Point", xi: "Tangent") -> float:
        return math.sqrt(self.inner(x, xi, xi))

    def _check_own(self, x: "Point") -> None:
        if x.manifold != self:
            raise InvalidInputError(f"point lives on {x.manifold}, not on {self}")


@dataclass(frozen=True, eq=False)
class Point:
    """A vector of unit p-norm.

    Drift up to ``RENORMALIZE_TOL`` is corrected by renormalizing; anything larger
    is rejected.
    """

    manifold: SpherePNorm
    coords: torch.Tensor

    def __post_init__(self):
        coords = as_vector(self.coords)
        if coords.numel() != self.manifold.n:
            raise DimensionError(
                f"point has {coords.numel()} entries, manifold needs {self.manifold.n}"
            )
        norm = pnorm(coords, self.manifold.p)
        residual = abs(norm - 1.0)
        if residual > self.manifold.tol_membership:
            if residual > RENORMALIZE_TOL:
                raise NotOnManifoldError(
                    f"||x||_p = {norm!r} is not within {RENORMALIZE_TOL} of 1"
                )
            coords = coords / norm
        object.__setattr__(self, "coords", coords)

    @classmethod
    def trusted(cls, manifold: SpherePNorm, coords: torch.Tensor) -> "Point":
        """Builds a point from coordinates already normalized, skipping validation."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "manifold", manifold)
        object.__setattr__(obj, "coords", coords.to(DTYPE))
        return obj

    def __repr__(self) -> str:
        return f"Point({self.manifold}, {self.coords.tolist()})"


@dataclass(frozen=True, eq=False)
class Tangent:
    """A vector orthogonal to the normal direction at ``base``.

    Small violations of tangency are removed by re-projecting, large ones rejected.
    """

    base: Point
    vec: torch.Tensor

    def __post_init__(self):
        vec = as_vector(self.vec)
        if vec.numel() != self.base.manifold.n:
            raise DimensionError(
                f"tangent has {vec.numel()} entries, manifold needs {self.base.manifold.n}"
            )
        normal = normal_direction(self.base)
        scale = max(1.0, float(torch.linalg.vector_norm(vec)))
        violation = abs(float(torch.dot(vec, normal)))
        if violation > self.base.manifold.tol_membership * scale:
            if violation > RENORMALIZE_TOL * scale:
                raise NotTangentError(
                    f"<v, n_x> = {violation!r} exceeds the tangency tolerance"
                )
            vec = vec - (float(torch.dot(normal, vec)) / float(torch.dot(normal, normal))) * normal
        object.__setattr__(self, "vec", vec)

    @classmethod
    def trusted(cls, base: Point, vec: torch.Tensor) -> "Tangent":
        """Builds a tangent from a vector already known to be tangent, skipping validation."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "base", base)
        object.__setattr__(obj, "vec", vec.to(DTYPE))
        return obj

    @property
    def manifold(self) -> SpherePNorm:
        return self.base.manifold

    @property
    def norm(self) -> float:
        return float(torch.linalg.vector_norm(self.vec))

    def is_zero(self) -> bool:
        return not bool(self.vec.any())

    def __neg__(self) -> "Tangent":
        return Tangent.trusted(self.base, -self.vec)

    def __mul__(self, scalar: float) -> "Tangent":
        return Tangent.trusted(self.base, self.vec * float(scalar))

    __rmul__ = __mul__

    def __add__(self, other: "Tangent") -> "Tangent":
        if other.base is not self.base and not torch.equal(other.base.coords, self.base.coords):
            raise InvalidInputError("cannot add tangents based at different points")
        return Tangent.trusted(self.base, self.vec + other.vec)

    def __sub__(self, other: "Tangent") -> "Tangent":
        return self + (-other)

    def __repr__(self) -> str:
        return f"Tangent(at={self.base.coords.tolist()}, vec={self.vec.tolist()})"


def normal_direction(x: Point) -> torch.Tensor:
    """sgn(x) * |x|^(p-1), which spans the normal space at x."""
    return sign_power(x.coords, x.manifold.p)


def project(x: Point, d: VectorLike) -> Tangent:
    """Orthogonal projection of an ambient vector onto the tangent space at x."""
    d = as_vector(d)
    if d.numel() != x.manifold.n:
        raise DimensionError(f"vector has {d.numel()} entries, manifold needs {x.manifold.n}")
    normal = normal_direction(x)
    coef = float(torch.dot(normal, d)) / float(torch.dot(normal, normal))
    return Tangent.trusted(x, d - coef * normal)


def membership_residual(coords: torch.Tensor, p: float) -> float:
    return abs(pnorm(coords, p) - 1.0)


def tangency_residual(x: Point, v: torch.Tensor) -> float:
    """|<v, n_x / ||n_x||>| relative to max(1, ||v||)."""
    normal = normal_direction(x)
    unit = normal / torch.linalg.vector_norm(normal)
    scale = max(1.0, float(torch.linalg.vector_norm(v)))
    return abs(float(torch.dot(v.to(DTYPE), unit))) / scale


def same_base(x: Point, xi: Tangent) -> None:
    if xi.base is x:
        return
    if xi.base.manifold != x.manifold or not torch.equal(xi.base.coords, x.coords):
        raise InvalidInputError("tangent vector is not based at the given point")
