"""Grid witnesses relating penalized, ball-constrained and sphere-constrained
minimization of a small convex quadratic.

All searches are brute force over a symmetric grid in R^n (n <= 3) and are
evaluated chunk by chunk along the first axis.
"""
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import torch

from psphere.constants import DTYPE, GRID_GAP_TOL, GRID_RESOLUTION
from psphere.core import as_matrix, as_vector, check_exponent, pnorm_rows
from psphere.exceptions import DimensionError, InvalidInputError

MAX_GRID_DIM = 3
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QuadraticLoss:
    """L(w) = (w - center)^T H (w - center) with H symmetric positive semidefinite."""

    hessian: torch.Tensor
    center: torch.Tensor

    def __post_init__(self):
        H = as_matrix(self.hessian)
        m = as_vector(self.center)
        if H.shape != (m.numel(), m.numel()):
            raise DimensionError(f"hessian {tuple(H.shape)} does not match center of length {m.numel()}")
        if float((H - H.T).abs().max()) > 1e-12:
            raise InvalidInputError("hessian must be symmetric")
        if float(torch.linalg.eigvalsh(H).min()) < -1e-12:
            raise InvalidInputError("hessian must be positive semidefinite")
        object.__setattr__(self, "hessian", H)
        object.__setattr__(self, "center", m)

    @classmethod
    def diagonal(cls, weights, center) -> "QuadraticLoss":
        return cls(torch.diag(as_vector(weights)), center)

    @property
    def n(self) -> int:
        return self.center.numel()

    def __call__(self, W: torch.Tensor) -> torch.Tensor:
        D = W.to(DTYPE) - self.center
        return ((D @ self.hessian) * D).sum(dim=-1)


@dataclass(frozen=True)
class Grid:
    """The points k * half_width / (resolution // 2), |k| <= resolution // 2, per axis."""

    n: int
    half_width: float
    resolution: int = GRID_RESOLUTION

    def __post_init__(self):
        if not 1 <= self.n <= MAX_GRID_DIM:
            raise InvalidInputError(f"grid search supports 1 <= n <= {MAX_GRID_DIM}, got {self.n}")
        if not self.half_width > 0 or self.resolution < 2:
            raise InvalidInputError("grid needs half_width > 0 and resolution >= 2")

    @classmethod
    def around(cls, loss: QuadraticLoss, radius: float = 0.0, resolution: int = GRID_RESOLUTION) -> "Grid":
        """Grid covering the loss center and the given radius, with a power-of-two
        half width so that integer points fall on grid nodes."""
        reach = max(float(loss.center.abs().max()), radius) + 1.0
        return cls(loss.n, 2.0 ** math.ceil(math.log2(reach)), resolution)

    @property
    def spacing(self) -> float:
        return self.half_width / (self.resolution // 2)

    def axis(self) -> torch.Tensor:
        k = self.resolution // 2
        return torch.arange(-k, k + 1, dtype=DTYPE) * self.spacing

    def chunks(self, rows: int = 16) -> Iterator[torch.Tensor]:
        axis = self.axis()
        for start in range(0, axis.numel(), rows):
            head = axis[start:start + rows]
            if self.n == 1:
                yield head.unsqueeze(1)
            else:
                yield torch.cartesian_prod(head, *([axis] * (self.n - 1)))


@dataclass
class EquivalenceGap:
    C: float
    gap: float
    w_star: torch.Tensor


def _argmin_smallest_norm(values: torch.Tensor, norms: torch.Tensor, best: Optional[tuple], points):
    """Folds one chunk into the running (value, norm, point) minimum, breaking value
    ties in favour of the smaller norm."""
    low = float(values.min())
    ties = values <= low + TIE_TOL * max(1.0, abs(low))
    idx = int(torch.argmin(torch.where(ties, norms, torch.full_like(norms, math.inf))))
    candidate = (float(values[idx]), float(norms[idx]), points[idx].clone())
    if best is None:
        return candidate
    scale = TIE_TOL * max(1.0, abs(best[0]))
    if candidate[0] < best[0] - scale:
        return candidate
    if abs(candidate[0] - best[0]) <= scale and candidate[1] < best[1]:
        return candidate
    return best


def equivalence_oracle_regularized_vs_constrained(
    loss: QuadraticLoss,
    lam: float,
    p: float,
    grid: Optional[Grid] = None,
) -> EquivalenceGap:
    """Minimizes L + lam ||.||_p on the grid, sets C to the norm of the minimizer,
    then minimizes L over the grid points of the C-ball and reports
    gap = L(w*) - min_ball L (nonnegative, since w* is in the ball)."""
    p = check_exponent(p)
    if lam < 0:
        raise InvalidInputError("lam must be nonnegative")
    grid = grid or Grid.around(loss)

    best = None
    for points in grid.chunks():
        norms = pnorm_rows(points, p)
        best = _argmin_smallest_norm(loss(points) + lam * norms, norms, best, points)
    _, C, w_star = best

    ball_min = math.inf
    limit = C + TIE_TOL * max(1.0, C)
    for points in grid.chunks():
        inside = pnorm_rows(points, p) <= limit
        if bool(inside.any()):
            ball_min = min(ball_min, float(loss(points[inside]).min()))
    value_star = float(loss(w_star.unsqueeze(0))[0])
    return EquivalenceGap(C=C, gap=max(0.0, value_star - ball_min), w_star=w_star)


@dataclass
class SphereWitness:
    applicable: bool
    confirmed: bool
    ball_value: float
    sphere_value: float
    gap: float

    def __bool__(self) -> bool:
        return self.confirmed


def ball_to_sphere_witness(
    loss: QuadraticLoss,
    C: float,
    p: float,
    grid: Optional[Grid] = None,
    tol: float = GRID_GAP_TOL,
) -> SphereWitness:
    """Checks on a grid that minimizing L over the C-ball and over the C-sphere give
    the same value, provided every unconstrained minimizer of L lies outside the ball.

    Sphere candidates are the grid directions rescaled to p-norm C.
    """
    p = check_exponent(p)
    if not C > 0:
        raise InvalidInputError("C must be positive")
    grid = grid or Grid.around(loss, radius=C)

    unconstrained = None
    ball_min = sphere_min = math.inf
    for points in grid.chunks():
        values = loss(points)
        norms = pnorm_rows(points, p)
        unconstrained = _argmin_smallest_norm(values, norms, unconstrained, points)
        inside = norms <= C
        if bool(inside.any()):
            ball_min = min(ball_min, float(values[inside].min()))
        nonzero = norms > 0
        if bool(nonzero.any()):
            on_sphere = points[nonzero] * (C / norms[nonzero]).unsqueeze(1)
            sphere_min = min(sphere_min, float(loss(on_sphere).min()))

    if unconstrained[1] <= C:
        return SphereWitness(False, False, ball_min, sphere_min, math.nan)
    ball_min = min(ball_min, sphere_min)
    gap = sphere_min - ball_min
    return SphereWitness(True, gap <= tol, ball_min, sphere_min, gap)
