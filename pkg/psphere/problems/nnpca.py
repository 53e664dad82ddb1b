"""Nonnegative PCA through the squared slack lift.

maximize v^T A v  s.t.  v >= 0, ||v||_2 = 1

becomes, with v = x * x, the unconstrained problem
minimize -(x^2)^T A (x^2) on the 4-sphere.
"""
from dataclasses import dataclass, field
from typing import Callable, ClassVar, List

import torch

from psphere.constants import DTYPE, KKT_TOL, NNPCA_P, SPARSITY_THRESHOLD
from psphere.core import as_matrix, as_vector
from psphere.exceptions import DimensionError, InvalidInputError
from psphere.manifold import Point, SpherePNorm
from psphere.optimizer import Problem
from psphere.problems.base import ProblemType, check_spd, random_spd


@dataclass(frozen=True, eq=False)
class NnpcaInstance:
    problem_type: ClassVar[ProblemType] = ProblemType.nnpca

    A: torch.Tensor

    def __post_init__(self):
        A = as_matrix(self.A)
        check_spd(A)
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def manifold(self) -> SpherePNorm:
        return SpherePNorm(self.n, NNPCA_P)

    @classmethod
    def random(cls, n: int, generator: torch.Generator) -> "NnpcaInstance":
        return cls(random_spd(n, generator))

    @classmethod
    def diagonal(cls, n: int) -> "NnpcaInstance":
        return cls(torch.diag(torch.arange(n, 0, -1, dtype=DTYPE)))

    @classmethod
    def identity(cls, n: int) -> "NnpcaInstance":
        return cls(torch.eye(n, dtype=DTYPE))


def squared_slack_problem(
    objective: Callable[[torch.Tensor], float],
    gradient: Callable[[torch.Tensor], torch.Tensor],
    descriptor: str,
) -> Problem:
    """Lifts g(v) on the nonnegative part of the p'-sphere to f(x) = g(x^2) on the
    2p'-sphere, with gradient 2 x * grad g(x^2)."""

    def lifted_objective(x: torch.Tensor) -> float:
        return objective(x * x)

    def lifted_gradient(x: torch.Tensor) -> torch.Tensor:
        return 2.0 * x * gradient(x * x)

    return Problem(lifted_objective, lifted_gradient, descriptor)


def nnpca_problem(inst: NnpcaInstance) -> Problem:
    A = inst.A
    return squared_slack_problem(
        lambda v: -float(v @ (A @ v)),
        lambda v: -2.0 * (A @ v),
        f"nnpca(n={inst.n})",
    )


def nnpca_gradient_closed_form(inst: NnpcaInstance, x: Point) -> torch.Tensor:
    """-4 ((A x^2) * x - ((x^4)^T A x^2 / ||x^3||^2) x^3)."""
    c = x.coords
    Av = inst.A @ (c * c)
    cube = c * c * c
    coef = float(torch.dot(c * cube, Av)) / float(torch.dot(cube, cube))
    return -4.0 * (Av * c - coef * cube)


def nnpca_lift(x: Point) -> torch.Tensor:
    if x.manifold.p != NNPCA_P:
        raise InvalidInputError(f"the lift needs a point of the 4-sphere, got p={x.manifold.p}")
    return x.coords * x.coords


def nnpca_objective_lifted(inst: NnpcaInstance, v) -> float:
    v = as_vector(v)
    return -float(v @ (inst.A @ v))


def sparsity_count(v, threshold: float = SPARSITY_THRESHOLD) -> int:
    return int((as_vector(v).abs() < threshold).sum())


@dataclass
class KktReport:
    v: torch.Tensor
    multiplier_mu: float
    residual_stationarity: float
    residual_norm: float
    residual_nonneg: float
    residual_support: float
    residual_off_support: float
    tol: float
    support: List[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return max(self.residual_stationarity, self.residual_norm, self.residual_nonneg) <= self.tol

    @property
    def support_consistent(self) -> bool:
        """(Av)_i = mu v_i on the support and (Av)_i <= 0 off it, within tol."""
        return max(self.residual_support, self.residual_off_support) <= self.tol

    def to_dict(self) -> dict:
        return {
            "multiplier_mu": self.multiplier_mu,
            "residual_stationarity": self.residual_stationarity,
            "residual_norm": self.residual_norm,
            "residual_nonneg": self.residual_nonneg,
            "residual_support": self.residual_support,
            "residual_off_support": self.residual_off_support,
            "support": self.support,
            "support_consistent": self.support_consistent,
            "tol": self.tol,
            "passed": self.passed,
        }


def kkt_check(inst: NnpcaInstance, v, tol: float = KKT_TOL) -> KktReport:
    """First-order conditions of nonnegative PCA at v:
    v >= 0, v^T v = 1 and (I - v v^T) A v <= 0."""
    return kkt_report(inst.A, v, tol)


def kkt_report(A, v, tol: float = KKT_TOL) -> KktReport:
    """``kkt_check`` for any square matrix, symmetric positive definite or not."""
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    A = as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise DimensionError(f"A must be square, got shape {tuple(A.shape)}")
    v = as_vector(v)
    if v.numel() != n:
        raise DimensionError(f"v has {v.numel()} entries, A is {n}x{n}")

    Av = A @ v
    mu = float(v @ Av)
    stationarity = Av - mu * v
    on = v > tol
    off = ~on
    return KktReport(
        v=v,
        multiplier_mu=mu,
        residual_stationarity=max(0.0, float(stationarity.max())),
        residual_norm=abs(float(v @ v) - 1.0),
        residual_nonneg=max(0.0, -float(v.min())),
        residual_support=float(stationarity[on].abs().max()) if bool(on.any()) else 0.0,
        residual_off_support=max(0.0, float(Av[off].max())) if bool(off.any()) else 0.0,
        tol=tol,
        support=[int(i) for i in torch.nonzero(on).reshape(-1).tolist()],
    )
