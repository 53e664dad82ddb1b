"""Sphere-constrained least squares as a stand-in for the Lasso.

min ||X w - y||^2  s.t.  ||w||_1 <= C  is approximated on the (1 + eps)-sphere by
w = C x:  minimize ||C X x - y||^2 over ||x||_p = 1.
"""
from dataclasses import dataclass
from typing import ClassVar, List, Optional, Tuple

import torch
from loguru import logger
from sklearn.linear_model import Lasso

from psphere.constants import (
    DTYPE,
    LASSO_EPS,
    LASSO_M,
    LASSO_N,
    LASSO_ORACLE_MAX_ITER,
    LASSO_ORACLE_TOL,
    LASSO_SUPPORT_THRESHOLD,
)
from psphere.core import as_matrix, as_vector, check_exponent
from psphere.exceptions import DimensionError, InvalidInputError
from psphere.manifold import SpherePNorm
from psphere.optimizer import Problem
from psphere.problems.base import ProblemType


@dataclass(frozen=True, eq=False)
class LassoInstance:
    problem_type: ClassVar[ProblemType] = ProblemType.lasso

    X: torch.Tensor
    y: torch.Tensor
    C: float
    p: float = 1.0 + LASSO_EPS

    def __post_init__(self):
        X = as_matrix(self.X)
        y = as_vector(self.y)
        if X.shape[0] != y.numel():
            raise DimensionError(f"X has {X.shape[0]} rows but y has {y.numel()} entries")
        if not 0 < float(self.C) < float("inf"):
            raise InvalidInputError(f"C must be a positive finite radius, got {self.C}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "C", float(self.C))
        object.__setattr__(self, "p", check_exponent(self.p))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def manifold(self) -> SpherePNorm:
        return SpherePNorm(self.n, self.p)


def lasso_problem(inst: LassoInstance) -> Problem:
    CX = inst.C * inst.X
    y = inst.y

    def objective(x: torch.Tensor) -> float:
        r = CX @ x - y
        return float(r @ r)

    def gradient(x: torch.Tensor) -> torch.Tensor:
        return 2.0 * inst.C * (inst.X.T @ (CX @ x - y))

    return Problem(objective, gradient, f"lasso(C={inst.C:g}, p={inst.p:g})")


def lasso_loss(X: torch.Tensor, y: torch.Tensor, w: torch.Tensor) -> float:
    r = X @ w - y
    return float(r @ r)


def true_coefficients(n: int) -> torch.Tensor:
    """n - 3 nonzeros -k..-1, 1..k' followed by three zeros; (-5..-1, 1..5, 0, 0, 0) at n = 13."""
    active = n - 3
    negatives = active // 2
    values = list(range(-negatives, 0)) + list(range(1, active - negatives + 1)) + [0, 0, 0]
    return torch.tensor(values, dtype=DTYPE)


def lasso_design(
    generator: torch.Generator, m: int = LASSO_M, n: int = LASSO_N
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Synthetic regression data: X standard normal, noise uniform on [-1, 1]."""
    if not m >= n >= 4:
        raise InvalidInputError(f"need m >= n >= 4, got m={m}, n={n}")
    X = torch.randn(m, n, generator=generator, dtype=DTYPE)
    w_true = true_coefficients(n)
    noise = 2.0 * torch.rand(m, generator=generator, dtype=DTYPE) - 1.0
    return X, X @ w_true + noise, w_true


def unregularized_solution(X: torch.Tensor, y: torch.Tensor) -> Optional[torch.Tensor]:
    """(X^T X)^-1 X^T y, or None when X^T X is singular."""
    gram = X.T @ X
    factor, info = torch.linalg.cholesky_ex(gram)
    if int(info) != 0:
        logger.warning("X^T X is singular; no unregularized solution")
        return None
    return torch.cholesky_solve((X.T @ y).unsqueeze(1), factor).squeeze(1)


def support(w: torch.Tensor, threshold: float = LASSO_SUPPORT_THRESHOLD) -> List[int]:
    return [int(i) for i in torch.nonzero(w.abs() > threshold).reshape(-1).tolist()]


def matched_lambda(X: torch.Tensor, y: torch.Tensor, w: torch.Tensor) -> float:
    """Multiplier of the l1 constraint at w: -<grad L(w), w> / ||w||_1."""
    grad = 2.0 * (X.T @ (X @ w - y))
    l1 = float(w.abs().sum())
    if l1 == 0.0:
        return float(grad.abs().max())
    return max(0.0, -float(grad @ w) / l1)


def lasso_reference(X: torch.Tensor, y: torch.Tensor, lam: float) -> torch.Tensor:
    """Coordinate-descent minimizer of ||X w - y||^2 + lam ||w||_1."""
    if lam <= 0.0:
        baseline = unregularized_solution(X, y)
        if baseline is None:
            raise InvalidInputError("lam = 0 needs a nonsingular X^T X")
        return baseline
    m = X.shape[0]
    model = Lasso(
        alpha=lam / (2.0 * m),
        fit_intercept=False,
        tol=LASSO_ORACLE_TOL,
        max_iter=LASSO_ORACLE_MAX_ITER,
    )
    model.fit(X.numpy(), y.numpy())
    return torch.as_tensor(model.coef_, dtype=DTYPE)


@dataclass
class OracleGap:
    lam: float
    objective: float
    oracle_objective: float
    oracle: torch.Tensor

    @property
    def relative_gap(self) -> float:
        return (self.objective - self.oracle_objective) / max(abs(self.oracle_objective), 1e-300)


def oracle_gap(X: torch.Tensor, y: torch.Tensor, w: torch.Tensor) -> OracleGap:
    """Compares w with the regularized solution at the multiplier matched to w."""
    lam = matched_lambda(X, y, w)
    reference = lasso_reference(X, y, lam)

    def penalized(v: torch.Tensor) -> float:
        return lasso_loss(X, y, v) + lam * float(v.abs().sum())

    return OracleGap(lam, penalized(w), penalized(reference), reference)
