from enum import Enum

import torch

from psphere.constants import DTYPE, SPD_SHIFT
from psphere.exceptions import DimensionError, InvalidInputError


class ProblemType(Enum):
    nnpca = "nnpca"
    lasso = "lasso"
    boxqp = "boxqp"


def check_spd(A: torch.Tensor, name: str = "A") -> None:
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got {tuple(A.shape)}")
    asymmetry = float((A - A.T).abs().max())
    if asymmetry > 1e-12:
        raise InvalidInputError(f"{name} is not symmetric (max |A - A^T| = {asymmetry:.3e})")
    _, info = torch.linalg.cholesky_ex(A)
    if int(info) != 0:
        raise InvalidInputError(f"{name} is not positive definite")


def random_spd(n: int, generator: torch.Generator, shift: float = SPD_SHIFT) -> torch.Tensor:
    """G^T G + shift * n * I with G standard normal."""
    G = torch.randn(n, n, generator=generator, dtype=DTYPE)
    A = G.T @ G + shift * n * torch.eye(n, dtype=DTYPE)
    return 0.5 * (A + A.T)
