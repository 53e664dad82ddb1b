"""Vector kernels shared by the geometry: scaled p-norms, sign-power maps and
element-wise products.

Every function takes and returns float64 ``torch`` tensors (scalars come back as
python floats) and is a pure function of its inputs.
"""
import math
from typing import Iterable, Union

import numpy as np
import torch

from psphere.constants import DTYPE, ZERO_FLUSH
from psphere.exceptions import DimensionError, DomainError, InvalidInputError

VectorLike = Union[torch.Tensor, np.ndarray, Iterable[float]]


def as_vector(values: VectorLike) -> torch.Tensor:
    """Returns ``values`` as a 1-D float64 tensor, rejecting empty or non-finite input."""
    if isinstance(values, torch.Tensor):
        vec = values.detach().to(DTYPE)
    else:
        vec = torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE)
    vec = vec.reshape(-1)
    if vec.numel() == 0:
        raise InvalidInputError("vector must have at least one entry")
    if not bool(torch.isfinite(vec).all()):
        raise InvalidInputError("vector entries must be finite")
    return vec


def check_exponent(p: float) -> float:
    p = float(p)
    if not math.isfinite(p) or p <= 1.0:
        raise InvalidInputError(f"exponent p must be finite and > 1, got {p}")
    return p


def _check_same_length(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(
            f"length mismatch: {tuple(a.shape)} vs {tuple(b.shape)}"
        )


def pnorm(v: VectorLike, p: float) -> float:
    """p-norm in scaled form m * ||v / m||_p with m = max |v_i|.

    The scaled entries lie in [-1, 1], so the power sum stays within [1, n] for any p
    and nothing overflows or underflows. The zero vector has norm 0.
    """
    p = check_exponent(p)
    vec = as_vector(v)
    m = float(vec.abs().max())
    if m == 0.0:
        return 0.0
    scaled = (vec / m).abs()
    return m * float(scaled.pow(p).sum().pow(1.0 / p))


def pnorm_rows(M: torch.Tensor, p: float) -> torch.Tensor:
    """Row-wise scaled p-norms of a 2-D tensor; zero rows map to 0."""
    p = check_exponent(p)
    M = M.to(DTYPE)
    m = M.abs().amax(dim=1, keepdim=True)
    safe = torch.where(m > 0, m, torch.ones_like(m))
    scaled = (M / safe).abs()
    return (safe * scaled.pow(p).sum(dim=1, keepdim=True).pow(1.0 / p)).squeeze(1)


def sign_power(v: VectorLike, p: float) -> torch.Tensor:
    """sgn(v) * |v|^(p-1), evaluated as exp((p-1) log|v|).

    Magnitudes below ``ZERO_FLUSH`` map to an exact 0; p == 2 returns v unchanged.
    """
    p = check_exponent(p)
    vec = as_vector(v)
    if p == 2.0:
        return vec.clone()
    mag = vec.abs()
    live = mag > ZERO_FLUSH
    logs = torch.log(torch.where(live, mag, torch.ones_like(mag)))
    powered = torch.exp((p - 1.0) * logs)
    return torch.where(live, torch.sign(vec) * powered, torch.zeros_like(vec))


def hadamard(a: VectorLike, b: VectorLike) -> torch.Tensor:
    a, b = as_vector(a), as_vector(b)
    _check_same_length(a, b)
    return a * b


def elementwise_power(v: VectorLike, r: float) -> torch.Tensor:
    vec = as_vector(v)
    r = float(r)
    if not float(r).is_integer() and bool((vec < 0).any()):
        raise DomainError(
            f"negative base with fractional exponent r={r} is not real-valued"
        )
    return vec.pow(r)


def dot(a: VectorLike, b: VectorLike) -> float:
    a, b = as_vector(a), as_vector(b)
    _check_same_length(a, b)
    return float(torch.dot(a, b))


def pnorm_gradient(v: VectorLike, p: float) -> torch.Tensor:
    """Gradient of v -> ||v||_p, i.e. sign_power(v, p) / ||v||_p^(p-1)."""
    vec = as_vector(v)
    norm = pnorm(vec, p)
    if norm == 0.0:
        raise DomainError("the p-norm is not differentiable at the zero vector")
    return sign_power(vec / norm, p)


def as_matrix(values) -> torch.Tensor:
    """Returns ``values`` as a 2-D float64 tensor, rejecting non-finite input."""
    if isinstance(values, torch.Tensor):
        A = values.detach().to(DTYPE)
    else:
        A = torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE)
    if A.dim() != 2:
        raise DimensionError(f"expected a matrix, got shape {tuple(A.shape)}")
    if not bool(torch.isfinite(A).all()):
        raise InvalidInputError("matrix entries must be finite")
    return A
