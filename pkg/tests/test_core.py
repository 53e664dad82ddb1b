import math

import numpy as np
import pytest
import torch

from psphere.core import (
    as_vector,
    check_exponent,
    dot,
    elementwise_power,
    hadamard,
    pnorm,
    pnorm_gradient,
    pnorm_rows,
    sign_power,
)
from psphere.exceptions import DimensionError, DomainError, InvalidInputError

from .conftest import tensor


def test_pnorm_euclidean():
    assert pnorm([3.0, 4.0], 2) == pytest.approx(5.0, abs=1e-15)


def test_pnorm_general_p():
    assert pnorm([1.0, 1.0], 4) == pytest.approx(2 ** 0.25, rel=1e-15)
    assert pnorm([1.0, -2.0, 0.5], 3) == pytest.approx((1 + 8 + 0.125) ** (1 / 3), rel=1e-14)


def test_pnorm_zero_vector():
    assert pnorm([0.0, 0.0, 0.0], 3) == 0.0


def test_pnorm_no_overflow_for_large_entries_or_p():
    big = pnorm([1e200, 1e200], 3)
    assert math.isfinite(big)
    assert big == pytest.approx(1e200 * 2 ** (1 / 3), rel=1e-14)
    assert pnorm([1.0, 0.5, -0.25], 50000) == pytest.approx(1.0, abs=1e-12)
    assert pnorm([1e-200, 3e-200], 1.000001) == pytest.approx(4e-200, rel=1e-5)


def test_pnorm_rows_matches_pnorm():
    rows = torch.tensor([[3.0, 4.0], [0.0, 0.0], [-1.0, 2.0]], dtype=torch.float64)
    norms = pnorm_rows(rows, 2.5)
    for row, value in zip(rows, norms):
        assert float(value) == pytest.approx(pnorm(row, 2.5), rel=1e-14)


@pytest.mark.parametrize("p", [1.0, 0.5, math.inf, math.nan])
def test_check_exponent_rejects(p):
    with pytest.raises(InvalidInputError):
        check_exponent(p)


def test_as_vector_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        as_vector([])
    with pytest.raises(InvalidInputError):
        as_vector([1.0, float("nan")])
    assert as_vector(np.array([[1.0, 2.0]])).shape == (2,)


def test_sign_power_values():
    result = sign_power([-2.0, 0.0, 3.0], 3)
    assert torch.allclose(result, tensor(-4.0, 0.0, 9.0), rtol=1e-14, atol=0)


def test_sign_power_p2_is_identity():
    v = tensor(-1.5, 0.25, 7.0)
    assert torch.equal(sign_power(v, 2.0), v)


def test_sign_power_flushes_and_stays_finite():
    result = sign_power([1e-310, -0.5, 1.0], 50000)
    assert bool(torch.isfinite(result).all())
    assert float(result[0]) == 0.0
    assert float(result[1]) == 0.0
    assert float(result[2]) == 1.0


def test_hadamard_and_dot():
    assert torch.equal(hadamard([1.0, 2.0], [3.0, -1.0]), tensor(3.0, -2.0))
    assert dot([1.0, 2.0], [3.0, -1.0]) == 1.0
    with pytest.raises(DimensionError):
        hadamard([1.0, 2.0], [1.0])
    with pytest.raises(DimensionError):
        dot([1.0], [1.0, 2.0])


def test_elementwise_power_domain():
    assert torch.equal(elementwise_power([-2.0, 3.0], 2), tensor(4.0, 9.0))
    with pytest.raises(DomainError):
        elementwise_power([-2.0, 3.0], 0.5)


def test_pnorm_gradient_matches_finite_differences():
    v = tensor(0.3, -1.2, 0.7)
    grad = pnorm_gradient(v, 3.0)
    h = 1e-6
    for i in range(3):
        e = torch.zeros(3, dtype=torch.float64)
        e[i] = h
        numeric = (pnorm(v + e, 3.0) - pnorm(v - e, 3.0)) / (2 * h)
        assert float(grad[i]) == pytest.approx(numeric, abs=1e-8)
    with pytest.raises(DomainError):
        pnorm_gradient([0.0, 0.0], 3.0)
