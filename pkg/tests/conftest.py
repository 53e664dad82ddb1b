import pytest
import torch

from psphere.manifold import SpherePNorm
from psphere.utils import make_generator

MODERATE_P = [1.5, 2.0, 3.0, 4.0, 10.0, 100.0]
SMALL_N = [2, 5, 50]


@pytest.fixture
def generator() -> torch.Generator:
    return make_generator(0)


@pytest.fixture
def sphere3() -> SpherePNorm:
    return SpherePNorm(5, 3.0)


def tensor(*values) -> torch.Tensor:
    return torch.tensor(values, dtype=torch.float64)
