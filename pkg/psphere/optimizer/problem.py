from dataclasses import dataclass
from typing import Callable

import torch

from psphere.constants import DTYPE, FD_STEP
from psphere.manifold import Point, SpherePNorm, Tangent, project

Objective = Callable[[torch.Tensor], float]
Gradient = Callable[[torch.Tensor], torch.Tensor]


@dataclass(frozen=True)
class Problem:
    """A smooth function on R^n restricted to the sphere.

    ``objective`` and ``euclidean_gradient`` act on ambient coordinates and must be
    safe to call from several threads at once.
    """

    objective: Objective
    euclidean_gradient: Gradient
    descriptor: str = "problem"

    def __str__(self) -> str:
        return self.descriptor

    def value(self, x: Point) -> float:
        return float(self.objective(x.coords))


def riemannian_gradient(prob: Problem, x: Point) -> Tangent:
    return project(x, prob.euclidean_gradient(x.coords))


def finite_difference_gradient(
    objective: Objective, coords: torch.Tensor, step: float = FD_STEP
) -> torch.Tensor:
    """Central differences, one coordinate at a time, with steps scaled to |x_i|."""
    coords = coords.to(DTYPE)
    grad = torch.empty_like(coords)
    for i in range(coords.numel()):
        h = step * max(1.0, abs(float(coords[i])))
        forward = coords.clone()
        backward = coords.clone()
        forward[i] += h
        backward[i] -= h
        grad[i] = (float(objective(forward)) - float(objective(backward))) / (2.0 * h)
    return grad


def gradient_conformance(
    prob: Problem,
    manifold: SpherePNorm,
    generator: torch.Generator,
    trials: int = 5,
) -> float:
    """Worst relative error between ``euclidean_gradient`` and central differences
    at random points of ``manifold``."""
    worst = 0.0
    for _ in range(trials):
        x = manifold.random_point(generator)
        analytic = prob.euclidean_gradient(x.coords).to(DTYPE)
        numeric = finite_difference_gradient(prob.objective, x.coords)
        scale = max(
            float(torch.linalg.vector_norm(analytic)),
            float(torch.linalg.vector_norm(numeric)),
            1e-300,
        )
        worst = max(worst, float(torch.linalg.vector_norm(analytic - numeric)) / scale)
    return worst
