"""Box-constrained convex QP on a large-p sphere.

min 1/2 w^T A w + c^T w  s.t.  l <= w <= u

The box is the image of the unit cube under w = a * x + b with a = (u - l) / 2,
b = (l + u) / 2, and the cube boundary is approximated by the p-sphere for large p.
"""
from dataclasses import dataclass
from typing import ClassVar, Iterable, List, Optional, Tuple

import torch
from loguru import logger

from psphere.constants import (
    BOXQP_REFERENCE_MAX_ITERS,
    BOXQP_REFERENCE_TOL,
    BOXQP_RETRIES,
    DTYPE,
)
from psphere.core import as_matrix, as_vector, check_exponent, pnorm
from psphere.exceptions import DimensionError, InstanceGenerationError, InvalidInputError
from psphere.manifold import Point, SpherePNorm
from psphere.optimizer import Problem, SolveResult, SolverConfig, solve
from psphere.problems.base import ProblemType, check_spd, random_spd
from psphere.utils import log_event, make_generator


def default_bounds(n: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """l = -(1, ..., n), u = (1, ..., n)."""
    u = torch.arange(1, n + 1, dtype=DTYPE)
    return -u, u


@dataclass(frozen=True, eq=False)
class BoxTransform:
    a: torch.Tensor
    b: torch.Tensor

    @classmethod
    def from_bounds(cls, l: torch.Tensor, u: torch.Tensor) -> "BoxTransform":
        return cls((u - l) / 2.0, (l + u) / 2.0)

    def to_box(self, x: torch.Tensor) -> torch.Tensor:
        return self.a * x + self.b

    def to_sphere(self, w: torch.Tensor) -> torch.Tensor:
        return (w - self.b) / self.a


@dataclass(frozen=True, eq=False)
class BoxQpInstance:
    problem_type: ClassVar[ProblemType] = ProblemType.boxqp

    A: torch.Tensor
    c: torch.Tensor
    l: torch.Tensor
    u: torch.Tensor
    p: float = 5000.0

    def __post_init__(self):
        A = as_matrix(self.A)
        check_spd(A)
        c, l, u = as_vector(self.c), as_vector(self.l), as_vector(self.u)
        n = A.shape[0]
        if not c.numel() == l.numel() == u.numel() == n:
            raise DimensionError(
                f"A is {n}x{n} but c, l, u have {c.numel()}, {l.numel()}, {u.numel()} entries"
            )
        if not bool((l < u).all()):
            raise InvalidInputError("bounds need l < u element-wise")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "p", check_exponent(self.p))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def manifold(self) -> SpherePNorm:
        return SpherePNorm(self.n, self.p)

    @property
    def transform(self) -> BoxTransform:
        return BoxTransform.from_bounds(self.l, self.u)

    def with_p(self, p: float) -> "BoxQpInstance":
        return BoxQpInstance(self.A, self.c, self.l, self.u, p)


def boxqp_loss(inst: BoxQpInstance, w: torch.Tensor) -> float:
    return float(0.5 * (w @ (inst.A @ w)) + inst.c @ w)


def boxqp_problem(inst: BoxQpInstance) -> Tuple[Problem, BoxTransform]:
    transform = inst.transform
    a = transform.a

    def objective(x: torch.Tensor) -> float:
        return boxqp_loss(inst, transform.to_box(x))

    def gradient(x: torch.Tensor) -> torch.Tensor:
        return a * (inst.A @ transform.to_box(x) + inst.c)

    return Problem(objective, gradient, f"boxqp(n={inst.n}, p={inst.p:g})"), transform


def box_violation(w: torch.Tensor, l: torch.Tensor, u: torch.Tensor) -> float:
    return max(0.0, float((l - w).max()), float((w - u).max()))


def unconstrained_minimizer(A: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
    return -torch.linalg.solve(A, c)


def is_infeasible(A: torch.Tensor, c: torch.Tensor, l: torch.Tensor, u: torch.Tensor) -> bool:
    return box_violation(unconstrained_minimizer(A, c), l, u) > 0.0


def ensure_infeasible(
    A: torch.Tensor,
    c: torch.Tensor,
    l: torch.Tensor,
    u: torch.Tensor,
    generator: torch.Generator,
    retries: int = BOXQP_RETRIES,
) -> torch.Tensor:
    """Redraws c until -A^-1 c leaves the box; raises after ``retries`` redraws."""
    scale = float(torch.maximum(l.abs(), u.abs()).max())
    for attempt in range(retries + 1):
        if is_infeasible(A, c, l, u):
            return c
        if attempt == retries:
            break
        logger.debug(f"unconstrained minimizer inside the box, redrawing c ({attempt + 1}/{retries})")
        c = scale * torch.randn(A.shape[0], generator=generator, dtype=DTYPE)
    raise InstanceGenerationError(
        f"unconstrained minimizer stays inside the box after {retries} redraws"
    )


def random_boxqp(
    n: int,
    generator: torch.Generator,
    p: float = 5000.0,
    lower: Optional[torch.Tensor] = None,
    upper: Optional[torch.Tensor] = None,
    retries: int = BOXQP_RETRIES,
) -> BoxQpInstance:
    if lower is None:
        lower, upper = default_bounds(n)
    A = random_spd(n, generator)
    scale = float(torch.maximum(lower.abs(), upper.abs()).max())
    c = scale * torch.randn(n, generator=generator, dtype=DTYPE)
    c = ensure_infeasible(A, c, lower, upper, generator, retries)
    return BoxQpInstance(A, c, lower, upper, p)


def boxqp_reference(
    inst: BoxQpInstance,
    max_iters: int = BOXQP_REFERENCE_MAX_ITERS,
    tol: float = BOXQP_REFERENCE_TOL,
) -> torch.Tensor:
    """Projected gradient on the box with step 1/||A||_2, then an exact re-solve of
    the free block, kept only if it stays feasible and does not increase the loss."""
    A, c, l, u = inst.A, inst.c, inst.l, inst.u
    step = 1.0 / float(torch.linalg.matrix_norm(A, ord=2))
    w = torch.clamp(unconstrained_minimizer(A, c), l, u)
    for iteration in range(max_iters):
        w_new = torch.clamp(w - step * (A @ w + c), l, u)
        moved = float((w_new - w).abs().max())
        w = w_new
        if moved <= tol * max(1.0, float(w.abs().max())):
            break
    logger.debug(f"projected gradient reference stopped after {iteration + 1} iterations")

    width = float((u - l).max())
    free = (w > l + 1e-12 * width) & (w < u - 1e-12 * width)
    if bool(free.any()):
        fixed = ~free
        polished = w.clone()
        rhs = -(c[free] + A[free][:, fixed] @ w[fixed])
        polished[free] = torch.linalg.solve(A[free][:, free], rhs)
        if box_violation(polished, l, u) == 0.0 and boxqp_loss(inst, polished) <= boxqp_loss(inst, w):
            w = polished
    return w


def initial_point(inst: BoxQpInstance, manifold: SpherePNorm, seed: int = 0) -> Point:
    """Clamped unconstrained minimizer mapped to the sphere."""
    transform = inst.transform
    w0 = torch.clamp(unconstrained_minimizer(inst.A, inst.c), inst.l, inst.u)
    x0 = transform.to_sphere(w0)
    if not bool(x0.any()):
        return manifold.random_point(make_generator(seed))
    return Point(manifold, x0 / pnorm(x0, manifold.p))


@dataclass
class SweepEntry:
    p: float
    result: SolveResult
    w: torch.Tensor
    distance: Optional[float]
    violation: float


def solve_sweep(
    inst: BoxQpInstance,
    p_list: Iterable[float],
    cfg: Optional[SolverConfig] = None,
    reference: Optional[torch.Tensor] = None,
) -> List[SweepEntry]:
    """Solves the instance on each p-sphere in turn, warm-starting from the previous p."""
    cfg = cfg or SolverConfig()
    entries: List[SweepEntry] = []
    previous: Optional[torch.Tensor] = None
    for p in p_list:
        member = inst.with_p(p)
        manifold = member.manifold
        problem, transform = boxqp_problem(member)
        if previous is None:
            x0 = initial_point(member, manifold, cfg.rng_seed)
        else:
            x0 = Point(manifold, previous / pnorm(previous, p))
        result = solve(problem, manifold, x0, cfg)
        w = transform.to_box(result.point.coords)
        distance = None
        if reference is not None:
            distance = float(torch.linalg.vector_norm(w - reference))
        entry = SweepEntry(p, result, w, distance, box_violation(w, inst.l, inst.u))
        log_event(
            "boxqp",
            p=p,
            objective=result.objective,
            distance=distance,
            converged=result.converged,
        )
        entries.append(entry)
        previous = result.point.coords
    return entries
