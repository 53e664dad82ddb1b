import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import torch
from loguru import logger

from psphere.constants import MAX_INITIAL_STEP, NNPCA_STARTS, STAGNATION_PATIENCE
from psphere.exceptions import InvalidInputError, LineSearchError, OutOfDomainError
from psphere.manifold import (
    Point,
    RetractionKind,
    SpherePNorm,
    Tangent,
    inverse_retract,
    project,
    transport,
)
from psphere.optimizer.linesearch import line_search_wolfe
from psphere.optimizer.problem import Problem, riemannian_gradient
from psphere.protocol import BetaRule, Method, SolverConfig
from psphere.utils import log_event, make_generator


@dataclass
class TraceEvent:
    iteration: int
    objective: float
    grad_norm: float
    step: float = 0.0

    @staticmethod
    def from_dict(event_dict: dict) -> "TraceEvent":
        """Converts a dictionary to a TraceEvent object."""
        return TraceEvent(
            iteration=int(event_dict["iteration"]),
            objective=float(event_dict["objective"]),
            grad_norm=float(event_dict["grad_norm"]),
            step=float(event_dict.get("step", 0.0)),
        )


@dataclass
class SolveResult:
    point: Point
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    trace: List[TraceEvent] = field(default_factory=list)
    restarts: int = 0
    message: str = ""

    def certify(self, prob: Problem) -> float:
        """Riemannian gradient norm at the final point, recomputed from scratch."""
        return riemannian_gradient(prob, self.point).norm

    def trace_dicts(self) -> List[dict]:
        return [asdict(event) for event in self.trace]


def _carry(cfg: SolverConfig, x: Point, step: Tangent, v: Tangent, x_new: Point) -> Tangent:
    """Transports v along ``step`` and re-bases it at ``x_new``."""
    carried = transport(cfg.transport, x, step, v)
    if cfg.retraction is RetractionKind.normalization:
        return Tangent.trusted(x_new, carried.vec)
    return project(x_new, carried.vec)


def _carry_direction(
    cfg: SolverConfig, x: Point, eta: Tangent, t: float, x_new: Point
) -> Tangent:
    step = eta * t
    if cfg.use_inverse_retraction:
        try:
            back = inverse_retract(cfg.retraction, x_new, x)
        except OutOfDomainError as err:
            logger.debug(f"inverse retraction unavailable, transporting instead: {err}")
        else:
            return project(x_new, back.vec * (-1.0 / t))
    return _carry(cfg, x, step, eta, x_new)


def _beta(cfg: SolverConfig, grad: Tangent, grad_new: Tangent, carried_grad: Tangent) -> float:
    old_sq = float(torch.dot(grad.vec, grad.vec))
    new_sq = float(torch.dot(grad_new.vec, grad_new.vec))
    overlap = float(torch.dot(grad_new.vec, carried_grad.vec))
    # Powell restart: successive gradients far from orthogonal
    if abs(overlap) > cfg.powell_restart * new_sq:
        return 0.0
    if cfg.beta_rule is BetaRule.fletcher_reeves:
        return new_sq / old_sq
    return max(0.0, (new_sq - overlap) / old_sq)


def solve(
    prob: Problem,
    manifold: SpherePNorm,
    x0: Point,
    cfg: Optional[SolverConfig] = None,
) -> SolveResult:
    """Minimizes ``prob`` over ``manifold`` from ``x0`` by gradient descent or
    nonlinear conjugate gradient with a strong Wolfe line search.

    Stops when the Riemannian gradient norm drops to ``cfg.grad_tol`` or after
    ``cfg.max_iters`` iterations. A line-search failure on a steepest-descent
    direction ends the run with ``converged=False`` at the current (best) point, as
    do ``STAGNATION_PATIENCE`` iterations in a row that lower neither f nor the
    smallest gradient norm seen.
    """
    cfg = cfg or SolverConfig()
    if x0.manifold != manifold:
        raise InvalidInputError(f"starting point lives on {x0.manifold}, not on {manifold}")

    x = x0
    value = prob.value(x)
    grad = riemannian_gradient(prob, x)
    grad_norm = grad.norm
    trace = [TraceEvent(0, value, grad_norm, 0.0)]
    eta = -grad
    steepest = True
    prev_step = prev_slope = None
    restarts = 0
    iteration = 0
    best_grad_norm = grad_norm
    stalled = 0
    converged = False
    message = ""

    while True:
        if grad_norm <= cfg.grad_tol:
            converged = True
            message = "gradient tolerance reached"
            break
        if iteration >= cfg.max_iters:
            message = f"stopped after max_iters={cfg.max_iters}"
            break
        if stalled >= STAGNATION_PATIENCE:
            message = f"stagnated: no progress in {stalled} iterations"
            break

        slope = float(torch.dot(grad.vec, eta.vec))
        if not slope < 0:
            logger.debug(f"iteration {iteration}: not a descent direction, restarting")
            eta, steepest = -grad, True
            slope = -grad_norm * grad_norm
            restarts += 1

        t0 = cfg.initial_step
        if prev_step is not None and prev_slope is not None:
            guess = prev_step * prev_slope / slope
            if math.isfinite(guess) and guess > 0:
                t0 = min(guess, MAX_INITIAL_STEP)

        try:
            outcome = line_search_wolfe(prob, x, eta, cfg, t0=t0, value0=value, grad0=grad)
        except LineSearchError as err:
            if steepest:
                logger.warning(f"iteration {iteration}: line search failed on -grad f: {err}")
                message = f"line search failed: {err}"
                break
            logger.warning(f"iteration {iteration}: line search failed, restarting from -grad f")
            eta, steepest = -grad, True
            restarts += 1
            prev_step = prev_slope = None
            continue
        if not outcome.wolfe:
            logger.debug(f"iteration {iteration}: accepted fallback step t={outcome.step:.3e}")

        t = outcome.step
        x_new = outcome.point
        grad_new = outcome.gradient or riemannian_gradient(prob, x_new)

        if cfg.method is Method.gd:
            eta_new, steepest = -grad_new, True
        else:
            carried_grad = _carry(cfg, x, eta * t, grad, x_new)
            beta = _beta(cfg, grad, grad_new, carried_grad)
            if beta == 0.0:
                eta_new, steepest = -grad_new, True
            else:
                carried_eta = _carry_direction(cfg, x, eta, t, x_new)
                eta_new, steepest = -grad_new + carried_eta * beta, False

        prev_step, prev_slope = t, slope
        improved = outcome.value < value or grad_new.norm < best_grad_norm
        x, value, grad, eta = x_new, outcome.value, grad_new, eta_new
        grad_norm = grad.norm
        best_grad_norm = min(best_grad_norm, grad_norm)
        stalled = 0 if improved else stalled + 1
        iteration += 1
        trace.append(TraceEvent(iteration, value, grad_norm, t))
        if cfg.log_every and iteration % cfg.log_every == 0:
            logger.debug(
                f"{prob} | iter {iteration} | f {value:.12e} | |grad| {grad_norm:.3e} | t {t:.3e}"
            )

    result = SolveResult(
        point=x,
        objective=value,
        grad_norm=grad_norm,
        iterations=iteration,
        converged=converged,
        trace=trace,
        restarts=restarts,
        message=message,
    )
    if not converged:
        logger.warning(f"{prob}: not converged ({message}), |grad| = {grad_norm:.3e}")
    logger.info(
        f"{prob} on {manifold}: f = {value:.12e}, |grad| = {grad_norm:.3e}, "
        f"{iteration} iterations, converged={converged}"
    )
    log_event(
        "solve",
        descriptor=str(prob),
        manifold=str(manifold),
        iterations=iteration,
        objective=value,
        grad_norm=grad_norm,
        converged=converged,
    )
    return result


def solve_multistart(
    prob: Problem,
    manifold: SpherePNorm,
    cfg: Optional[SolverConfig] = None,
    starts: int = NNPCA_STARTS,
    sampler: Optional[Callable[[torch.Generator], Point]] = None,
    workers: int = 1,
) -> SolveResult:
    """Runs ``starts`` independent solves and keeps the lowest objective.

    Start i draws its point from a generator seeded with ``cfg.rng_seed + i``, so
    the outcome is the same for any number of ``workers``.
    """
    cfg = cfg or SolverConfig()
    if starts < 1:
        raise InvalidInputError("need at least one start")
    sampler = sampler or manifold.random_point

    def run(index: int) -> SolveResult:
        x0 = sampler(make_generator(cfg.rng_seed + index))
        return solve(prob, manifold, x0, cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(starts)))
    else:
        results = [run(index) for index in range(starts)]

    best = min(range(starts), key=lambda i: (results[i].objective, i))
    logger.info(
        f"{prob}: best of {starts} starts is #{best} with f = {results[best].objective:.12e}"
    )
    return results[best]
