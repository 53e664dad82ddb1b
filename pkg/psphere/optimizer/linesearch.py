"""Strong Wolfe line search on the sphere.

``strong_wolfe`` hands phi and phi' to scipy's scalar strong Wolfe search, in units
of the trial step so the caller's initial guess is tried first. When scipy gives
up, a step that really lowers phi is taken, and after that a step meeting the
approximate Wolfe conditions: |phi'(t)| <= c2 |phi'(0)| with phi(t) within
``APPROX_WOLFE_EPS * |phi(0)|`` of phi(0). That second test is what still works once
differences of phi are at rounding level near a minimizer.

``line_search_wolfe`` binds it to phi(t) = f(R_x(t eta)).
"""
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import torch
from loguru import logger
from scipy.optimize._linesearch import LineSearchWarning, scalar_search_wolfe2

from psphere.constants import APPROX_WOLFE_EPS
from psphere.exceptions import (
    LineSearchError,
    NotADescentDirectionError,
    NumericError,
    StepTooLargeError,
)
from psphere.manifold import Point, Tangent, TransportKind, retract, transport
from psphere.optimizer.problem import Problem, riemannian_gradient
from psphere.protocol import SolverConfig

SAFEGUARD = 0.1
EXPANSION = 2.0
EPS = torch.finfo(torch.float64).eps

# a None return from scipy is handled below
warnings.filterwarnings("ignore", category=LineSearchWarning)


@dataclass
class LineSearchOutcome:
    step: float
    value: float
    slope: Optional[float]
    evaluations: int
    wolfe: bool
    point: Optional[Point] = None
    gradient: Optional[Tangent] = None


class _BudgetExhausted(Exception):
    pass


def _slope_search(
    value_at: Callable[[float], float],
    slope_at: Callable[[float], float],
    phi0: float,
    dphi0: float,
    t0: float,
    c2: float,
    band: float,
) -> Optional[float]:
    """Locates |phi'(t)| <= c2 |phi'(0)| from the sign of phi', keeping phi(t) <= phi0 + band.

    Doubles t while phi' stays negative, then shrinks the bracket by safeguarded
    secant steps on phi'.
    """
    lo, slope_lo = 0.0, dphi0
    hi, slope_hi = None, None
    t = t0
    while True:
        value = value_at(t)
        if value > phi0 + band:
            hi, slope_hi = t, None
        else:
            slope = slope_at(t)
            if abs(slope) <= -c2 * dphi0:
                return t
            if slope > 0:
                hi, slope_hi = t, slope
            else:
                lo, slope_lo = t, slope
        if hi is None:
            t = EXPANSION * t
            continue
        width = hi - lo
        if width <= 4 * EPS * hi:
            return None
        t = 0.5 * (lo + hi)
        if slope_hi is not None and slope_hi != slope_lo:
            secant = lo - slope_lo * width / (slope_hi - slope_lo)
            if lo + SAFEGUARD * width <= secant <= hi - SAFEGUARD * width:
                t = secant
        if t <= lo or t >= hi:
            return None


def strong_wolfe(
    phi: Callable[[float], float],
    dphi: Callable[[float], float],
    phi0: float,
    dphi0: float,
    t0: float = 1.0,
    c1: float = 1e-4,
    c2: float = 0.1,
    max_evals: int = 60,
) -> LineSearchOutcome:
    """Finds t with phi(t) <= phi0 + c1 t dphi0 and |dphi(t)| <= c2 |dphi0|.

    Non-finite phi values are treated as overshooting. Without a strong Wolfe
    point the result has ``wolfe=False`` and is, in order of preference:

    * the lowest Armijo point below phi0 by more than the rounding band,
    * an approximate Wolfe point,
    * the lowest Armijo point strictly below phi0.

    ``LineSearchError`` is raised when none exists within ``max_evals`` evaluations of phi.
    """
    if not dphi0 < 0:
        raise NotADescentDirectionError(f"phi'(0) = {dphi0!r} is not negative")

    values: Dict[float, float] = {}
    slopes: Dict[float, float] = {}
    band = APPROX_WOLFE_EPS * abs(phi0)

    def value_at(t: float) -> float:
        t = float(t)
        if t not in values:
            if len(values) >= max_evals:
                raise _BudgetExhausted
            value = float(phi(t))
            values[t] = value if not math.isnan(value) else math.inf
        return values[t]

    def slope_at(t: float) -> float:
        t = float(t)
        if t not in slopes:
            slopes[t] = float(dphi(t))
        return slopes[t]

    def outcome(t: float, wolfe: bool) -> LineSearchOutcome:
        return LineSearchOutcome(t, values[t], slopes.get(t), len(values), wolfe)

    try:
        s, _, _, _ = scalar_search_wolfe2(
            lambda s: value_at(t0 * s),
            lambda s: t0 * slope_at(t0 * s),
            phi0=phi0,
            derphi0=t0 * dphi0,
            c1=c1,
            c2=c2,
            maxiter=max_evals,
        )
    except _BudgetExhausted:
        s = None
    if s is not None and math.isfinite(values.get(float(t0 * s), math.inf)):
        return outcome(float(t0 * s), True)

    def armijo_below(ceiling: float) -> Optional[float]:
        steps = [
            t for t, value in values.items()
            if value < ceiling and value <= phi0 + c1 * t * dphi0
        ]
        return min(steps, key=lambda t: (values[t], t)) if steps else None

    t = armijo_below(phi0 - band)
    if t is not None:
        return outcome(t, False)
    try:
        t = _slope_search(value_at, slope_at, phi0, dphi0, t0, c2, band)
    except _BudgetExhausted:
        t = None
    if t is not None:
        return outcome(t, False)
    t = armijo_below(phi0)
    if t is not None:
        return outcome(t, False)
    raise LineSearchError(f"no decrease and no approximate Wolfe step within {len(values)} evaluations")


def line_search_wolfe(
    prob: Problem,
    x: Point,
    eta: Tangent,
    cfg: SolverConfig,
    t0: Optional[float] = None,
    value0: Optional[float] = None,
    grad0: Optional[Tangent] = None,
) -> LineSearchOutcome:
    """Strong Wolfe search along t -> R_x(t eta) with the configured retraction.

    phi'(t) pairs grad f(R_x(t eta)) with the differentiated normalization
    retraction applied to eta, which is exact for the normalization retraction and
    agrees with the other retractions to first order.
    """
    if value0 is None:
        value0 = prob.value(x)
    if grad0 is None:
        grad0 = riemannian_gradient(prob, x)
    dphi0 = float(torch.dot(grad0.vec, eta.vec))
    if not dphi0 < 0:
        raise NotADescentDirectionError(f"<grad f(x), eta> = {dphi0!r} is not negative")

    points: Dict[float, Optional[Point]] = {}
    gradients: Dict[float, Tangent] = {}

    def phi(t: float) -> float:
        try:
            y = retract(cfg.retraction, x, eta * t)
        except (StepTooLargeError, NumericError) as err:
            logger.debug(f"retraction failed at t={t:.3e}: {err}")
            points[t] = None
            return math.inf
        points[t] = y
        return prob.value(y)

    def dphi(t: float) -> float:
        grad = riemannian_gradient(prob, points[t])
        gradients[t] = grad
        carried = transport(TransportKind.differentiated, x, eta * t, eta)
        return float(torch.dot(grad.vec, carried.vec))

    outcome = strong_wolfe(
        phi,
        dphi,
        value0,
        dphi0,
        t0=cfg.initial_step if t0 is None else t0,
        c1=cfg.wolfe_c1,
        c2=cfg.wolfe_c2,
        max_evals=cfg.max_linesearch_evals,
    )
    outcome.point = points[outcome.step]
    outcome.gradient = gradients.get(outcome.step)
    return outcome
