"""Retractions of the p-sphere and their inverses.

Three maps from T_x onto the sphere are provided:

* normalization: (x + eta) / ||x + eta||_p
* projective: the Euclidean projection of x + eta onto the unit p-ball
* orthographic: x + eta - alpha * n_x, moving back along the normal at x

The projective and orthographic maps have no closed form for general p and are
solved numerically with bracketed one-dimensional root finding.
"""
import math
from enum import Enum
from typing import Callable

import torch
from scipy.optimize import brentq

from psphere.constants import (
    BRACKET_MAX_DOUBLINGS,
    DTYPE,
    ORTHOGRAPHIC_MAX_ITERS,
    ORTHOGRAPHIC_MIN_SLACK,
    ORTHOGRAPHIC_ROOT_MATCH,
    PROJECTIVE_INNER_MAX_ITERS,
    PROJECTIVE_INNER_TOL,
    PROJECTIVE_OUTER_MAX_ITERS,
    PROJECTIVE_OUTER_TOL,
    RENORMALIZE_TOL,
    ZERO_FLUSH,
)
from psphere.core import pnorm, sign_power
from psphere.exceptions import (
    InvalidInputError,
    NumericError,
    OutOfDomainError,
    StepTooLargeError,
)
from psphere.manifold.sphere import Point, Tangent, normal_direction, same_base

EPS = torch.finfo(DTYPE).eps


class RetractionKind(Enum):
    normalization = "normalize"
    projective = "projective"
    orthographic = "orthographic"


def retract(kind: RetractionKind, x: Point, eta: Tangent) -> Point:
    same_base(x, eta)
    if eta.is_zero():
        return x
    if kind is RetractionKind.normalization:
        z = x.coords + eta.vec
        return Point.trusted(x.manifold, z / pnorm(z, x.manifold.p))
    if kind is RetractionKind.projective:
        return Point.trusted(x.manifold, project_onto_ball(x.coords + eta.vec, x.manifold.p))
    if kind is RetractionKind.orthographic:
        normal = normal_direction(x)
        alpha = orthographic_alpha(x.coords + eta.vec, normal, x.manifold.p)
        return Point(x.manifold, x.coords + eta.vec - alpha * normal)
    raise InvalidInputError(f"unknown retraction {kind!r}")


def inverse_retract(
    kind: RetractionKind, x: Point, y: Point, check_domain: bool = True
) -> Tangent:
    """Recovers eta with retract(kind, x, eta) = y.

    ``check_domain=False`` skips the orthographic root re-solve and trusts that y
    is close enough to x for the smallest root to be the right one.
    """
    if x.manifold != y.manifold:
        raise InvalidInputError(f"points live on {x.manifold} and {y.manifold}")
    if torch.equal(x.coords, y.coords):
        return Tangent.trusted(x, torch.zeros_like(x.coords))

    p = x.manifold.p
    normal_x = normal_direction(x)
    if kind is RetractionKind.normalization:
        scale = float(torch.dot(normal_x, y.coords))
        if scale <= 0.0:
            raise OutOfDomainError("<n_x, y> > 0", f"got {scale:.3e}")
        return Tangent(x, y.coords / scale - x.coords)

    if kind is RetractionKind.projective:
        normal_y = sign_power(y.coords, p)
        denom = float(torch.dot(normal_x, normal_y))
        if abs(denom) <= ZERO_FLUSH:
            raise OutOfDomainError("<n_x, n_y> != 0")
        alpha = (1.0 - float(torch.dot(normal_x, y.coords))) / denom
        if alpha < -PROJECTIVE_OUTER_TOL:
            raise OutOfDomainError("alpha_{x,y} >= 0", f"got {alpha:.3e}")
        return Tangent(x, y.coords - x.coords + max(alpha, 0.0) * normal_y)

    if kind is RetractionKind.orthographic:
        alpha = (1.0 - float(torch.dot(normal_x, y.coords))) / float(
            torch.dot(normal_x, normal_x)
        )
        eta = Tangent(x, y.coords - x.coords + alpha * normal_x)
        if check_domain:
            try:
                root = orthographic_alpha(x.coords + eta.vec, normal_x, p)
            except StepTooLargeError as err:
                raise OutOfDomainError(
                    "alpha_{x,y} is the smallest-|alpha| root", str(err)
                ) from err
            if abs(root - alpha) > ORTHOGRAPHIC_ROOT_MATCH * max(1.0, abs(alpha)):
                raise OutOfDomainError(
                    "alpha_{x,y} is the smallest-|alpha| root",
                    f"alpha_xy={alpha:.6e}, smallest root={root:.6e}",
                )
        return eta

    raise InvalidInputError(f"unknown retraction {kind!r}")


#### Projective retraction
def _power(t: torch.Tensor, q: float) -> torch.Tensor:
    """t^q for t >= 0 in log form; 0^q is 0, 1 or inf by the sign of q."""
    live = t > ZERO_FLUSH
    logs = torch.log(torch.where(live, t, torch.ones_like(t)))
    powered = torch.exp(q * logs)
    if q > 0:
        at_zero = 0.0
    elif q == 0:
        at_zero = 1.0
    else:
        at_zero = float("inf")
    return torch.where(live, powered, torch.full_like(t, at_zero))


def _shrink(a: torch.Tensor, kappa: float, p: float) -> torch.Tensor:
    """Solves t + kappa * t^(p-1) = a_i for t in [0, a_i], coordinate-wise.

    The left side is strictly increasing, so Newton steps are kept inside a
    bracket. A coordinate whose bracket did not halve on the previous step is
    bisected instead, which bounds the iteration count for any p.
    """
    if kappa == 0.0:
        return a.clone()
    lo = torch.zeros_like(a)
    hi = a.clone()
    width = hi - lo
    t = a / (1.0 + kappa)
    scale = max(1.0, float(a.max()))
    for _ in range(PROJECTIVE_INNER_MAX_ITERS):
        g = t + kappa * _power(t, p - 1.0) - a
        lo = torch.where(g < 0, t, lo)
        hi = torch.where(g > 0, t, hi)
        done = (g.abs() <= PROJECTIVE_INNER_TOL * scale) | (hi - lo <= 4 * EPS * scale)
        if bool(done.all()):
            return t
        slope = 1.0 + kappa * (p - 1.0) * _power(t, p - 2.0)
        newton = t - g / slope
        stalled = hi - lo > 0.5 * width
        inside = torch.isfinite(newton) & (newton > lo) & (newton < hi) & ~stalled
        width = hi - lo
        t = torch.where(done, t, torch.where(inside, newton, 0.5 * (lo + hi)))
    raise NumericError(
        f"scalar projection equation did not converge in {PROJECTIVE_INNER_MAX_ITERS} iterations"
    )


def _multiplier_guess(a: torch.Tensor, norm_c: float, p: float) -> float:
    """First-order estimate of the projection multiplier, from linearizing z(lambda) at 0."""
    m = float(a.max())
    spread = float((a / m).pow(2.0 * p - 2.0).sum())
    log_guess = (
        math.log(norm_c - 1.0) + (p - 1.0) * math.log(norm_c)
        - math.log(p) - (2.0 * p - 2.0) * math.log(m) - math.log(spread)
    )
    if not math.isfinite(log_guess):
        return 1.0
    return math.exp(min(max(log_guess, -600.0), 600.0))


def _root(
    f: Callable[[float], float], lo: float, hi: float, what: str,
    maxiter: int = PROJECTIVE_OUTER_MAX_ITERS,
) -> float:
    try:
        return brentq(
            f, lo, hi, xtol=ZERO_FLUSH, rtol=4 * EPS, maxiter=maxiter
        )
    except (RuntimeError, ValueError) as err:
        raise NumericError(f"{what}: {err}") from err


def project_onto_ball(c: torch.Tensor, p: float) -> torch.Tensor:
    """Euclidean projection of c onto the unit p-ball, landing on the sphere for ||c||_p > 1.

    The projection z satisfies z + lambda * p * sgn(z) |z|^(p-1) = c for a multiplier
    lambda >= 0. ||z(lambda)||_p decreases strictly in lambda; lambda is bracketed by
    doubling or halving and then found with Brent's method. Every inner solve starts
    cold, so the excess is a fixed function of lambda and the bracket signs hold.
    """
    norm_c = pnorm(c, p)
    if norm_c <= 1.0:
        return c.clone()
    if p == 2.0:
        return c / norm_c

    a = c.abs()
    sign = torch.sign(c)

    def excess(lam: float) -> float:
        return pnorm(_shrink(a, lam * p, p), p) - 1.0

    guess = _multiplier_guess(a, norm_c, p)
    lo, hi = 0.0, guess
    at_lo, at_hi = norm_c - 1.0, excess(guess)
    if at_hi > 0:
        for _ in range(BRACKET_MAX_DOUBLINGS):
            lo, at_lo = hi, at_hi
            hi = 2.0 * hi
            at_hi = excess(hi)
            if at_hi <= 0:
                break
        else:
            raise NumericError("could not bracket the projection multiplier from above")
    else:
        for _ in range(BRACKET_MAX_DOUBLINGS):
            half = excess(0.5 * hi)
            if half > 0:
                lo, at_lo = 0.5 * hi, half
                break
            hi, at_hi = 0.5 * hi, half

    if at_hi == 0.0:
        lam = hi
    elif at_lo <= 0.0 or at_hi > 0.0:
        raise NumericError(
            f"projection multiplier bracket [{lo:.3e}, {hi:.3e}] has excesses {at_lo:.3e}, {at_hi:.3e}"
        )
    else:
        lam = _root(excess, lo, hi, "projection multiplier")
    z = sign * _shrink(a, lam * p, p)
    residual = abs(pnorm(z, p) - 1.0)
    if residual > RENORMALIZE_TOL:
        raise NumericError(f"projection multiplier left a norm residual of {residual:.3e}")
    return z / pnorm(z, p)


#### Orthographic retraction
def _expand(predicate: Callable[[float], bool], origin: float, direction: float) -> float:
    """Walks away from ``origin`` with doubling steps until ``predicate`` holds."""
    step = 1.0
    for _ in range(BRACKET_MAX_DOUBLINGS):
        candidate = origin + direction * step
        if predicate(candidate):
            return candidate
        step *= 2.0
    raise NumericError("could not bracket the orthographic equation")


def orthographic_alpha(z: torch.Tensor, normal: torch.Tensor, p: float) -> float:
    """Smallest-|alpha| solution of ||z - alpha * normal||_p = 1.

    psi(alpha) = ||z - alpha * normal||_p is convex with psi(0) >= 1. Its minimizer is
    the root of the derivative, then one root of psi = 1 is bracketed on each side
    of it.
    """

    def excess(alpha: float) -> float:
        return pnorm(z - alpha * normal, p) - 1.0

    def slope(alpha: float) -> float:
        # same sign as d/d alpha psi; w is scaled before the power
        w = z - alpha * normal
        m = float(w.abs().max())
        if m == 0.0:
            return 0.0
        return -float(torch.dot(normal, sign_power(w / m, p)))

    slope0 = slope(0.0)
    if slope0 < 0:
        hi = _expand(lambda a: slope(a) >= 0, 0.0, 1.0)
        a_min = _root(slope, 0.0, hi, "orthographic minimizer", ORTHOGRAPHIC_MAX_ITERS)
    elif slope0 > 0:
        lo = _expand(lambda a: slope(a) <= 0, 0.0, -1.0)
        a_min = _root(slope, lo, 0.0, "orthographic minimizer", ORTHOGRAPHIC_MAX_ITERS)
    else:
        a_min = 0.0

    lowest = excess(a_min)
    if lowest > ORTHOGRAPHIC_MIN_SLACK:
        raise StepTooLargeError(
            f"min_alpha ||x + eta - alpha n_x||_p = {1.0 + lowest:.6e} > 1; shrink the step"
        )
    if lowest >= 0.0:
        return a_min

    outside = lambda a: excess(a) >= 0.0
    right_end = _expand(outside, a_min, 1.0)
    right = _root(excess, a_min, right_end, "orthographic root", ORTHOGRAPHIC_MAX_ITERS)
    left_end = _expand(outside, a_min, -1.0)
    left = _root(excess, left_end, a_min, "orthographic root", ORTHOGRAPHIC_MAX_ITERS)
    return left if abs(left) <= abs(right) else right
