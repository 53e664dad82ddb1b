"""Randomized property checks of the sphere geometry over a (p, n) grid.

Every check records the worst residual seen; a check passes when that residual is
finite and within its tolerance.
"""
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

import pandas as pd
import torch

import psphere
from psphere.cli.io import write_report
from psphere.constants import (
    DTYPE,
    FD_STEP,
    GEOMCHECK_CLOSED_FORM_RADIUS,
    GEOMCHECK_DOMAIN_COVERAGE,
    GEOMCHECK_EXIT_FAILED,
    GEOMCHECK_FD_MAX_P,
    GEOMCHECK_N_LIST,
    GEOMCHECK_P_LIST,
    GEOMCHECK_RIGIDITY_STEPS,
    GEOMCHECK_RIGIDITY_TRIALS,
    GEOMCHECK_STEP_RADIUS,
    GEOMCHECK_STRICT_MARGIN_MAX_P,
    TOL_BALL_MARGIN,
    TOL_CLOSED_FORM,
    TOL_IDEMPOTENCE,
    TOL_LINEARITY,
    TOL_MEMBERSHIP,
    TOL_RIGIDITY_RATIO,
    TOL_ROUND_TRIP,
    TOL_TANGENCY,
    TOL_TRANSPORT_FD,
)
from psphere.core import pnorm
from psphere.exceptions import NumericError, OutOfDomainError, StepTooLargeError
from psphere.manifold import (
    RetractionKind,
    SpherePNorm,
    TransportKind,
    inverse_retract,
    membership_residual,
    project,
    retract,
    tangency_residual,
    transport,
)
from psphere.protocol import RunReport, RunSpec
from psphere.utils import Stats, make_generator, output_log, sh

TOLERANCES = {
    "membership": TOL_MEMBERSHIP,
    "tangency_projection": TOL_TANGENCY,
    "projection_idempotence": TOL_IDEMPOTENCE,
    "tangent_step_leaves_ball": TOL_BALL_MARGIN,
    "retraction_at_zero": 0.0,
    "inverse_round_trip": TOL_ROUND_TRIP,
    "tangency_transport": TOL_TANGENCY,
    "transport_linearity": TOL_LINEARITY,
    "differentiated_transport_fd": TOL_TRANSPORT_FD,
    "first_order_rigidity": TOL_RIGIDITY_RATIO,
    "p2_projective_is_normalization": TOL_CLOSED_FORM,
    "p2_orthographic_closed_form": TOL_CLOSED_FORM,
    "inverse_domain_coverage": 1.0 - GEOMCHECK_DOMAIN_COVERAGE,
}
# checks whose tolerance depends on the variant
VARIANT_TOLERANCES = {
    ("tangent_step_leaves_ball", "strict"): 0.0,
}
EPS = torch.finfo(DTYPE).eps


def tolerance(check: str, variant: str = "") -> float:
    return VARIANT_TOLERANCES.get((check, variant), TOLERANCES[check])


@dataclass
class CheckRow:
    check: str
    variant: str
    p: Optional[float]
    n: Optional[int]
    worst: float
    tol: float
    cases: int

    @property
    def passed(self) -> bool:
        return math.isfinite(self.worst) and self.worst <= self.tol

    def to_dict(self) -> dict:
        row = asdict(self)
        row["worst"] = self.worst if math.isfinite(self.worst) else None
        row["passed"] = self.passed
        return row


class _Worst:
    """Running worst residual per (check, variant); NaN counts as inf."""

    def __init__(self):
        self.values: Dict[tuple, float] = {}
        self.cases: Dict[tuple, int] = defaultdict(int)

    def add(self, check: str, residual: float, variant: str = "") -> None:
        residual = float(residual)
        if not math.isfinite(residual):
            residual = math.inf
        key = (check, variant)
        self.values[key] = max(self.values.get(key, 0.0), residual)
        self.cases[key] += 1

    def rows(self, p: float, n: int) -> List[CheckRow]:
        return [
            CheckRow(check, variant, p, n, worst, tolerance(check, variant), self.cases[(check, variant)])
            for (check, variant), worst in sorted(self.values.items())
        ]


def _gap(a: torch.Tensor, b: torch.Tensor) -> float:
    return float((a - b).abs().max())


def _uniform(generator: torch.Generator) -> float:
    """Uniform on (0, 1]."""
    return 1.0 - float(torch.rand((), generator=generator, dtype=DTYPE))


def _ball_margin(norm: float, p: float) -> tuple:
    """(residual, variant) for ||x + eta||_p against 1.

    Up to GEOMCHECK_STRICT_MARGIN_MAX_P the inequality must hold strictly; above
    it the excess can sit below rounding and only 1 - norm is bounded.
    """
    if p <= GEOMCHECK_STRICT_MARGIN_MAX_P:
        return (0.0 if norm > 1.0 else max(1.0 - norm, EPS)), "strict"
    return max(0.0, 1.0 - norm), "relaxed"


def check_grid_point(
    p: float, n: int, trials: int, generator: torch.Generator
) -> tuple:
    """Runs every check at one (p, n); returns (rows, in_domain, attempted, rejected)."""
    manifold = SpherePNorm(n, p)
    worst = _Worst()
    in_domain: Dict[str, int] = defaultdict(int)
    attempted: Dict[str, int] = defaultdict(int)
    rejected: Dict[str, int] = defaultdict(int)

    for trial in range(trials):
        x = manifold.random_point(generator)
        d = torch.randn(n, generator=generator, dtype=DTYPE)
        projected = project(x, d)
        worst.add("tangency_projection", tangency_residual(x, projected.vec))
        worst.add("projection_idempotence", _gap(project(x, projected.vec).vec, projected.vec))

        eta = manifold.random_tangent(x, generator, GEOMCHECK_STEP_RADIUS * _uniform(generator))
        xi = manifold.random_tangent(x, generator)
        zeta = manifold.random_tangent(x, generator)
        worst.add("tangent_step_leaves_ball", *_ball_margin(pnorm(x.coords + eta.vec, p), p))

        for kind in RetractionKind:
            name = kind.value
            worst.add("retraction_at_zero", _gap(retract(kind, x, manifold.zero_tangent(x)).coords, x.coords), name)
            try:
                y = retract(kind, x, eta)
            except StepTooLargeError:
                rejected[name] += 1
                continue
            except NumericError as err:
                output_log(f"{sh('Unsolved')} -> {name} p={p:g} n={n}: {err}", "r", type="debug")
                worst.add("membership", math.inf, name)
                continue
            worst.add("membership", membership_residual(y.coords, p), name)
            attempted[name] += 1
            try:
                back = inverse_retract(kind, x, y)
            except OutOfDomainError:
                continue
            except NumericError:
                worst.add("inverse_round_trip", math.inf, name)
                continue
            in_domain[name] += 1
            try:
                again = retract(kind, x, back).coords
                worst.add("inverse_round_trip", _gap(again, y.coords), name)
            except (StepTooLargeError, NumericError):
                worst.add("inverse_round_trip", math.inf, name)

        for kind in TransportKind:
            name = kind.value
            moved = transport(kind, x, eta, xi)
            worst.add("tangency_transport", tangency_residual(moved.base, moved.vec), name)
            combined = transport(kind, x, eta, xi * 0.7 + zeta * -1.3).vec
            expected = 0.7 * moved.vec - 1.3 * transport(kind, x, eta, zeta).vec
            scale = max(1.0, float(torch.linalg.vector_norm(expected)))
            worst.add("transport_linearity", _gap(combined, expected) / scale, name)

        if p <= GEOMCHECK_FD_MAX_P:
            normalize = RetractionKind.normalization
            plus = retract(normalize, x, eta + xi * FD_STEP).coords
            minus = retract(normalize, x, eta - xi * FD_STEP).coords
            central = (plus - minus) / (2.0 * FD_STEP)
            exact = transport(TransportKind.differentiated, x, eta, xi).vec
            size = max(float(torch.linalg.vector_norm(exact)), 1e-12)
            worst.add("differentiated_transport_fd", float(torch.linalg.vector_norm(central - exact)) / size)

        if p == 2.0:
            worst.add(
                "p2_projective_is_normalization",
                _gap(
                    retract(RetractionKind.projective, x, eta).coords,
                    retract(RetractionKind.normalization, x, eta).coords,
                ),
            )
            long_step = manifold.random_tangent(
                x, generator, GEOMCHECK_CLOSED_FORM_RADIUS * _uniform(generator)
            )
            closed = math.sqrt(1.0 - float(long_step.vec @ long_step.vec)) * x.coords + long_step.vec
            worst.add(
                "p2_orthographic_closed_form",
                _gap(retract(RetractionKind.orthographic, x, long_step).coords, closed),
            )

        if trial < GEOMCHECK_RIGIDITY_TRIALS:
            direction = manifold.random_tangent(x, generator, 0.5)
            for kind in RetractionKind:
                errors = []
                for t in GEOMCHECK_RIGIDITY_STEPS:
                    try:
                        stepped = retract(kind, x, direction * t).coords
                    except (StepTooLargeError, NumericError):
                        errors.append(math.inf)
                        continue
                    errors.append(float(torch.linalg.vector_norm((stepped - x.coords) / t - direction.vec)))
                if not all(math.isfinite(e) for e in errors):
                    ratio = math.inf
                elif errors[0] <= 1e-9:
                    # rounding level, nothing to compare
                    ratio = 0.0
                else:
                    ratio = errors[-1] / errors[0]
                worst.add("first_order_rigidity", ratio, kind.value)

    return worst.rows(p, n), in_domain, attempted, rejected


def geometry_suite(p_list: List[float], n_list: List[int], trials: int, seed: int = 0) -> List[CheckRow]:
    """All checks over the grid, plus one domain-coverage row per retraction."""
    rows: List[CheckRow] = []
    in_domain: Dict[str, int] = defaultdict(int)
    attempted: Dict[str, int] = defaultdict(int)
    for index, (p, n) in enumerate((p, n) for p in p_list for n in n_list):
        grid_rows, hits, tries, rejected = check_grid_point(p, n, trials, make_generator(seed + index))
        rows.extend(grid_rows)
        for name, count in hits.items():
            in_domain[name] += count
        for name, count in tries.items():
            attempted[name] += count
        if rejected:
            output_log(f"{sh('Rejected')} -> p={p:g} n={n}: {dict(rejected)} steps too large", "y", type="debug")

    for kind in RetractionKind:
        tries = attempted[kind.value]
        coverage = in_domain[kind.value] / tries if tries else 1.0
        rows.append(
            CheckRow(
                "inverse_domain_coverage", kind.value, None, None,
                1.0 - coverage, TOLERANCES["inverse_domain_coverage"], tries,
            )
        )
    return rows


def checks_frame(rows: List[CheckRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.to_dict() for row in rows])
    frame["worst"] = frame["worst"].astype(float).fillna(math.inf)
    return frame


def summary_records(rows: List[CheckRow]) -> List[dict]:
    """Worst residual per (check, variant) over the whole grid, as plain python values."""
    summary = (
        checks_frame(rows)
        .groupby(["check", "variant"], sort=True)
        .agg(worst=("worst", "max"), tol=("tol", "first"), cases=("cases", "sum"), passed=("passed", "all"))
        .reset_index()
    )
    return [
        {
            "check": str(record.check),
            "variant": str(record.variant),
            "worst": float(record.worst) if math.isfinite(record.worst) else None,
            "tol": float(record.tol),
            "cases": int(record.cases),
            "passed": bool(record.passed),
        }
        for record in summary.itertuples(index=False)
    ]


def run_geomcheck(spec: RunSpec) -> int:
    stats = Stats()
    p_list = list(spec.p) or list(GEOMCHECK_P_LIST)
    n_list = list(spec.n_list) or list(GEOMCHECK_N_LIST)
    output_log(f"{sh('Geomcheck')} -> p in {p_list}, n in {n_list}, {spec.trials} trials each", "c")

    rows = geometry_suite(p_list, n_list, spec.trials, spec.seed)
    summary = summary_records(rows)
    for record in summary:
        label = f"{record['check']}[{record['variant']}]" if record["variant"] else record["check"]
        worst = record["worst"] if record["worst"] is not None else math.inf
        output_log(
            f"{label: <44} worst {worst:.3e}  tol {record['tol']:.1e}  "
            f"{'ok' if record['passed'] else 'FAILED'}",
            "g" if record["passed"] else "r",
        )

    passed = all(row.passed for row in rows)
    report = RunReport(
        command=spec.command,
        version=psphere.__version__,
        spec=spec.model_dump(mode="json"),
        diagnostics={
            "passed": passed,
            "summary": summary,
            "checks": [row.to_dict() for row in rows],
        },
    )
    write_report(report, spec.out, spec.format, frame=checks_frame(rows))
    failed = sum(not record["passed"] for record in summary)
    output_log(
        f"{sh('Checks')} -> {len(summary) - failed} of {len(summary)} passed in {stats.elapsed:.2f}s",
        "g" if passed else "r",
    )
    return 0 if passed else GEOMCHECK_EXIT_FAILED
