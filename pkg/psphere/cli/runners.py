"""Experiment recipes behind the ``nnpca``, ``lasso`` and ``boxqp`` commands.

Each runner takes a validated RunSpec, writes a RunReport and returns the exit code.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import torch
from loguru import logger

import psphere
from psphere.cli.io import load_matrix, load_vector, write_report
from psphere.core import pnorm
from psphere.exceptions import PSphereError
from psphere.manifold import Point
from psphere.optimizer import SolverConfig, solve, solve_multistart
from psphere.problems import (
    BoxQpInstance,
    LassoInstance,
    NnpcaInstance,
    box_violation,
    boxqp_loss,
    boxqp_reference,
    default_bounds,
    ensure_infeasible,
    kkt_check,
    lasso_design,
    lasso_loss,
    lasso_problem,
    nnpca_lift,
    nnpca_objective_lifted,
    nnpca_problem,
    oracle_gap,
    random_spd,
    solve_sweep,
    sparsity_count,
    support,
    unconstrained_minimizer,
    unregularized_solution,
)
from psphere.constants import DTYPE, LASSO_C_LIST, NNPCA_POSITIVE_SHIFT
from psphere.protocol import RunReport, RunSpec, SolutionRecord
from psphere.utils import Stats, make_generator, output_log, sh, to_list

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
EXIT_NO_INSTANCE = 3


def _report(spec: RunSpec, solutions: List[SolutionRecord], **diagnostics) -> RunReport:
    return RunReport(
        command=spec.command,
        version=psphere.__version__,
        spec=spec.model_dump(mode="json"),
        solutions=solutions,
        diagnostics=diagnostics,
    )


def _summary(stats: Stats) -> None:
    output_log(
        f"{sh('Solves')} -> {stats.solves} ({stats.converged} converged, "
        f"{stats.failures} not) in {stats.elapsed:.2f}s",
        "g" if not stats.failures else "y",
    )


#### Nonnegative PCA
def nnpca_instance(spec: RunSpec, generator: torch.Generator) -> NnpcaInstance:
    n = spec.n or 10
    if spec.fixture == "random":
        return NnpcaInstance.random(n, generator)
    if spec.fixture == "diag":
        return NnpcaInstance.diagonal(n)
    if spec.fixture == "identity":
        return NnpcaInstance.identity(n)
    if spec.fixture == "file":
        if not spec.matrix:
            raise ValueError("--fixture file needs --matrix")
        return NnpcaInstance(load_matrix(spec.matrix))
    raise ValueError(f"unknown nnpca fixture {spec.fixture!r}")


def run_nnpca(spec: RunSpec) -> int:
    stats = Stats()
    inst = nnpca_instance(spec, make_generator(spec.seed))
    manifold = inst.manifold
    output_log(f"{sh('NNPCA')} -> n={inst.n}, fixture={spec.fixture}, starts={spec.starts}", "c")

    result = solve_multistart(
        nnpca_problem(inst),
        manifold,
        spec.solver,
        starts=spec.starts,
        sampler=lambda gen: manifold.random_positive_point(gen, NNPCA_POSITIVE_SHIFT),
        workers=spec.workers,
    )
    stats.record(result.converged)

    v = nnpca_lift(result.point)
    kkt = kkt_check(inst, v, spec.kkt_tol)
    sparse = sparsity_count(v, spec.sparsity_threshold)
    objective = nnpca_objective_lifted(inst, v)
    record = SolutionRecord(
        label="nnpca",
        vector=to_list(v),
        objective=objective,
        grad_norm=result.grad_norm,
        iterations=result.iterations,
        converged=result.converged,
        diagnostics={
            "x": to_list(result.point.coords),
            "kkt": kkt.to_dict(),
            "kkt_passed": kkt.passed,
            "sparsity_count": sparse,
            "sparsity_threshold": spec.sparsity_threshold,
            "restarts": result.restarts,
            "message": result.message,
        },
    )
    write_report(_report(spec, [record], n=inst.n), spec.out, spec.format)

    output_log(f"{sh('Objective')} -> {objective:.12e}")
    output_log(
        f"{sh('KKT')} -> {'passed' if kkt.passed else 'FAILED'} "
        f"(stationarity {kkt.residual_stationarity:.2e}, mu {kkt.multiplier_mu:.6f})",
        "g" if kkt.passed else "r",
    )
    output_log(f"{sh('Sparsity')} -> {sparse} of {inst.n} entries below {spec.sparsity_threshold:g}")
    _summary(stats)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


#### Sphere-constrained Lasso
def lasso_data(spec: RunSpec, generator: torch.Generator):
    """(X, y, w_true); w_true is None for data read from files."""
    if spec.fixture == "file":
        if not spec.matrix or not spec.vector:
            raise ValueError("--fixture file needs --matrix and --vector")
        return load_matrix(spec.matrix), load_vector(spec.vector), None
    X, y, w_true = lasso_design(generator, spec.m, spec.n)
    if spec.fixture == "zero-response":
        y = torch.zeros_like(y)
    elif spec.fixture != "random":
        raise ValueError(f"unknown lasso fixture {spec.fixture!r}")
    return X, y, w_true


def _lasso_start(inst: LassoInstance, baseline: Optional[torch.Tensor], cfg: SolverConfig) -> Point:
    """Direction of the least-squares solution, or a seeded random point."""
    manifold = inst.manifold
    if baseline is not None and bool(baseline.any()):
        return Point(manifold, baseline / pnorm(baseline, manifold.p))
    return manifold.random_point(make_generator(cfg.rng_seed))


def _solve_lasso_member(
    X: torch.Tensor,
    y: torch.Tensor,
    C: float,
    spec: RunSpec,
    baseline: Optional[torch.Tensor],
    w_true: Optional[torch.Tensor],
) -> SolutionRecord:
    inst = LassoInstance(X, y, C, 1.0 + spec.eps)
    result = solve(lasso_problem(inst), inst.manifold, _lasso_start(inst, baseline, spec.solver), spec.solver)
    w = C * result.point.coords
    chosen = support(w, spec.support_threshold)

    diagnostics = {
        "C": C,
        "x": to_list(result.point.coords),
        "support": chosen,
        "l1_norm": float(w.abs().sum()),
        "message": result.message,
    }
    try:
        gap = oracle_gap(X, y, w)
        diagnostics.update(
            matched_lambda=gap.lam,
            penalized_objective=gap.objective,
            oracle_objective=gap.oracle_objective,
            oracle_relative_gap=gap.relative_gap,
        )
    except PSphereError as err:
        logger.warning(f"C={C:g}: no coordinate-descent comparison ({err})")

    if w_true is not None:
        inactive = w_true == 0
        diagnostics["inactive_small"] = bool((w[inactive].abs() <= spec.support_threshold).all())
        diagnostics["active_large"] = bool((w[~inactive].abs() > 0.1).all())

    return SolutionRecord(
        label=f"C={C:g}",
        vector=to_list(w),
        objective=result.objective,
        grad_norm=result.grad_norm,
        iterations=result.iterations,
        converged=result.converged,
        diagnostics=diagnostics,
    )


def run_lasso(spec: RunSpec) -> int:
    stats = Stats()
    X, y, w_true = lasso_data(spec, make_generator(spec.seed))
    radii = list(spec.C) or list(LASSO_C_LIST)
    output_log(
        f"{sh('Lasso')} -> m={X.shape[0]}, n={X.shape[1]}, p=1+{spec.eps:g}, "
        f"C in {[float(c) for c in radii]}",
        "c",
    )

    baseline = unregularized_solution(X, y)
    if baseline is None:
        output_log(f"{sh('Baseline')} -> X^T X is singular, skipping", "y", type="warning")

    def member(C: float) -> SolutionRecord:
        return _solve_lasso_member(X, y, C, spec, baseline, w_true)

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            records = list(pool.map(member, radii))
    else:
        records = [member(C) for C in radii]

    for record in records:
        stats.record(bool(record.converged))
        output_log(
            f"{sh(record.label)} -> f {record.objective:.6e} | support {record.diagnostics['support']}",
            "g" if record.converged else "y",
        )

    if baseline is not None:
        records.append(
            SolutionRecord(
                label="unregularized",
                vector=to_list(baseline),
                objective=lasso_loss(X, y, baseline),
                diagnostics={"l1_norm": float(baseline.abs().sum())},
            )
        )
    diagnostics = {"m": X.shape[0], "n": X.shape[1], "p": 1.0 + spec.eps}
    if w_true is not None:
        diagnostics["w_true"] = to_list(w_true)
    write_report(_report(spec, records, **diagnostics), spec.out, spec.format)
    _summary(stats)
    return EXIT_OK


#### Box-constrained QP
def boxqp_instance(spec: RunSpec, generator: torch.Generator) -> BoxQpInstance:
    """Builds A, c and the bounds; raises InstanceGenerationError when -A^-1 c stays feasible."""
    if spec.fixture == "file":
        if not spec.matrix or not spec.vector:
            raise ValueError("--fixture file needs --matrix and --vector")
        A, c = load_matrix(spec.matrix), load_vector(spec.vector)
        n = A.shape[0]
    else:
        n = spec.n or 10
        if spec.fixture == "random":
            A = random_spd(n, generator)
        elif spec.fixture == "feasible":
            A = torch.eye(n, dtype=DTYPE)
        else:
            raise ValueError(f"unknown boxqp fixture {spec.fixture!r}")
        c = None

    if spec.lower is not None:
        lower = torch.tensor(spec.lower, dtype=DTYPE)
        upper = torch.tensor(spec.upper, dtype=DTYPE)
        if lower.numel() != n:
            raise ValueError(f"bounds have {lower.numel()} entries, the instance has n={n}")
    else:
        lower, upper = default_bounds(n)

    if c is None:
        if spec.fixture == "feasible":
            c = torch.zeros(n, dtype=DTYPE)
        else:
            scale = float(torch.maximum(lower.abs(), upper.abs()).max())
            c = scale * torch.randn(n, generator=generator, dtype=DTYPE)
    c = ensure_infeasible(A, c, lower, upper, generator, spec.retries)
    return BoxQpInstance(A, c, lower, upper, spec.p[0])


def run_boxqp(spec: RunSpec) -> int:
    stats = Stats()
    inst = boxqp_instance(spec, make_generator(spec.seed))
    output_log(f"{sh('Box QP')} -> n={inst.n}, p in {list(spec.p)}", "c")

    reference = boxqp_reference(inst)
    entries = solve_sweep(inst, spec.p, spec.solver, reference)

    records = []
    for entry in entries:
        stats.record(entry.result.converged)
        records.append(
            SolutionRecord(
                label=f"p={entry.p:g}",
                vector=to_list(entry.w),
                objective=boxqp_loss(inst, entry.w),
                grad_norm=entry.result.grad_norm,
                iterations=entry.result.iterations,
                converged=entry.result.converged,
                diagnostics={
                    "p": entry.p,
                    "x": to_list(entry.result.point.coords),
                    "distance": entry.distance,
                    "violation": entry.violation,
                    "message": entry.result.message,
                },
            )
        )
        output_log(
            f"{sh(f'p={entry.p:g}')} -> |w_p - w_ref| = {entry.distance:.6e}, "
            f"violation {entry.violation:.2e}",
            "g" if entry.result.converged else "y",
        )

    distances = [entry.distance for entry in entries]
    decreasing = all(a > b for a, b in zip(distances, distances[1:]))
    if not decreasing:
        output_log(f"{sh('Trend')} -> distances do not decrease strictly in p", "y", type="warning")
    records.append(
        SolutionRecord(
            label="reference",
            vector=to_list(reference),
            objective=boxqp_loss(inst, reference),
            diagnostics={"violation": box_violation(reference, inst.l, inst.u)},
        )
    )
    write_report(
        _report(
            spec,
            records,
            n=inst.n,
            lower=to_list(inst.l),
            upper=to_list(inst.u),
            unconstrained_minimizer=to_list(unconstrained_minimizer(inst.A, inst.c)),
            distances=distances,
            distances_strictly_decreasing=decreasing,
        ),
        spec.out,
        spec.format,
    )
    _summary(stats)
    return EXIT_OK
