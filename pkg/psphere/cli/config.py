import argparse
import os
import sys
from typing import Callable, List

from loguru import logger

from psphere.constants import (
    BOXQP_P_LIST,
    BOXQP_RETRIES,
    EVENTS_FILE,
    EVENTS_LEVEL,
    EVENTS_RETENTION_SIZE,
    GEOMCHECK_N_LIST,
    GEOMCHECK_P_LIST,
    GEOMCHECK_TRIALS,
    GRAD_TOL,
    KKT_TOL,
    LASSO_C_LIST,
    LASSO_EPS,
    LASSO_M,
    LASSO_N,
    LASSO_SUPPORT_THRESHOLD,
    MAX_ITERS,
    NNPCA_STARTS,
    SPARSITY_THRESHOLD,
    WOLFE_C1,
    WOLFE_C2,
)
from psphere.exceptions import InvalidInputError
from psphere.protocol import RunSpec, SolverConfig

COMMANDS = ("nnpca", "lasso", "boxqp", "geomcheck")


class ArgumentParser(argparse.ArgumentParser):
    """argparse without the exit(2); bad arguments surface as InvalidInputError."""

    def error(self, message):
        raise InvalidInputError(f"{self.prog}: {message}")


def _list_of(cast: Callable) -> Callable[[str], List]:
    def parse(text: str) -> List:
        try:
            return [cast(item) for item in text.split(",") if item.strip()]
        except ValueError as err:
            raise argparse.ArgumentTypeError(f"bad list {text!r}: {err}") from err

    return parse


def check_config(spec: RunSpec) -> None:
    r"""Configures the loguru sinks and output locations for a validated run."""
    logger.remove()
    logger.add(
        sys.stderr,
        level="DEBUG" if spec.debug else "INFO",
        colorize=not os.environ.get("NO_COLOR"),
        filter=lambda record: record["level"].name != EVENTS_LEVEL,
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {message}",
    )

    if spec.out:
        parent = os.path.dirname(os.path.abspath(os.path.expanduser(spec.out)))
        os.makedirs(parent, exist_ok=True)

    if spec.log_dir:
        full_path = os.path.expanduser(spec.log_dir)
        if not os.path.exists(full_path):
            os.makedirs(full_path, exist_ok=True)

        # Add custom event logger for the events.
        logger.add(
            os.path.join(full_path, EVENTS_FILE),
            rotation=EVENTS_RETENTION_SIZE,
            serialize=True,
            enqueue=True,
            backtrace=False,
            diagnose=False,
            level=EVENTS_LEVEL,
            filter=lambda record: record["level"].name == EVENTS_LEVEL,
            format="{time:YYYY-MM-DD at HH:mm:ss} | {level} | {message}",
        )


def add_args(parser):
    parser.add_argument("--seed", type=int, help="Seed for every random draw of the run.", default=0)
    parser.add_argument("--out", type=str, help="Result file; stdout when omitted.", default=None)
    parser.add_argument(
        "--format", type=str, choices=["json", "csv"], help="Result file format.", default="json"
    )
    parser.add_argument(
        "--log-dir",
        type=str,
        help="Directory for the structured events log (one JSON record per line).",
        default=None,
    )
    parser.add_argument("--debug", action="store_true", help="Log at debug level.", default=False)
    parser.add_argument(
        "--workers", type=int, help="Threads for independent solves.", default=1
    )


def add_solver_args(parser):
    parser.add_argument("--method", type=str, choices=["gd", "cg"], default="cg")
    parser.add_argument(
        "--retraction",
        type=str,
        choices=["normalize", "projective", "orthographic"],
        help="Retraction used to step along tangent directions.",
        default="normalize",
    )
    parser.add_argument(
        "--transport",
        type=str,
        choices=["diffret", "projection"],
        help="Vector transport carrying the CG direction.",
        default="diffret",
    )
    parser.add_argument(
        "--beta", type=str, choices=["fr", "prplus"], help="CG beta rule.", default="fr"
    )
    parser.add_argument(
        "--inverse-beta",
        action="store_true",
        help="Carry the previous direction with the inverse retraction.",
        default=False,
    )
    parser.add_argument("--tol", type=float, help="Riemannian gradient tolerance.", default=GRAD_TOL)
    parser.add_argument("--max-iters", type=int, default=MAX_ITERS)
    parser.add_argument("--c1", type=float, help="Armijo constant.", default=WOLFE_C1)
    parser.add_argument("--c2", type=float, help="Strong Wolfe curvature constant.", default=WOLFE_C2)
    parser.add_argument(
        "--log-every", type=int, help="Debug line every k iterations (0 disables).", default=0
    )


def add_nnpca_args(parser):
    parser.add_argument("--n", type=int, help="Dimension of the random fixture.", default=10)
    parser.add_argument("--starts", type=int, help="Random restarts.", default=NNPCA_STARTS)
    parser.add_argument(
        "--fixture",
        type=str,
        choices=["random", "diag", "identity", "file"],
        help="random SPD, diag(n..1), the identity, or --matrix.",
        default="random",
    )
    parser.add_argument("--matrix", type=str, help="CSV file holding A.", default=None)
    parser.add_argument("--kkt-tol", type=float, default=KKT_TOL)
    parser.add_argument("--sparsity-threshold", type=float, default=SPARSITY_THRESHOLD)


def add_lasso_args(parser):
    parser.add_argument("--m", type=int, help="Samples of the synthetic design.", default=LASSO_M)
    parser.add_argument("--n", type=int, help="Features of the synthetic design.", default=LASSO_N)
    parser.add_argument(
        "--C", type=_list_of(float), help="Comma-separated l1 radii.", default=list(LASSO_C_LIST)
    )
    parser.add_argument("--eps", type=float, help="The sphere uses p = 1 + eps.", default=LASSO_EPS)
    parser.add_argument(
        "--fixture",
        type=str,
        choices=["random", "zero-response", "file"],
        help="Synthetic design, the same design with y = 0, or --matrix/--vector.",
        default="random",
    )
    parser.add_argument("--matrix", type=str, help="CSV file holding X.", default=None)
    parser.add_argument("--vector", type=str, help="CSV file holding y.", default=None)
    parser.add_argument("--support-threshold", type=float, default=LASSO_SUPPORT_THRESHOLD)


def add_boxqp_args(parser):
    parser.add_argument("--n", type=int, help="Dimension of the random fixture.", default=10)
    parser.add_argument(
        "--p", type=_list_of(float), help="Comma-separated exponents, solved in order.",
        default=list(BOXQP_P_LIST),
    )
    parser.add_argument("--lower", type=_list_of(float), help="Lower bounds (use --lower=-1,-2).", default=None)
    parser.add_argument("--upper", type=_list_of(float), help="Upper bounds.", default=None)
    parser.add_argument(
        "--fixture",
        type=str,
        choices=["random", "feasible", "file"],
        help="random SPD, A = I with c = 0, or --matrix/--vector.",
        default="random",
    )
    parser.add_argument("--matrix", type=str, help="CSV file holding A.", default=None)
    parser.add_argument("--vector", type=str, help="CSV file holding c.", default=None)
    parser.add_argument(
        "--retries", type=int, help="Redraws of c while -A^-1 c is feasible.", default=BOXQP_RETRIES
    )


def add_geomcheck_args(parser):
    parser.add_argument(
        "--p", type=_list_of(float), help="Comma-separated exponents.", default=list(GEOMCHECK_P_LIST)
    )
    parser.add_argument(
        "--n", dest="n_list", type=_list_of(int), help="Comma-separated dimensions.",
        default=list(GEOMCHECK_N_LIST),
    )
    parser.add_argument("--trials", type=int, help="Random cases per (p, n).", default=GEOMCHECK_TRIALS)


def config():
    parser = ArgumentParser(prog="psphere", description="Riemannian optimization on p-spheres.")
    commands = parser.add_subparsers(dest="command", required=True)

    nnpca = commands.add_parser("nnpca", help="Nonnegative PCA through the 4-sphere lift.")
    add_args(nnpca)
    add_solver_args(nnpca)
    add_nnpca_args(nnpca)

    lasso = commands.add_parser("lasso", help="l1-constrained least squares on the (1+eps)-sphere.")
    add_args(lasso)
    add_solver_args(lasso)
    add_lasso_args(lasso)

    boxqp = commands.add_parser("boxqp", help="Box-constrained QP on a sweep of p-spheres.")
    add_args(boxqp)
    add_solver_args(boxqp)
    add_boxqp_args(boxqp)

    geomcheck = commands.add_parser("geomcheck", help="Property checks of the sphere geometry.")
    add_args(geomcheck)
    add_geomcheck_args(geomcheck)
    return parser


def build_spec(args: argparse.Namespace) -> RunSpec:
    """Validates the parsed namespace into a RunSpec; pydantic errors propagate."""
    values = vars(args)
    solver = None
    if "method" in values:
        solver = SolverConfig(
            method=args.method,
            retraction=args.retraction,
            transport=args.transport,
            beta_rule=args.beta,
            grad_tol=args.tol,
            max_iters=args.max_iters,
            wolfe_c1=args.c1,
            wolfe_c2=args.c2,
            # instance draws use seed itself; start points use the streams after it
            rng_seed=args.seed + 1,
            use_inverse_retraction=args.inverse_beta,
            log_every=args.log_every,
        )

    fields = {
        "command": args.command,
        "seed": args.seed,
        "out": args.out,
        "format": args.format,
        "log_dir": args.log_dir,
        "debug": args.debug,
        "workers": args.workers,
    }
    for name in (
        "n", "m", "C", "p", "n_list", "eps", "lower", "upper", "fixture", "matrix", "vector",
        "starts", "trials", "retries", "sparsity_threshold", "support_threshold", "kkt_tol",
    ):
        if name in values and values[name] is not None:
            fields[name] = values[name]
    if solver is not None:
        fields["solver"] = solver
    return RunSpec(**fields)
