import typing
from enum import Enum
from typing import Any, Dict, List, Optional

import pydantic

from psphere.constants import (
    BOXQP_RETRIES,
    GEOMCHECK_TRIALS,
    GRAD_TOL,
    INITIAL_STEP,
    KKT_TOL,
    LASSO_EPS,
    LASSO_SUPPORT_THRESHOLD,
    LINESEARCH_MAX_EVALS,
    MAX_ITERS,
    NNPCA_STARTS,
    POWELL_RESTART,
    SCHEMA_VERSION,
    SPARSITY_THRESHOLD,
    WOLFE_C1,
    WOLFE_C2,
)
from psphere.manifold import RetractionKind, TransportKind


class Method(Enum):
    gd = "gd"
    cg = "cg"


class BetaRule(Enum):
    fletcher_reeves = "fr"
    polak_ribiere_plus = "prplus"


class SolverConfig(pydantic.BaseModel):
    """Hyperparameters of the Riemannian solvers. Immutable once built."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    method: Method = pydantic.Field(Method.cg, title="Method", description="gd or cg.")
    retraction: RetractionKind = pydantic.Field(
        RetractionKind.normalization,
        title="Retraction",
        description="Map used to step from x along a tangent direction.",
    )
    transport: TransportKind = pydantic.Field(
        TransportKind.differentiated,
        title="Transport",
        description="Vector transport carrying the previous direction in CG.",
    )
    beta_rule: BetaRule = pydantic.Field(BetaRule.fletcher_reeves, title="Beta rule")
    grad_tol: float = pydantic.Field(GRAD_TOL, gt=0, title="Gradient tolerance")
    max_iters: int = pydantic.Field(MAX_ITERS, ge=1, title="Maximum iterations")
    wolfe_c1: float = pydantic.Field(WOLFE_C1, title="Armijo constant")
    wolfe_c2: float = pydantic.Field(WOLFE_C2, title="Curvature constant")
    initial_step: float = pydantic.Field(INITIAL_STEP, gt=0, title="First trial step")
    rng_seed: int = pydantic.Field(0, ge=0, title="Seed for randomized starts")
    max_linesearch_evals: int = pydantic.Field(LINESEARCH_MAX_EVALS, ge=1)
    powell_restart: float = pydantic.Field(
        POWELL_RESTART,
        gt=0,
        description="beta is reset when |<g_k, T g_(k-1)>| exceeds this fraction of ||g_k||^2.",
    )
    use_inverse_retraction: bool = pydantic.Field(
        False,
        description="Carry the previous direction with an inverse retraction instead of a transport.",
    )
    log_every: int = pydantic.Field(
        0, ge=0, description="Emit a debug line every this many iterations (0 disables)."
    )

    @pydantic.model_validator(mode="after")
    def _check_wolfe(self) -> "SolverConfig":
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError(
                f"need 0 < wolfe_c1 < wolfe_c2 < 1, got c1={self.wolfe_c1}, c2={self.wolfe_c2}"
            )
        return self


Command = typing.Literal["nnpca", "lasso", "boxqp", "geomcheck"]


class RunSpec(pydantic.BaseModel):
    """Everything needed to reproduce one CLI run."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    command: Command
    seed: int = pydantic.Field(0, ge=0, lt=2**63)
    n: Optional[int] = pydantic.Field(None, ge=2)
    m: Optional[int] = pydantic.Field(None, ge=1)
    C: List[float] = pydantic.Field(default_factory=list)
    p: List[float] = pydantic.Field(default_factory=list)
    n_list: List[int] = pydantic.Field(default_factory=list)
    eps: float = pydantic.Field(LASSO_EPS, gt=0, lt=1)
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    fixture: str = "random"
    matrix: Optional[str] = None
    vector: Optional[str] = None
    starts: int = pydantic.Field(NNPCA_STARTS, ge=1)
    workers: int = pydantic.Field(1, ge=1)
    trials: int = pydantic.Field(GEOMCHECK_TRIALS, ge=1)
    retries: int = pydantic.Field(BOXQP_RETRIES, ge=0)
    sparsity_threshold: float = pydantic.Field(SPARSITY_THRESHOLD, gt=0)
    support_threshold: float = pydantic.Field(LASSO_SUPPORT_THRESHOLD, gt=0)
    kkt_tol: float = pydantic.Field(KKT_TOL, gt=0)
    solver: SolverConfig = pydantic.Field(default_factory=SolverConfig)
    out: Optional[str] = None
    format: typing.Literal["json", "csv"] = "json"
    log_dir: Optional[str] = None
    debug: bool = False

    @pydantic.field_validator("C")
    @classmethod
    def _positive_radii(cls, values: List[float]) -> List[float]:
        if any(not c > 0 for c in values):
            raise ValueError("every C must be > 0")
        return values

    @pydantic.field_validator("p")
    @classmethod
    def _exponents(cls, values: List[float]) -> List[float]:
        if any(not 1.0 < p < float("inf") for p in values):
            raise ValueError("every p must lie in (1, inf)")
        return values

    @pydantic.model_validator(mode="after")
    def _check_command(self) -> "RunSpec":
        if self.command == "lasso" and self.fixture != "file":
            if self.m is None or self.n is None or not self.m >= self.n >= 4:
                raise ValueError(f"lasso needs m >= n >= 4, got m={self.m}, n={self.n}")
        if self.command == "boxqp":
            if not self.p:
                raise ValueError("boxqp needs a nonempty p list")
            if (self.lower is None) != (self.upper is None):
                raise ValueError("give both --lower and --upper or neither")
            if self.lower is not None:
                if len(self.lower) != len(self.upper):
                    raise ValueError("--lower and --upper differ in length")
                if any(not l < u for l, u in zip(self.lower, self.upper)):
                    raise ValueError("bounds need lower < upper element-wise")
        if self.command == "geomcheck" and any(n < 2 for n in self.n_list):
            raise ValueError("geomcheck dimensions must be >= 2")
        return self


class SolutionRecord(pydantic.BaseModel):
    label: str
    vector: List[float]
    objective: float
    grad_norm: Optional[float] = None
    iterations: Optional[int] = None
    converged: Optional[bool] = None
    diagnostics: Dict[str, Any] = pydantic.Field(default_factory=dict)


class RunReport(pydantic.BaseModel):
    """Versioned JSON result of a CLI run."""

    model_config = pydantic.ConfigDict(populate_by_name=True)

    schema_version: int = pydantic.Field(SCHEMA_VERSION, alias="schema")
    command: str
    version: str
    spec: Dict[str, Any]
    solutions: List[SolutionRecord] = pydantic.Field(default_factory=list)
    diagnostics: Dict[str, Any] = pydantic.Field(default_factory=dict)
