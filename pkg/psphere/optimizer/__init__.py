from psphere.optimizer.linesearch import LineSearchOutcome, line_search_wolfe, strong_wolfe
from psphere.optimizer.problem import (
    Problem,
    finite_difference_gradient,
    gradient_conformance,
    riemannian_gradient,
)
from psphere.optimizer.solver import SolveResult, TraceEvent, solve, solve_multistart
from psphere.protocol import BetaRule, Method, SolverConfig
