from psphere.problems.base import ProblemType, check_spd, random_spd
from psphere.problems.boxqp import (
    BoxQpInstance,
    BoxTransform,
    SweepEntry,
    box_violation,
    boxqp_loss,
    boxqp_problem,
    boxqp_reference,
    default_bounds,
    ensure_infeasible,
    initial_point,
    is_infeasible,
    random_boxqp,
    solve_sweep,
    unconstrained_minimizer,
)
from psphere.problems.equivalence import (
    EquivalenceGap,
    Grid,
    QuadraticLoss,
    SphereWitness,
    ball_to_sphere_witness,
    equivalence_oracle_regularized_vs_constrained,
)
from psphere.problems.lasso import (
    LassoInstance,
    OracleGap,
    lasso_design,
    lasso_loss,
    lasso_problem,
    lasso_reference,
    matched_lambda,
    oracle_gap,
    support,
    true_coefficients,
    unregularized_solution,
)
from psphere.problems.nnpca import (
    KktReport,
    NnpcaInstance,
    kkt_check,
    kkt_report,
    nnpca_gradient_closed_form,
    nnpca_lift,
    nnpca_objective_lifted,
    nnpca_problem,
    sparsity_count,
    squared_slack_problem,
)
