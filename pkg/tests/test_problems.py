import math

import pytest
import torch

from psphere.constants import LASSO_EPS
from psphere.exceptions import DimensionError, InstanceGenerationError, InvalidInputError
from psphere.manifold import SpherePNorm
from psphere.optimizer import SolverConfig, gradient_conformance, riemannian_gradient, solve, solve_multistart
from psphere.problems import (
    BoxQpInstance,
    BoxTransform,
    Grid,
    LassoInstance,
    NnpcaInstance,
    QuadraticLoss,
    ball_to_sphere_witness,
    box_violation,
    boxqp_problem,
    boxqp_reference,
    ensure_infeasible,
    equivalence_oracle_regularized_vs_constrained,
    is_infeasible,
    kkt_check,
    kkt_report,
    lasso_design,
    lasso_problem,
    lasso_reference,
    matched_lambda,
    nnpca_gradient_closed_form,
    nnpca_lift,
    nnpca_objective_lifted,
    nnpca_problem,
    oracle_gap,
    random_boxqp,
    solve_sweep,
    sparsity_count,
    support,
    true_coefficients,
    unregularized_solution,
)
from psphere.utils import make_generator

from .conftest import tensor


def test_nnpca_instance_requires_spd():
    with pytest.raises(InvalidInputError):
        NnpcaInstance(tensor(1.0, 2.0, 0.0, 1.0).reshape(2, 2))
    with pytest.raises(InvalidInputError):
        NnpcaInstance(tensor(1.0, 2.0, 2.0, 1.0).reshape(2, 2))
    with pytest.raises(DimensionError):
        NnpcaInstance(torch.ones(2, 3, dtype=torch.float64))


def test_nnpca_objective_on_identity_is_constant(generator):
    inst = NnpcaInstance.identity(4)
    prob = nnpca_problem(inst)
    x = inst.manifold.random_point(generator)
    assert prob.value(x) == pytest.approx(-1.0, abs=1e-12)
    assert torch.allclose(prob.euclidean_gradient(x.coords), -4.0 * x.coords ** 3, atol=1e-14)
    assert riemannian_gradient(prob, x).norm <= 1e-12


def test_nnpca_gradient_matches_closed_form(generator):
    inst = NnpcaInstance.random(7, generator)
    prob = nnpca_problem(inst)
    for _ in range(10):
        x = inst.manifold.random_point(generator)
        projected = riemannian_gradient(prob, x).vec
        closed = nnpca_gradient_closed_form(inst, x)
        assert float((projected - closed).abs().max()) <= 1e-10 * max(1.0, float(closed.abs().max()))


def test_nnpca_lift_and_lifted_objective(generator):
    sphere = SpherePNorm(2, 4.0)
    v = nnpca_lift(sphere.point([2 ** -0.25, -(2 ** -0.25)]))
    assert torch.allclose(v, tensor(2 ** -0.5, 2 ** -0.5), atol=1e-15)

    inst = NnpcaInstance.random(5, generator)
    x = inst.manifold.random_point(generator)
    lifted = nnpca_lift(x)
    assert bool((lifted >= 0).all())
    assert float(torch.linalg.vector_norm(lifted)) == pytest.approx(1.0, abs=1e-9)
    assert nnpca_objective_lifted(inst, lifted) == pytest.approx(nnpca_problem(inst).value(x), rel=1e-12)
    with pytest.raises(InvalidInputError):
        nnpca_lift(SpherePNorm(2, 2.0).point([1.0, 0.0]))


def test_kkt_check_dominant_eigenvector():
    report = kkt_check(NnpcaInstance.diagonal(2), [1.0, 0.0])
    assert report.passed
    assert report.multiplier_mu == 2.0
    assert report.support == [0]
    assert report.support_consistent


def test_kkt_check_detects_stationarity_violation():
    inst = NnpcaInstance(tensor(2.0, 1.0, 1.0, 2.0).reshape(2, 2))
    report = kkt_check(inst, [1.0, 0.0])
    assert not report.passed
    assert report.residual_stationarity == pytest.approx(1.0)
    balanced = kkt_check(inst, [2 ** -0.5, 2 ** -0.5])
    assert balanced.passed
    assert balanced.multiplier_mu == pytest.approx(3.0)


def test_kkt_report_on_an_indefinite_matrix():
    report = kkt_report([[1.0, 2.0], [2.0, 1.0]], [1.0, 0.0])
    assert not report.passed
    assert report.residual_stationarity == 2.0
    assert report.multiplier_mu == 1.0
    with pytest.raises(DimensionError):
        kkt_report(torch.ones(2, 3, dtype=torch.float64), [1.0, 0.0])


def test_kkt_check_norm_and_sign_residuals():
    inst = NnpcaInstance.diagonal(2)
    short = kkt_check(inst, [0.5, 0.5])
    assert not short.passed
    assert short.residual_norm == pytest.approx(0.5)
    negative = kkt_check(inst, [-1.0, 0.0])
    assert negative.residual_nonneg == 1.0
    assert not negative.passed
    with pytest.raises(DimensionError):
        kkt_check(inst, [1.0, 0.0, 0.0])
    with pytest.raises(InvalidInputError):
        kkt_check(inst, [1.0, 0.0], tol=0.0)


def test_sparsity_count():
    assert sparsity_count([0.0, 1e-8, 0.5, -1e-7]) == 3
    assert sparsity_count([0.0, 1e-8, 0.5], threshold=1e-9) == 1


def test_solver_critical_point_passes_kkt():
    inst = NnpcaInstance.random(6, make_generator(5))
    manifold = inst.manifold
    cfg = SolverConfig(rng_seed=6, max_iters=5000)
    result = solve_multistart(
        nnpca_problem(inst), manifold, cfg, starts=3, sampler=manifold.random_positive_point
    )
    assert result.converged
    report = kkt_check(inst, nnpca_lift(result.point))
    assert report.passed, report.to_dict()


def test_true_coefficients():
    assert true_coefficients(13).tolist() == [-5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 0, 0, 0]
    assert true_coefficients(4).tolist() == [1, 0, 0, 0]


def test_lasso_design_is_seeded():
    X1, y1, w1 = lasso_design(make_generator(3))
    X2, y2, w2 = lasso_design(make_generator(3))
    assert X1.shape == (100, 13)
    assert torch.equal(X1, X2) and torch.equal(y1, y2) and torch.equal(w1, w2)
    noise = y1 - X1 @ w1
    assert float(noise.abs().max()) <= 1.0 + 1e-12
    with pytest.raises(InvalidInputError):
        lasso_design(make_generator(0), m=5, n=13)


def test_lasso_instance_validation():
    with pytest.raises(DimensionError):
        LassoInstance(torch.eye(3, dtype=torch.float64), tensor(1.0, 2.0), 1.0)
    with pytest.raises(InvalidInputError):
        LassoInstance(torch.eye(2, dtype=torch.float64), tensor(1.0, 2.0), 0.0)
    inst = LassoInstance(torch.eye(2, dtype=torch.float64), tensor(1.0, 2.0), 3.0)
    assert inst.p == 1.0 + LASSO_EPS
    assert inst.manifold == SpherePNorm(2, 1.0 + LASSO_EPS)


def test_lasso_objective_scales_with_radius_when_response_is_zero(generator):
    X = torch.randn(6, 3, generator=generator, dtype=torch.float64)
    y = torch.zeros(6, dtype=torch.float64)
    x = SpherePNorm(3, 1.0 + LASSO_EPS).random_point(generator)
    small = lasso_problem(LassoInstance(X, y, 1.0)).value(x)
    large = lasso_problem(LassoInstance(X, y, 2.0)).value(x)
    assert large == pytest.approx(4.0 * small, rel=1e-12)


def test_lasso_identity_design_recovers_first_axis(generator):
    inst = LassoInstance(torch.eye(2, dtype=torch.float64), tensor(1.0, 0.0), 1.0)
    manifold = inst.manifold
    result = solve(lasso_problem(inst), manifold, manifold.random_positive_point(generator), SolverConfig(max_iters=2000))
    w = inst.C * result.point.coords
    assert float((w - tensor(1.0, 0.0)).abs().max()) <= 1e-3


def test_unregularized_solution():
    X, y, _ = lasso_design(make_generator(1))
    w = unregularized_solution(X, y)
    assert torch.allclose(X.T @ (X @ w - y), torch.zeros(13, dtype=torch.float64), atol=1e-9)
    singular = X.clone()
    singular[:, 2] = 0.0
    assert unregularized_solution(singular, y) is None


def test_lasso_reference_and_matched_lambda():
    X, y, _ = lasso_design(make_generator(2))
    assert torch.equal(lasso_reference(X, y, 0.0), unregularized_solution(X, y))
    w = lasso_reference(X, y, 50.0)
    assert any(float(v) != 0.0 for v in w)
    assert matched_lambda(X, y, w) == pytest.approx(50.0, rel=1e-5)
    gap = oracle_gap(X, y, w)
    assert abs(gap.relative_gap) <= 1e-8


def test_support_threshold():
    assert support(tensor(0.5, 0.001, -2.0, 0.0)) == [0, 2]
    assert support(tensor(0.5, 0.001), threshold=1e-4) == [0, 1]


def test_gradient_conformance_of_all_problem_families(generator):
    X, y, _ = lasso_design(make_generator(4), m=20, n=5)
    lasso = LassoInstance(X, y, 7.0)
    assert gradient_conformance(lasso_problem(lasso), lasso.manifold, generator) <= 1e-6
    box = random_boxqp(4, generator, p=10.0)
    problem, _ = boxqp_problem(box)
    assert gradient_conformance(problem, box.manifold, generator) <= 1e-6


def test_box_transform_examples(generator):
    transform = BoxTransform.from_bounds(tensor(-1.0, -2.0), tensor(1.0, 2.0))
    assert torch.equal(transform.a, tensor(1.0, 2.0))
    assert torch.equal(transform.b, tensor(0.0, 0.0))
    shifted = BoxTransform.from_bounds(tensor(0.0, 0.0), tensor(2.0, 2.0))
    assert torch.equal(shifted.to_box(tensor(0.5, -1.0)), tensor(1.5, 0.0))
    x = torch.randn(2, generator=generator, dtype=torch.float64)
    assert torch.allclose(transform.to_sphere(transform.to_box(x)), x, atol=1e-12)


def test_boxqp_instance_validation():
    A = torch.eye(2, dtype=torch.float64)
    with pytest.raises(InvalidInputError):
        BoxQpInstance(A, tensor(0.0, 0.0), tensor(1.0, -1.0), tensor(0.0, 1.0))
    with pytest.raises(DimensionError):
        BoxQpInstance(A, tensor(0.0, 0.0, 0.0), tensor(-1.0, -1.0), tensor(1.0, 1.0))


def test_sphere_points_map_into_the_box(generator):
    inst = random_boxqp(5, generator, p=5.0)
    transform = inst.transform
    for _ in range(20):
        w = transform.to_box(inst.manifold.random_point(generator).coords)
        assert box_violation(w, inst.l, inst.u) <= 1e-9


def test_infeasibility_gate(generator):
    A = torch.eye(2, dtype=torch.float64)
    l, u = tensor(-1.0, -1.0), tensor(1.0, 1.0)
    assert is_infeasible(A, tensor(-10.0, 0.0), l, u)
    assert not is_infeasible(A, tensor(0.0, 0.0), l, u)
    with pytest.raises(InstanceGenerationError):
        ensure_infeasible(A, tensor(0.0, 0.0), l, u, generator, retries=0)
    c = ensure_infeasible(A, tensor(0.0, 0.0), l, u, generator, retries=20)
    assert is_infeasible(A, c, l, u)


def test_boxqp_clamp_example():
    inst = BoxQpInstance(
        torch.eye(2, dtype=torch.float64), tensor(-10.0, 0.0), tensor(-1.0, -1.0), tensor(1.0, 1.0), p=5000.0
    )
    reference = boxqp_reference(inst)
    assert torch.allclose(reference, tensor(1.0, 0.0), atol=1e-12)
    (entry,) = solve_sweep(inst, [5000.0], reference=reference)
    assert float((entry.w - tensor(1.0, 0.0)).abs().max()) <= 1e-3
    assert entry.distance <= 1e-3


def test_sweep_distances_shrink_as_p_grows():
    inst = random_boxqp(4, make_generator(12))
    reference = boxqp_reference(inst)
    entries = solve_sweep(inst, [5.0, 50.0, 500.0], SolverConfig(max_iters=3000), reference=reference)
    distances = [entry.distance for entry in entries]
    assert distances[0] > distances[1] > distances[2]


FIXTURES = [
    QuadraticLoss.diagonal([1.0, 0.0], [2.0, 0.0]),
    QuadraticLoss.diagonal([1.0, 1.0], [3.0, 3.0]),
    QuadraticLoss(tensor(2.0, 0.5, 0.5, 1.0).reshape(2, 2), [2.0, -1.0]),
]


@pytest.mark.parametrize("loss", FIXTURES)
@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_regularized_and_constrained_minima_agree(loss, p):
    result = equivalence_oracle_regularized_vs_constrained(loss, 1.0, p)
    assert result.gap <= 1e-3
    assert result.C >= 0.0


def test_equivalence_trivial_cases():
    at_origin = equivalence_oracle_regularized_vs_constrained(QuadraticLoss.diagonal([1.0, 1.0], [0.0, 0.0]), 1.0, 3.0)
    assert at_origin.C == 0.0
    assert at_origin.gap == 0.0
    unpenalized = equivalence_oracle_regularized_vs_constrained(QuadraticLoss.diagonal([1.0, 0.0], [2.0, 0.0]), 0.0, 2.0)
    assert unpenalized.C == pytest.approx(2.0, abs=1e-12)
    assert unpenalized.gap <= 1e-12
    with pytest.raises(InvalidInputError):
        Grid(4, 1.0)


@pytest.mark.parametrize("loss", FIXTURES)
@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_ball_and_sphere_minima_agree(loss, p):
    witness = ball_to_sphere_witness(loss, 1.0, p)
    assert witness.applicable
    assert witness.confirmed
    assert witness.gap <= 1e-3


def test_sphere_witness_not_applicable_inside_the_ball():
    witness = ball_to_sphere_witness(QuadraticLoss.diagonal([1.0, 1.0], [0.0, 0.0]), 1.0, 2.0)
    assert not witness.applicable
    assert not witness
    assert math.isnan(witness.gap)
