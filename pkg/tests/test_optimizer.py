import math

import pydantic
import pytest
import torch

from psphere.exceptions import InvalidInputError, LineSearchError, NotADescentDirectionError
from psphere.manifold import RetractionKind, SpherePNorm, TransportKind
from psphere.optimizer import (
    BetaRule,
    Method,
    Problem,
    SolverConfig,
    TraceEvent,
    gradient_conformance,
    line_search_wolfe,
    riemannian_gradient,
    solve,
    solve_multistart,
    strong_wolfe,
)
from psphere.problems import NnpcaInstance, nnpca_problem
from psphere.utils import make_generator


def test_solver_config_defaults_and_validation():
    cfg = SolverConfig()
    assert cfg.method is Method.cg
    assert cfg.retraction is RetractionKind.normalization
    assert cfg.transport is TransportKind.differentiated
    assert cfg.beta_rule is BetaRule.fletcher_reeves
    assert cfg.grad_tol == 1e-8
    with pytest.raises(ValueError):
        SolverConfig(wolfe_c1=0.5, wolfe_c2=0.1)
    with pytest.raises(pydantic.ValidationError):
        SolverConfig(unknown=1)
    assert SolverConfig(retraction="orthographic", beta_rule="prplus").beta_rule is BetaRule.polak_ribiere_plus


def test_strong_wolfe_accepts_exact_minimizer():
    outcome = strong_wolfe(lambda t: (t - 1.0) ** 2, lambda t: 2.0 * (t - 1.0), 1.0, -2.0, t0=1.0)
    assert outcome.step == 1.0
    assert outcome.wolfe


def test_strong_wolfe_conditions_hold_after_zoom():
    phi = lambda t: (t - 0.3) ** 2
    dphi = lambda t: 2.0 * (t - 0.3)
    outcome = strong_wolfe(phi, dphi, phi(0.0), dphi(0.0), t0=1.0, c1=1e-4, c2=0.1)
    assert outcome.wolfe
    assert outcome.value <= phi(0.0) + 1e-4 * outcome.step * dphi(0.0)
    assert abs(dphi(outcome.step)) <= 0.1 * abs(dphi(0.0))


def test_strong_wolfe_falls_back_to_armijo():
    outcome = strong_wolfe(lambda t: -t, lambda t: -1.0, 0.0, -1.0, t0=1.0, max_evals=8)
    assert not outcome.wolfe
    assert outcome.value < 0.0


def test_strong_wolfe_without_sufficient_decrease_raises():
    with pytest.raises(LineSearchError):
        strong_wolfe(lambda t: 0.0 if t == 0 else math.inf, lambda t: -1.0, 0.0, -1.0, max_evals=20)


def test_strong_wolfe_rejects_ascent():
    with pytest.raises(NotADescentDirectionError):
        strong_wolfe(lambda t: t, lambda t: 1.0, 0.0, 1.0)


def test_line_search_rejects_ascent_direction(generator):
    inst = NnpcaInstance.diagonal(3)
    prob = nnpca_problem(inst)
    x = inst.manifold.random_positive_point(generator)
    grad = riemannian_gradient(prob, x)
    with pytest.raises(NotADescentDirectionError):
        line_search_wolfe(prob, x, grad, SolverConfig())


def test_solve_diag_fixture_converges_to_e1(generator):
    inst = NnpcaInstance.diagonal(2)
    manifold = inst.manifold
    result = solve(nnpca_problem(inst), manifold, manifold.random_positive_point(generator))
    assert result.converged
    v = result.point.coords ** 2
    assert float(v[0]) == pytest.approx(1.0, abs=1e-5)
    assert float(v[1]) == pytest.approx(0.0, abs=1e-5)
    assert result.objective == pytest.approx(-2.0, abs=1e-8)
    assert result.certify(nnpca_problem(inst)) <= 1e-8


def test_solve_stops_at_iteration_zero_on_stationary_start(generator):
    inst = NnpcaInstance.identity(6)
    manifold = inst.manifold
    result = solve(nnpca_problem(inst), manifold, manifold.random_point(generator))
    assert result.converged
    assert result.iterations == 0
    assert result.objective == pytest.approx(-1.0, abs=1e-12)
    assert len(result.trace) == 1


@pytest.mark.parametrize("retraction", list(RetractionKind))
@pytest.mark.parametrize("beta_rule", list(BetaRule))
@pytest.mark.parametrize("transport", list(TransportKind))
def test_cg_variants_reach_the_dominant_coordinate(retraction, beta_rule, transport):
    inst = NnpcaInstance.diagonal(3)
    manifold = inst.manifold
    cfg = SolverConfig(retraction=retraction, beta_rule=beta_rule, transport=transport, max_iters=2000)
    x0 = manifold.random_positive_point(make_generator(21))
    result = solve(nnpca_problem(inst), manifold, x0, cfg)
    assert result.converged
    assert result.objective == pytest.approx(-3.0, abs=1e-8)


def test_inverse_retraction_carry_converges():
    inst = NnpcaInstance.diagonal(3)
    manifold = inst.manifold
    cfg = SolverConfig(use_inverse_retraction=True, beta_rule="prplus")
    result = solve(nnpca_problem(inst), manifold, manifold.random_positive_point(make_generator(4)), cfg)
    assert result.converged
    assert result.objective == pytest.approx(-3.0, abs=1e-8)


def test_gradient_descent_converges():
    inst = NnpcaInstance.diagonal(3)
    manifold = inst.manifold
    cfg = SolverConfig(method="gd", max_iters=5000)
    result = solve(nnpca_problem(inst), manifold, manifold.random_positive_point(make_generator(8)), cfg)
    assert result.converged
    assert result.objective == pytest.approx(-3.0, abs=1e-8)


def test_objective_never_increases(generator):
    inst = NnpcaInstance.random(6, generator)
    manifold = inst.manifold
    result = solve(nnpca_problem(inst), manifold, manifold.random_positive_point(generator))
    values = [event.objective for event in result.trace]
    assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(values, values[1:]))


def test_trace_events_round_trip_from_dicts(generator):
    inst = NnpcaInstance.diagonal(2)
    manifold = inst.manifold
    result = solve(nnpca_problem(inst), manifold, manifold.random_positive_point(generator))
    events = [TraceEvent.from_dict(event) for event in result.trace_dicts()]
    assert events == result.trace
    assert events[0].iteration == 0


def test_solve_rejects_point_of_another_sphere(generator):
    inst = NnpcaInstance.diagonal(3)
    other = SpherePNorm(3, 2.0)
    with pytest.raises(InvalidInputError):
        solve(nnpca_problem(inst), inst.manifold, other.random_point(generator))


def test_multistart_is_independent_of_workers():
    inst = NnpcaInstance.random(5, make_generator(3))
    manifold = inst.manifold
    cfg = SolverConfig(rng_seed=10, max_iters=3000)
    sampler = lambda gen: manifold.random_positive_point(gen)
    serial = solve_multistart(nnpca_problem(inst), manifold, cfg, starts=3, sampler=sampler, workers=1)
    threaded = solve_multistart(nnpca_problem(inst), manifold, cfg, starts=3, sampler=sampler, workers=3)
    assert serial.objective == threaded.objective
    assert torch.equal(serial.point.coords, threaded.point.coords)


def test_nnpca_gradient_conformance(generator):
    inst = NnpcaInstance.random(5, generator)
    assert gradient_conformance(nnpca_problem(inst), inst.manifold, generator) <= 1e-6


def _rayleigh(A: torch.Tensor) -> Problem:
    return Problem(lambda c: -float(c @ A @ c), lambda c: -2.0 * (A @ c), "rayleigh")


def _linear(c: torch.Tensor) -> Problem:
    return Problem(lambda x: float(c @ x), lambda x: c.clone(), "linear")


def test_strong_wolfe_quadratic_example():
    outcome = strong_wolfe(lambda t: (t - 1.0) ** 2, lambda t: 2.0 * (t - 1.0), 1.0, -2.0, c1=1e-4, c2=0.1)
    assert outcome.wolfe
    assert abs(2.0 * (outcome.step - 1.0)) <= 0.2


def test_strong_wolfe_accepts_approximate_wolfe_step_at_rounding_level():
    # phi is flat to the last bit, so only phi' tells the steps apart
    outcome = strong_wolfe(lambda t: 1.0, lambda t: t - 1.0, 1.0, -1.0, t0=1.0, max_evals=60)
    assert not outcome.wolfe
    assert outcome.step == 1.0
    assert outcome.value == 1.0


def test_strong_wolfe_rejects_steps_without_decrease():
    with pytest.raises(LineSearchError):
        strong_wolfe(lambda t: 0.0, lambda t: -1.0, 0.0, -1.0, max_evals=20)


def test_line_search_rayleigh_example():
    sphere = SpherePNorm(2, 2.0)
    prob = _rayleigh(torch.diag(torch.tensor([2.0, 1.0], dtype=torch.float64)))
    x = sphere.point([0.6, 0.8])
    eta = -riemannian_gradient(prob, x)
    outcome = line_search_wolfe(prob, x, eta, SolverConfig())
    assert outcome.step > 0
    assert outcome.value < prob.value(x)
    assert outcome.point.manifold == sphere


def test_riemannian_gradient_examples():
    sphere = SpherePNorm(2, 2.0)
    e1 = sphere.point([1.0, 0.0])
    grad = riemannian_gradient(_linear(torch.tensor([0.0, 1.0], dtype=torch.float64)), e1)
    assert grad.vec.tolist() == [0.0, 1.0]

    x = SpherePNorm(3, 3.0).point([0.5, -0.7, (1.0 - 0.125 - 0.343) ** (1.0 / 3.0)])
    normal = torch.sign(x.coords) * x.coords.abs() ** 2
    assert riemannian_gradient(_linear(normal), x).norm <= 1e-15


def test_solve_rayleigh_example():
    sphere = SpherePNorm(2, 2.0)
    prob = _rayleigh(torch.diag(torch.tensor([2.0, 1.0], dtype=torch.float64)))
    result = solve(prob, sphere, sphere.point([0.6, 0.8]))
    assert result.converged
    assert result.objective == pytest.approx(-2.0, abs=1e-8)
    assert abs(float(result.point.coords[0])) == pytest.approx(1.0, abs=1e-6)


def test_solve_linear_functional_example(generator):
    sphere = SpherePNorm(3, 2.0)
    prob = _linear(torch.tensor([-1.0, 0.0, 0.0], dtype=torch.float64))
    result = solve(prob, sphere, sphere.random_point(generator))
    assert result.converged
    assert torch.allclose(result.point.coords, torch.tensor([1.0, 0.0, 0.0], dtype=torch.float64), atol=1e-6)


def test_solve_reaches_tolerance_on_a_ten_dimensional_nnpca():
    inst = NnpcaInstance.random(10, make_generator(0))
    manifold = inst.manifold
    cfg = SolverConfig(max_iters=5000)
    result = solve(nnpca_problem(inst), manifold, manifold.random_positive_point(make_generator(0)), cfg)
    assert result.converged, result.message
    assert result.iterations < 5000
    assert result.certify(nnpca_problem(inst)) <= 1e-8


def test_solve_stops_when_no_progress_is_possible():
    # f is flat but the reported gradient is a rotation field with no zeros
    sphere = SpherePNorm(2, 2.0)
    prob = Problem(lambda x: 0.0, lambda x: torch.stack([-x[1], x[0]]), "flat")
    result = solve(prob, sphere, sphere.point([1.0, 0.0]), SolverConfig(max_iters=10000))
    assert not result.converged
    assert result.iterations < 10000
