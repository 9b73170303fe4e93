import numpy as np
import pytest

from compstat.benchmarks import all_benchmarks
from compstat.benchmarks.slutsky import demand_model
from compstat.errors import NonConvergenceError, RankDeficiencyError
from compstat.model import ProblemModel
from compstat.solver import (SolverConfig, newton_solve,
                             projected_hessian_extremes, recover_multipliers,
                             solve_interior)

from conftest import sqrt_profit_model


def test_log_utility_solution():
    # hand solution of the first-order conditions: x_i = g_i m / p_i, lam = 1/m
    model = demand_model(np.array([0.5, 0.5]))
    sol = newton_solve(model, np.array([1.0, 1.0, 1.0]), np.array([0.3, 0.8]))
    assert sol.converged
    assert sol.x == pytest.approx([0.5, 0.5], abs=1e-10)
    assert sol.lam == pytest.approx([1.0], abs=1e-10)


def test_sqrt_profit_solution():
    # p / (2 sqrt(x)) = w solved by hand: x = (p / 2w)^2 = 1 at p=2, w=1
    model = sqrt_profit_model()
    sol = newton_solve(model, np.array([1.0, 2.0]), np.array([0.5]))
    assert sol.converged
    assert sol.x == pytest.approx([1.0], abs=1e-9)
    assert sol.kkt_residual <= 1e-10


def test_analytic_solution_is_authoritative_with_newton_cross_check():
    model = demand_model(np.array([0.5, 0.5]))
    sol = solve_interior(model, np.array([1.0, 2.0, 3.0]))
    assert sol.source == "analytic"
    assert sol.newton_discrepancy is not None
    assert sol.newton_discrepancy < 1e-9


def test_recover_multipliers_unconstrained_residual_is_gradient_norm():
    model = sqrt_profit_model()
    lam, residual = recover_multipliers(model, np.array([4.0]), np.array([1.0, 2.0]))
    assert lam.size == 0
    grad = model.obj_grad_x(np.array([4.0]), np.array([1.0, 2.0]))
    assert residual == pytest.approx(float(np.linalg.norm(grad)), rel=1e-9)
    # at the optimum the residual vanishes
    _, at_optimum = recover_multipliers(model, np.array([1.0]), np.array([1.0, 2.0]))
    assert at_optimum < 1e-9


def test_recover_multipliers_log_utility():
    model = demand_model(np.array([0.5, 0.5]))
    lam, residual = recover_multipliers(model, np.array([0.5, 0.5]),
                                        np.array([1.0, 1.0, 1.0]))
    assert lam == pytest.approx([1.0], abs=1e-12)
    assert residual < 1e-12


def test_recover_multipliers_rank_deficient_gradients():
    # two copies of one constraint: the gradient stack loses rank
    dup = ProblemModel(
        name="dup", M=3, N=3,
        objective=lambda x, a: float(-x @ x),
        constraints=(lambda x, a: float(x[0] + x[1] + x[2] - a[0]),) * 2,
    )
    with pytest.raises(RankDeficiencyError):
        recover_multipliers(dup, np.array([0.5, 0.5, 0.5]), np.ones(3))


def test_constraint_count_must_stay_below_dimensions():
    from compstat.errors import ConfigurationError
    with pytest.raises(ConfigurationError):
        ProblemModel(name="overconstrained", M=2, N=3,
                     objective=lambda x, a: 0.0,
                     constraints=(lambda x, a: 0.0,) * 2)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_singular_newton_system_raises():
    flat = ProblemModel(name="affine", M=1, N=1,
                        objective=lambda x, a: float(a[0] * x[0]))
    with pytest.raises(RankDeficiencyError):
        newton_solve(flat, np.array([1.0]), np.array([0.0]))


def test_iteration_cap_returns_flagged_result():
    model = demand_model(np.array([0.5, 0.5]))
    sol = newton_solve(model, np.array([1.0, 1.0, 1.0]), np.array([0.05, 0.9]),
                       SolverConfig(max_iter=1))
    assert not sol.converged
    assert sol.iterations == 1


def test_solve_interior_requires_start_without_analytic():
    model = sqrt_profit_model()
    with pytest.raises(NonConvergenceError):
        solve_interior(model, np.array([1.0, 2.0]))


@pytest.mark.parametrize("name", ["slutsky_hicks", "profit_cd",
                                  "multi_output_profit",
                                  "cost_constrained_profit",
                                  "principal_agent", "efficient_portfolio"])
def test_newton_matches_analytic_from_perturbed_start(name):
    from compstat.benchmarks import get_benchmark
    entry = get_benchmark(name)
    a = entry.default_point
    x_star, _ = entry.model.analytic_solution(a)
    rng = np.random.default_rng(5)
    x0 = np.asarray(x_star) * (1.0 + rng.uniform(-0.2, 0.2, size=entry.model.M))
    sol = newton_solve(entry.model, a, x0)
    assert sol.converged
    assert np.max(np.abs(sol.x - x_star)) < 1e-8


def test_second_order_necessary_condition_on_benchmarks():
    for entry in all_benchmarks():
        run = entry.prepare("numeric")
        _, max_eig = projected_hessian_extremes(entry.model, run.sol)
        scale = max(1.0, abs(max_eig))
        assert max_eig <= 1e-8 * scale, entry.name
