import numpy as np
import pytest

from compstat.benchmarks import all_benchmarks, get_benchmark
from compstat.benchmarks.profit import cd_demand_jacobian, cd_profit_model
from compstat.benchmarks.slutsky import demand_model
from compstat.errors import SensitivityError
from compstat.model import augment_with_scale
from compstat.sensitivity import (constraint_identity_residual,
                                  decision_jacobian_fd, decision_jacobian_ift)
from compstat.solver import solve_interior

from conftest import separable_model


def test_fd_demand_derivatives_match_hand_formulas():
    # x_i = g_i m / p_i gives dx1/dp1 = -0.5 and dx1/dm = 0.5 at the point
    model = demand_model(np.array([0.5, 0.5]))
    bundle = decision_jacobian_fd(model, np.array([1.0, 1.0, 1.0]))
    assert bundle.method == "fd"
    assert bundle.x_jac[0, 0] == pytest.approx(-0.5, abs=1e-5)
    assert bundle.x_jac[0, 2] == pytest.approx(0.5, abs=1e-5)


def test_scale_parameter_column_is_zero():
    aug = augment_with_scale(cd_profit_model())
    a = np.array([1.0, 1.0, 2.0, 1.0])
    fd = decision_jacobian_fd(aug, a)
    assert np.max(np.abs(fd.x_jac[:, -1])) < 1e-8
    sol = solve_interior(aug, a)
    ift = decision_jacobian_ift(aug, sol)
    assert np.max(np.abs(ift.x_jac[:, -1])) < 1e-10


def test_absent_parameter_column_is_exactly_zero():
    from dataclasses import replace
    base = demand_model(np.array([0.5, 0.5]))
    padded = replace(
        base, name="padded", N=4,
        objective=lambda x, a: base.objective(x, a[:3]),
        constraints=(lambda x, a: base.constraints[0](x, a[:3]),),
        grad_x_objective=None, grad_a_objective=None,
        grad_x_constraints=None, grad_a_constraints=None,
        hess_xx_objective=None, hess_xa_objective=None,
        hess_xx_constraints=None, hess_xa_constraints=None,
        analytic_solution=lambda a: base.analytic_solution(a[:3]),
        parameter_names=("p1", "p2", "m", "unused"),
        invariance_generators=(), separable_kappa=None)
    fd = decision_jacobian_fd(padded, np.array([1.0, 1.0, 1.0, 7.0]))
    assert np.all(fd.x_jac[:, 3] == 0.0)


def test_separable_objective_has_zero_jacobian():
    model, _ = separable_model()
    a = np.array([0.3, 1.2])
    sol = solve_interior(model, a)
    ift = decision_jacobian_ift(model, sol)
    assert np.max(np.abs(ift.x_jac)) < 1e-12
    fd = decision_jacobian_fd(model, a)
    assert np.max(np.abs(fd.x_jac)) < 1e-9


def test_cd_closed_form_jacobian():
    gamma = np.array([1.0 / 3.0, 1.0 / 3.0])
    model = cd_profit_model(gamma)
    a = np.array([1.0, 1.0, 2.0])
    sol = solve_interior(model, a)
    ift = decision_jacobian_ift(model, sol)
    expected = cd_demand_jacobian(gamma)(a)
    assert np.max(np.abs(ift.x_jac - expected)) < 1e-6


@pytest.mark.parametrize("pipeline", ["analytic", "numeric"])
def test_fd_ift_agreement_on_all_benchmarks(pipeline):
    for entry in all_benchmarks():
        if pipeline == "analytic" and not entry.has_analytic:
            continue
        run = entry.prepare(pipeline)
        fd = entry.fd_bundle()
        assert np.max(np.abs(run.sens.x_jac - fd.x_jac)) < 1e-4, entry.name


def test_constraint_identity_holds_for_both_methods():
    for name in ("slutsky_hicks", "cost_constrained_profit", "principal_agent"):
        entry = get_benchmark(name)
        run = entry.prepare("numeric")
        assert constraint_identity_residual(entry.model, run.sol, run.sens) < 1e-6
        fd = entry.fd_bundle()
        assert constraint_identity_residual(entry.model, run.sol, fd) < 1e-5


def test_stencil_failure_names_parameter():
    # the second parameter sits exactly on its domain edge, so only its own
    # stencil leaves the evaluable region
    from compstat.model import ProblemModel

    def objective(x, a):
        inside = 1e-8 - a[1]
        if inside < 0:
            return float("nan")
        return float(-0.5 * (x[0] - a[0]) ** 2 + np.sqrt(inside) * x[0])

    model = ProblemModel(name="edge", M=1, N=2, objective=objective)
    with pytest.raises(SensitivityError) as excinfo:
        decision_jacobian_fd(model, np.array([0.3, 0.0]), x0=np.array([0.3]))
    assert excinfo.value.parameter_index == 1


def test_cross_check_residual_recorded():
    from compstat.sensitivity import cross_checked
    model = demand_model(np.array([0.5, 0.5]))
    sol = solve_interior(model, np.array([1.0, 1.0, 1.0]))
    bundle = cross_checked(model, sol)
    assert bundle.method == "ift"
    assert bundle.cross_check_residual is not None
    assert bundle.cross_check_residual < 1e-6
