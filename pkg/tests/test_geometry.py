import numpy as np
import pytest

from compstat.benchmarks import get_benchmark
from compstat.benchmarks.profit import cd_profit_model
from compstat.benchmarks.slutsky import demand_model
from compstat.errors import EmptyTangentError, NullPropertyError
from compstat.geometry import (build_isovectors, gcd_apply,
                               one_term_compensation, prescribe_isovectors,
                               verify_conformance)
from compstat.model import augment_with_scale
from compstat.sensitivity import decision_jacobian_ift
from compstat.solver import solve_interior


def test_nullspace_dimension_law_budget_constraint():
    x = np.array([0.4, 0.8])
    stack = np.append(-x, 1.0).reshape(1, -1)
    iso = build_isovectors(stack)
    assert iso.basis_kind == "nullspace"
    assert iso.count == 2                       # N - C = 3 - 1
    assert np.max(iso.null_residuals) < 1e-14
    # rows orthonormal by construction
    assert iso.vectors @ iso.vectors.T == pytest.approx(np.eye(2), abs=1e-14)


def test_empty_target_stack_gives_standard_basis():
    iso = build_isovectors(np.zeros((0, 4)))
    assert iso.vectors == pytest.approx(np.eye(4))


def test_random_stack_orthogonality():
    rng = np.random.default_rng(0)
    stack = rng.normal(size=(2, 4))
    iso = build_isovectors(stack)
    assert iso.count == 2
    # independent oracle: explicit inner products against both gradients
    for row in iso.vectors:
        for grad in stack:
            assert abs(row @ grad) < 1e-12


def test_full_rank_stack_has_no_tangent_directions():
    with pytest.raises(EmptyTangentError):
        build_isovectors(np.eye(3))


def test_prescribed_budget_rows_accepted():
    x = np.array([0.4, 0.8])
    stack = np.append(-x, 1.0).reshape(1, -1)
    rows = np.hstack([np.eye(2), x.reshape(-1, 1)])
    iso = prescribe_isovectors(rows, stack)
    assert iso.basis_kind == "prescribed"
    assert np.max(iso.null_residuals) < 1e-15
    assert not iso.redundant


def test_prescribed_profit_scale_rows_accepted():
    aug = augment_with_scale(cd_profit_model())
    a = np.array([1.0, 1.0, 2.0, 1.3])
    sol = solve_interior(aug, a)
    grad = aug.obj_grad_a(sol.x, a)
    s_val, phi = a[-1], grad[-1]
    f_level = grad[2] / s_val
    rows = np.zeros((3, 4))
    rows[0, 0] = rows[1, 1] = 1.0
    rows[0, 3] = s_val * sol.x[0] / phi
    rows[1, 3] = s_val * sol.x[1] / phi
    rows[2, 2] = 1.0
    rows[2, 3] = -s_val * f_level / phi
    iso = prescribe_isovectors(rows, grad.reshape(1, -1), annihilates_objective=True)
    assert iso.annihilates_objective
    assert np.max(iso.null_residuals) < 1e-10


def test_normal_direction_rejected():
    x = np.array([0.4, 0.8])
    normal = np.append(-x, 1.0)
    with pytest.raises(NullPropertyError) as excinfo:
        prescribe_isovectors(normal.reshape(1, -1), normal.reshape(1, -1))
    assert excinfo.value.row == 0 and excinfo.value.target == 0


def test_dependent_rows_accepted_with_redundancy_warning():
    x = np.array([0.4, 0.8])
    stack = np.append(-x, 1.0).reshape(1, -1)
    rows = np.array([[1.0, 0.0, x[0]], [2.0, 0.0, 2 * x[0]]])
    with pytest.warns(UserWarning, match="redundant"):
        iso = prescribe_isovectors(rows, stack)
    assert iso.redundant


def test_one_term_compensation_profit_rows():
    # price-compensated input directions: output level on the own slot and
    # the input quantity on the output-price slot
    model = cd_profit_model()
    a = np.array([1.0, 1.0, 2.0])
    sol = solve_interior(model, a)
    iso = one_term_compensation(model, sol.x, a, target="objective", comp_index=2)
    f_level = model.obj_grad_a(sol.x, a)[2]
    assert iso.basis_kind == "one_term"
    assert iso.count == 2
    assert iso.vectors[0] == pytest.approx([f_level, 0.0, sol.x[0]])
    assert iso.vectors[1] == pytest.approx([0.0, f_level, sol.x[1]])
    assert np.max(iso.null_residuals) < 1e-14


def test_one_term_compensation_scale_augmented():
    aug = augment_with_scale(cd_profit_model())
    a = np.array([1.0, 1.0, 2.0, 1.0])
    sol = solve_interior(aug, a)
    iso = one_term_compensation(aug, sol.x, a, target="objective", comp_index=-1)
    grad = aug.obj_grad_a(sol.x, a)
    # row alpha: (objective scale-derivative) e_alpha - (objective
    # alpha-derivative) e_scale
    for alpha in range(3):
        expected = np.zeros(4)
        expected[alpha] = grad[3]
        expected[3] = -grad[alpha]
        assert iso.vectors[alpha] == pytest.approx(expected)


def test_one_term_compensation_recovers_budget_rows():
    # single linear constraint: compensating every price through the budget
    # level reproduces the classic substitution rows exactly
    from compstat.benchmarks import get_benchmark
    from compstat.csm import build_omega
    entry = get_benchmark("slutsky_hicks")
    run = entry.prepare("analytic")
    iso = one_term_compensation(run.model, run.sol.x, run.sol.a,
                                target="constraint:0", comp_index=2)
    assert iso.vectors == pytest.approx(
        np.hstack([np.eye(2), run.sol.x.reshape(-1, 1)]))
    omega_one_term = build_omega(run.model, run.sol, run.sens, iso)
    omega_prescribed = build_omega(run.model, run.sol, run.sens, run.iso)
    assert omega_one_term.matrix == pytest.approx(omega_prescribed.matrix,
                                                  abs=1e-12)


def test_one_term_compensation_degenerate_flag():
    model = demand_model(np.array([0.5, 0.5]))
    x = np.array([0.5, 0.5])
    a = np.array([1.0, 1.0, 1.0])
    # the objective has a vanishing parameter gradient: compensation through
    # any slot is degenerate but still emitted
    with pytest.warns(UserWarning, match="degenerate"):
        iso = one_term_compensation(model, x, a, target="objective", comp_index=2)
    assert iso.count == 2
    assert np.max(np.abs(iso.vectors)) == 0.0


def test_gcd_apply_identity_and_demand_matrix():
    entry = get_benchmark("slutsky_hicks")
    run = entry.prepare("analytic")
    eye_iso = build_isovectors(np.zeros((0, 3)))
    assert gcd_apply(eye_iso, run.sens.x_jac) == pytest.approx(run.sens.x_jac)
    # compensated rows reproduce the hand substitution matrix
    applied = gcd_apply(run.iso, run.sens.x_jac)
    assert applied == pytest.approx(np.array([[-0.25, 0.25], [0.25, -0.25]]),
                                    abs=1e-12)


def test_gcd_apply_scale_column_contributes_nothing():
    aug = augment_with_scale(cd_profit_model())
    a = np.array([1.0, 1.0, 2.0, 1.0])
    sol = solve_interior(aug, a)
    sens = decision_jacobian_ift(aug, sol)
    rows_with = np.hstack([np.eye(3), np.array([[0.7], [0.9], [-1.1]])])
    rows_without = np.hstack([np.eye(3), np.zeros((3, 1))])
    with_scale = rows_with @ sens.x_jac.T
    without_scale = rows_without @ sens.x_jac.T
    assert np.max(np.abs(with_scale - without_scale)) < 1e-10


def test_conformance_empty_and_benchmarks():
    table, ok = verify_conformance(np.zeros((2, 2)), np.zeros((0, 2)))
    assert ok and table.shape == (0, 2)
    for name in ("slutsky_hicks", "principal_agent"):
        entry = get_benchmark(name)
        run = entry.prepare("numeric")
        x_semi = gcd_apply(run.iso, run.sens.x_jac)
        table, ok = verify_conformance(
            x_semi, entry.model.con_grad_x_stack(run.sol.x, run.sol.a),
            tol=1e-8 if name == "slutsky_hicks" else 1e-6)
        assert ok, name
