"""Structural checks at a solution point: envelope, invariance,
semidefiniteness, rank bounds, and the separable-constraint reduction.

Each check returns a CheckReport rather than raising; a failed check
carries its residual and tolerance, a skipped check carries a reason.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import fd
from .csm import CsmResult, build_omega
from .errors import CompstatError
from .geometry import IsovectorSet, prescribe_isovectors
from .model import InvarianceGenerator, ProblemModel
from .sensitivity import SensitivityBundle
from .solver import (SolutionPoint, SolverConfig, newton_solve,
                     projected_hessian_extremes)

TOL_ANALYTIC = 1e-8
TOL_FD = 1e-5


@dataclass(frozen=True)
class CheckReport:
    name: str
    verdict: str                      # "pass" | "fail" | "skipped"
    residual: Optional[float]
    tolerance: Optional[float]
    claim: str                        # machine-readable tag of the property checked
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _report(name, claim, residual, tolerance, **details) -> CheckReport:
    verdict = "pass" if residual <= tolerance else "fail"
    return CheckReport(name=name, verdict=verdict, residual=float(residual),
                       tolerance=float(tolerance), claim=claim, details=details)


def _skipped(name, claim, reason) -> CheckReport:
    return CheckReport(name=name, verdict="skipped", residual=None, tolerance=None,
                       claim=claim, details={"reason": reason})


def check_envelope(model: ProblemModel, sol: SolutionPoint, iso: IsovectorSet,
                   value_fd_step: Optional[float] = None,
                   solver_config: SolverConfig = SolverConfig(),
                   tol: float = TOL_FD) -> CheckReport:
    """Directional derivatives of the value function along each tangent row
    must match the partial effect on the objective with decisions frozen;
    when the rows also annihilate the objective, both must vanish."""
    a = sol.a
    stencil_config = SolverConfig(tol=min(solver_config.tol, 1e-12),
                                  max_iter=solver_config.max_iter,
                                  max_backtracks=solver_config.max_backtracks,
                                  cross_check_newton=False)

    def value_at(b):
        if model.analytic_solution is not None:
            x, _ = model.analytic_solution(b)
            return model.f(np.asarray(x, dtype=float), b)
        point = newton_solve(model, b, sol.x, stencil_config)
        if not point.converged:
            raise CompstatError("stencil solve did not converge")
        return model.f(point.x, b)

    fa = model.obj_grad_a(sol.x, a)
    scale = max(1.0, float(np.max(np.abs(a))))
    v_dir = np.empty(iso.count)
    f_dir = np.empty(iso.count)
    for alpha in range(iso.count):
        t = iso.vectors[alpha]
        t_scale = max(float(np.max(np.abs(t))), 1e-12)
        h = value_fd_step if value_fd_step is not None else fd.STEP_FIRST * scale / t_scale
        try:
            v_plus = value_at(a + h * t)
            v_minus = value_at(a - h * t)
        except CompstatError as exc:
            return _skipped("envelope", "envelope-identity",
                            f"stencil did not converge along direction {alpha}: {exc}")
        v_dir[alpha] = (v_plus - v_minus) / (2.0 * h)
        f_dir[alpha] = float(t @ fa)
    residual = float(np.max(np.abs(v_dir - f_dir))) if iso.count else 0.0
    if iso.annihilates_objective:
        residual = max(residual, float(np.max(np.abs(v_dir))) if iso.count else 0.0)
    min_curv, max_curv = projected_hessian_extremes(model, sol)
    return _report("envelope", "envelope-identity", residual, tol,
                   value_directional=v_dir.tolist(),
                   objective_directional=f_dir.tolist(),
                   annihilates_objective=iso.annihilates_objective,
                   tangent_hessian_range=[min_curv, max_curv])


def check_invariance(model: ProblemModel, gen: InvarianceGenerator,
                     sol: SolutionPoint, sens: SensitivityBundle,
                     tol: float = TOL_FD) -> CheckReport:
    """Residual of X(x(a)) - sum_mu A_mu(a) dx/da_mu = 0."""
    X = np.asarray(gen.X_map(sol.x), dtype=float)
    A = np.asarray(gen.A_map(sol.a), dtype=float)
    residual_vec = X - sens.x_jac @ A
    scale = max(1.0, float(np.max(np.abs(sol.x))))
    residual = float(np.max(np.abs(residual_vec))) / scale
    return _report(f"invariance[{gen.name}]", "decision-invariance", residual, tol,
                   residual_vector=residual_vec.tolist())


def check_semidefinite(matrix: Union[np.ndarray, CsmResult], expected_sign: str,
                       tol: float = TOL_ANALYTIC,
                       symmetry_tol: float = TOL_ANALYTIC,
                       name: str = "semidefinite") -> CheckReport:
    """Symmetry plus one-sided spectrum of the symmetrized matrix.

    expected_sign is "positive" or "negative"; the eigenvalue test is
    relative to the largest eigenvalue magnitude, and a zero matrix passes.
    """
    mat = matrix.matrix if isinstance(matrix, CsmResult) else np.asarray(matrix, dtype=float)
    sym_res = float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0
    sym = 0.5 * (mat + mat.T)
    eig = np.linalg.eigvalsh(sym) if sym.size else np.zeros(0)
    top = float(np.max(np.abs(eig))) if eig.size else 0.0
    if expected_sign == "positive":
        violation = max(0.0, -float(eig[0])) if eig.size else 0.0
    elif expected_sign == "negative":
        violation = max(0.0, float(eig[-1])) if eig.size else 0.0
    else:
        raise ValueError(f"unknown expected sign {expected_sign!r}")
    residual = violation / max(top, 1e-9)
    sym_ok = sym_res <= symmetry_tol * max(1.0, top)
    report = _report(name, f"{expected_sign}-semidefinite", residual, tol,
                     eigenvalues=eig.tolist(), symmetry_residual=sym_res)
    if report.verdict == "pass" and not sym_ok:
        return CheckReport(name=name, verdict="fail", residual=sym_res,
                           tolerance=symmetry_tol * max(1.0, top),
                           claim="symmetry-prerequisite",
                           details={"eigenvalues": eig.tolist(),
                                    "symmetry_residual": sym_res})
    return report


def check_rank_bound(csm: CsmResult, M: int, K: int, A: Optional[int] = None,
                     name: str = "rank_bound") -> CheckReport:
    """rank(matrix) must not exceed min(M - K, order) with the order defaulting
    to the matrix size."""
    bound = min(M - K, A if A is not None else csm.order)
    rank = csm.rank_estimate
    verdict = "pass" if rank <= bound else "fail"
    return CheckReport(name=name, verdict=verdict, residual=float(rank),
                       tolerance=float(bound), claim="rank-bound",
                       details={"rank": rank, "bound": bound,
                                "eigenvalues": csm.eigenvalues.tolist()})


def check_hatta_reduction(model: ProblemModel, sol: SolutionPoint,
                          sens: SensitivityBundle, tol: float = 1e-6) -> CheckReport:
    """For constraints of the separable form a_kappa - k(x, rest) = 0, the
    compensation rows built from the k-gradients must reproduce the main
    recipe entry for entry."""
    if model.separable_kappa is None:
        return _skipped("hatta_reduction", "separable-constraint-reduction",
                        "model does not declare separable constraint parameters")
    kappa = tuple(model.separable_kappa)
    if len(kappa) != model.K:
        return _skipped("hatta_reduction", "separable-constraint-reduction",
                        "separable slots do not match the constraint count")
    ga = model.con_grad_a_stack(sol.x, sol.a)
    for l in range(model.K):
        expected = np.zeros(model.K)
        expected[l] = 1.0
        if np.max(np.abs(ga[l, list(kappa)] - expected)) > 1e-8:
            return _skipped("hatta_reduction", "separable-constraint-reduction",
                            f"constraint {l} is not linear-separable in its slot")
    p_slots = [mu for mu in range(model.N) if mu not in kappa]
    k_grads = -ga[:, p_slots]                       # K x len(p_slots), dk_l/dp
    rows = np.zeros((len(p_slots), model.N))
    for idx, mu in enumerate(p_slots):
        rows[idx, mu] = 1.0
        for l in range(model.K):
            rows[idx, kappa[l]] = k_grads[l, idx]
    iso = prescribe_isovectors(rows, ga)
    omega_ref = build_omega(model, sol, sens, iso).matrix
    # independent assembly: compensated decision columns and p-slot brackets
    x_comp = sens.x_jac[:, p_slots] + sens.x_jac[:, list(kappa)] @ k_grads
    lxa = model.lagrangian_hess_xa(sol.x, sol.a, sol.lam)
    display = lxa[:, p_slots].T @ x_comp
    scale = max(1.0, float(np.max(np.abs(omega_ref))))
    residual = float(np.max(np.abs(display - omega_ref))) / scale
    return _report("hatta_reduction", "separable-constraint-reduction", residual, tol,
                   rows=rows.tolist())
