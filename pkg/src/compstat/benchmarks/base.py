"""Catalog plumbing: benchmark entries, pipeline preparation, and the
helpers shared by the individual property suites."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..diagnostics import CheckReport
from ..geometry import IsovectorSet
from ..model import ProblemModel
from ..sensitivity import (SensitivityBundle, decision_jacobian_analytic,
                           decision_jacobian_fd, decision_jacobian_ift)
from ..solver import SolutionPoint, SolverConfig, newton_solve, solve_interior


@dataclass(frozen=True)
class BenchRun:
    """One prepared pipeline pass: solution, sensitivities, and directions."""
    entry: "BenchmarkEntry"
    model: ProblemModel
    sol: SolutionPoint
    sens: SensitivityBundle
    iso: IsovectorSet
    pipeline: str                    # "analytic" | "numeric"

    @property
    def tol(self) -> float:
        """Default check tolerance for this pipeline."""
        return 1e-8 if self.pipeline == "analytic" else 1e-6


@dataclass(frozen=True)
class BenchmarkEntry:
    name: str
    model: ProblemModel
    default_point: np.ndarray
    x0: np.ndarray
    isovector_recipe: Callable[[ProblemModel, SolutionPoint, SensitivityBundle], IsovectorSet]
    property_suite: tuple = ()       # of (name, fn(BenchRun) -> CheckReport)
    analytic_x_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    analytic_lam_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    derived_matrices: Optional[Callable] = None   # BenchRun -> {name: (matrix, sign)}
    description: str = ""

    @property
    def has_analytic(self) -> bool:
        return self.model.analytic_solution is not None

    def suite_names(self) -> tuple:
        return tuple(name for name, _ in self.property_suite)

    def prepare(self, pipeline: str = "analytic", a=None,
                config: SolverConfig = SolverConfig()) -> BenchRun:
        """Solve, differentiate, and build directions for one parameter point.

        "analytic" uses the registered closed forms where they exist;
        "numeric" forces Newton from the registered start plus the
        implicit-function sensitivities.
        """
        a = np.asarray(self.default_point if a is None else a, dtype=float)
        if pipeline == "analytic" and self.has_analytic:
            sol = solve_interior(self.model, a, x0=self.x0, config=config)
            if self.analytic_x_jac is not None:
                sens = decision_jacobian_analytic(
                    self.model, sol, self.analytic_x_jac, self.analytic_lam_jac)
            else:
                sens = decision_jacobian_ift(self.model, sol)
        else:
            pipeline = "numeric"
            sol = newton_solve(self.model, a, self.x0, config)
            sens = decision_jacobian_ift(self.model, sol)
        iso = self.isovector_recipe(self.model, sol, sens)
        return BenchRun(entry=self, model=self.model, sol=sol, sens=sens,
                        iso=iso, pipeline=pipeline)

    def fd_bundle(self, a=None, config: SolverConfig = SolverConfig()) -> SensitivityBundle:
        a = np.asarray(self.default_point if a is None else a, dtype=float)
        return decision_jacobian_fd(self.model, a, config, x0=self.x0)

    def run_suite(self, pipeline: str = "analytic",
                  config: SolverConfig = SolverConfig()) -> list:
        run = self.prepare(pipeline, config=config)
        return [fn(run) for _, fn in self.property_suite]


def report(name: str, claim: str, residual: float, tol: float, **details) -> CheckReport:
    verdict = "pass" if residual <= tol else "fail"
    return CheckReport(name=name, verdict=verdict, residual=float(residual),
                       tolerance=float(tol), claim=claim, details=details)


def matrix_mismatch(actual: np.ndarray, expected: np.ndarray) -> float:
    """Max-norm difference scaled by the size of the expected matrix."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = max(1.0, float(np.max(np.abs(expected))) if expected.size else 0.0)
    diff = float(np.max(np.abs(actual - expected))) if expected.size else 0.0
    return diff / scale


def min_eig_violation(matrix: np.ndarray, sign: str, floor: float = 1e-9) -> float:
    """Relative amount by which the spectrum crosses to the wrong side.

    The floor keeps numerically-zero matrices (legitimately rank-0 cases)
    from reporting rounding noise as an order-one violation.
    """
    sym = 0.5 * (matrix + matrix.T)
    if sym.size == 0:
        return 0.0
    eig = np.linalg.eigvalsh(sym)
    top = float(np.max(np.abs(eig)))
    bad = -float(eig[0]) if sign == "positive" else float(eig[-1])
    return max(0.0, bad) / max(top, floor)
