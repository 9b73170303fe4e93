"""Run-report assembly and lossless JSON serialization.

Matrices are emitted row-major as arrays of arrays next to a labels array;
floats go through Python's shortest round-trip repr, so a serialized report
reloads bit-identically.  The schema carries an explicit version that must
be bumped on any field change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .csm import CsmResult
from .diagnostics import CheckReport
from .geometry import IsovectorSet
from .sensitivity import SensitivityBundle
from .solver import SolutionPoint

SCHEMA_VERSION = "1"


def labeled_matrix(matrix: np.ndarray, row_labels=(), col_labels=()) -> dict:
    matrix = np.asarray(matrix, dtype=float)
    return {
        "row_labels": list(row_labels),
        "col_labels": list(col_labels),
        "rows": [[float(v) for v in row] for row in matrix],
    }


def solution_dict(sol: SolutionPoint) -> dict:
    return {
        "a": [float(v) for v in sol.a],
        "x": [float(v) for v in sol.x],
        "multipliers": [float(v) for v in sol.lam],
        "kkt_residual": float(sol.kkt_residual),
        "iterations": int(sol.iterations),
        "converged": bool(sol.converged),
        "source": sol.source,
        "newton_discrepancy": (None if sol.newton_discrepancy is None
                               else float(sol.newton_discrepancy)),
    }


def sensitivity_dict(sens: SensitivityBundle, parameter_names, decision_names) -> dict:
    return {
        "method": sens.method,
        "step": None if sens.step is None else float(sens.step),
        "cross_check_residual": (None if sens.cross_check_residual is None
                                 else float(sens.cross_check_residual)),
        "x_jac": labeled_matrix(sens.x_jac, decision_names, parameter_names),
        "lam_jac": labeled_matrix(sens.lam_jac,
                                  [f"lam{k + 1}" for k in range(sens.lam_jac.shape[0])],
                                  parameter_names),
    }


def isovector_dict(iso: IsovectorSet, parameter_names) -> dict:
    return {
        "basis_kind": iso.basis_kind,
        "annihilates_objective": bool(iso.annihilates_objective),
        "redundant": bool(iso.redundant),
        "vectors": labeled_matrix(
            iso.vectors, [f"t{i + 1}" for i in range(iso.count)], parameter_names),
        "null_residuals": [[float(v) for v in row] for row in iso.null_residuals],
    }


def csm_dict(result: CsmResult) -> dict:
    return {
        "recipe": result.recipe,
        "sign_convention": result.sign_convention,
        "matrix": labeled_matrix(result.matrix, result.labels, result.labels),
        "eigenvalues": [float(v) for v in result.eigenvalues],
        "symmetry_residual": float(result.symmetry_residual),
        "rank_estimate": int(result.rank_estimate),
        "rank_tol": float(result.rank_tol),
        "symmetry_tol": float(result.symmetry_tol),
        "transform_kind": result.transform_kind,
        "note": result.note,
    }


def check_dict(rep: CheckReport) -> dict:
    return {
        "name": rep.name,
        "verdict": rep.verdict,
        "residual": None if rep.residual is None else float(rep.residual),
        "tolerance": None if rep.tolerance is None else float(rep.tolerance),
        "claim": rep.claim,
        "details": _jsonable(rep.details),
    }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return value


@dataclass
class RunReport:
    config: dict
    model: str
    solution: dict
    sensitivity: dict
    isovectors: dict
    csm_results: list
    checks: list
    errors: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": _jsonable(self.config),
            "model": self.model,
            "solution": self.solution,
            "sensitivity": self.sensitivity,
            "isovectors": self.isovectors,
            "csm_results": self.csm_results,
            "checks": self.checks,
            "errors": self.errors,
            "timings": _jsonable(self.timings),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @property
    def all_checks_pass(self) -> bool:
        return all(c["verdict"] != "fail" for c in self.checks)


def report_from_json(text: str) -> dict:
    return json.loads(text)


def matrices_to_csv(report_dict: dict) -> dict:
    """One CSV body per matrix in the report, keyed by recipe name."""
    out = {}
    for item in report_dict.get("csm_results", []):
        mat = item["matrix"]
        header = "," + ",".join(mat["col_labels"]) if mat["col_labels"] else ""
        lines = [header] if header else []
        for label, row in zip(mat["row_labels"] or [""] * len(mat["rows"]), mat["rows"]):
            lines.append(",".join([str(label)] + [repr(v) for v in row]))
        out[item["recipe"]] = "\n".join(lines) + "\n"
    return out
