import json

import numpy as np
import pytest

from compstat.cli import (cmd_list_models, cmd_verify_all,
                          config_from_mapping, main, parse_config_file)
from compstat.errors import ConfigurationError


def run_main(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_analyze_demand_report_and_exit_code(tmp_path, capsys):
    out_file = tmp_path / "report.json"
    code, _, _ = run_main([
        "analyze", "--model", "slutsky_hicks", "--at", "p=1,1", "--at", "m=1",
        "--out", str(out_file)], capsys)
    assert code == 0
    payload = json.loads(out_file.read_text())
    assert payload["schema_version"] == "1"
    assert payload["solution"]["x"] == pytest.approx([0.5, 0.5])
    omega = next(item for item in payload["csm_results"]
                 if item["recipe"] == "omega_eq7")
    # main recipe at the point: the negated substitution matrix (multiplier 1)
    assert np.asarray(omega["matrix"]["rows"]) == pytest.approx(
        np.array([[0.25, -0.25], [-0.25, 0.25]]), abs=1e-10)
    assert omega["matrix"]["row_labels"] == ["d1", "d2"]
    # the application-level substitution matrix is emitted alongside
    sigma = next(item for item in payload["csm_results"]
                 if item["recipe"] == "derived:substitution")
    assert np.asarray(sigma["matrix"]["rows"]) == pytest.approx(
        np.array([[-0.25, 0.25], [0.25, -0.25]]), abs=1e-10)
    assert sigma["sign_convention"] == "negative_semidefinite_expected"
    assert all(chk["verdict"] != "fail" for chk in payload["checks"])


def test_analyze_accepts_space_separated_groups(capsys):
    code, out, _ = run_main(["analyze", "--model", "slutsky_hicks",
                             "--at", "p=1,2", "m=3"], capsys)
    assert code == 0
    assert json.loads(out)["solution"]["a"] == [1.0, 2.0, 3.0]


def test_analyze_report_round_trips_losslessly(tmp_path, capsys):
    out_file = tmp_path / "report.json"
    code, _, _ = run_main(["analyze", "--model", "profit_cd",
                           "--out", str(out_file)], capsys)
    assert code == 0
    text = out_file.read_text()
    payload = json.loads(text)
    assert json.loads(json.dumps(payload)) == payload


def test_analyze_is_deterministic_apart_from_timings(capsys):
    code1, out1, _ = run_main(["analyze", "--model", "market_power"], capsys)
    code2, out2, _ = run_main(["analyze", "--model", "market_power"], capsys)
    assert code1 == code2 == 0
    d1, d2 = json.loads(out1), json.loads(out2)
    d1.pop("timings"), d2.pop("timings")
    assert d1 == d2


def test_sweep_produces_ordered_reports_with_passing_invariance(capsys):
    code, out, _ = run_main(["analyze", "--model", "profit_cd",
                             "--sweep", "p=1:3:5"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert len(payload["reports"]) == 5
    prices = [rep["solution"]["a"][2] for rep in payload["reports"]]
    assert prices == pytest.approx(list(np.linspace(1, 3, 5)))
    for rep in payload["reports"]:
        inv = [c for c in rep["checks"] if c["name"].startswith("invariance")]
        assert inv and all(c["verdict"] == "pass" for c in inv)


def test_malformed_config_key_exits_3_without_partial_report(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = slutsky_hicks\nsolver.tole = 1e-9\n")
    out_file = tmp_path / "never.json"
    code, _, err = run_main(["analyze", "--config", str(cfg),
                             "--out", str(out_file)], capsys)
    assert code == 3
    assert "unknown config key" in err
    assert not out_file.exists()


def test_nonpositive_tolerance_rejected():
    with pytest.raises(ConfigurationError):
        config_from_mapping({"model": "slutsky_hicks", "solver.tol": "-1"})


def test_config_file_parsing_with_comments(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("""
# demand analysis
model = slutsky_hicks
at.p = 1,2   # prices
at.m = 3
solver.tol = 1e-11
csm.recipes = omega_eq7,universal_U
format = table
""")
    parsed = config_from_mapping(parse_config_file(str(cfg)))
    assert parsed.model == "slutsky_hicks"
    assert parsed.at == {"p": [1.0, 2.0], "m": [3.0]}
    assert parsed.solver_tol == 1e-11
    assert parsed.recipes == ("omega_eq7", "universal_U")


def test_unknown_model_exits_3(capsys):
    code, _, err = run_main(["analyze", "--model", "nonexistent"], capsys)
    assert code == 3 and "unknown benchmark" in err


def test_bad_at_group_exits_3(capsys):
    code, _, err = run_main(["analyze", "--model", "slutsky_hicks",
                             "--at", "zz=1"], capsys)
    assert code == 3 and "matches nothing" in err


def test_verify_all_clean_checkout(capsys):
    rows, code = cmd_verify_all()
    assert code == 0
    assert all(row["verdict"] == "pass" for row in rows)
    names = {row["benchmark"] for row in rows}
    assert len(names) == 9


def test_verify_all_only_filter(capsys):
    rows, code = cmd_verify_all(only=("principal_agent",))
    assert code == 0
    assert {row["benchmark"] for row in rows} == {"principal_agent"}


def test_verify_all_tolerance_override_fails_fd_paths(capsys):
    rows, code = cmd_verify_all(only=("slutsky_hicks",), tol_override=1e-15)
    assert code == 1
    assert any(row["verdict"] == "fail" for row in rows)


def test_verify_all_cli_table_output(capsys):
    code, out, _ = run_main(["verify-all", "--only", "pareto_allocation"], capsys)
    assert code == 0
    assert "pareto_allocation" in out and "pass" in out


def test_list_models_three_stable_formats(capsys):
    for fmt in ("table", "json", "names"):
        first = cmd_list_models(fmt)
        second = cmd_list_models(fmt)
        assert first == second
    names = cmd_list_models("names").strip().splitlines()
    assert "efficient_portfolio" in names
    payload = json.loads(cmd_list_models("json"))
    assert {entry["name"] for entry in payload} == set(names)
    table = cmd_list_models("table")
    assert "slutsky_hicks" in table


def test_csv_format_emits_matrix_blocks(capsys):
    code, out, _ = run_main(["analyze", "--model", "slutsky_hicks",
                             "--format", "csv"], capsys)
    assert code == 0
    assert "# slutsky_hicks omega_eq7" in out
    assert "d1" in out


def test_out_dir_environment_variable(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("COMPSTAT_OUT_DIR", str(tmp_path))
    code, _, _ = run_main(["analyze", "--model", "slutsky_hicks",
                           "--out", "nested/report.json"], capsys)
    assert code == 0
    assert (tmp_path / "nested" / "report.json").exists()


def test_module_factory_model_spec(capsys):
    code, out, _ = run_main([
        "analyze", "--model",
        "compstat.benchmarks.slutsky:register_slutsky_hicks"], capsys)
    assert code == 0
    assert json.loads(out)["model"] == "slutsky_hicks"


def test_report_schema_fields_are_pinned_to_version(capsys):
    # any change to the serialized field set requires a schema version bump
    code, out, _ = run_main(["analyze", "--model", "slutsky_hicks"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["schema_version"] == "1"
    assert set(payload) == {
        "schema_version", "config", "model", "solution", "sensitivity",
        "isovectors", "csm_results", "checks", "errors", "timings"}
    assert set(payload["solution"]) == {
        "a", "x", "multipliers", "kkt_residual", "iterations", "converged",
        "source", "newton_discrepancy"}
    assert set(payload["csm_results"][0]) == {
        "recipe", "sign_convention", "matrix", "eigenvalues",
        "symmetry_residual", "rank_estimate", "rank_tol", "symmetry_tol",
        "transform_kind", "note"}
    universal = next(item for item in payload["csm_results"]
                     if item["recipe"] == "universal_U")
    assert universal["matrix"]["row_labels"] == ["p1", "p2", "m"]


def test_solver_failure_exits_2(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = market_power\nsolver.max_iter = 1\n")
    code, out, _ = run_main(["analyze", "--config", str(cfg)], capsys)
    assert code == 2
    payload = json.loads(out)
    assert payload["errors"][0]["stage"] == "solve"
    assert not payload["solution"]["converged"]


def test_fd_method_pipeline(capsys):
    code, out, _ = run_main(["analyze", "--model", "slutsky_hicks",
                             "--method", "fd"], capsys)
    assert code == 0
    assert json.loads(out)["sensitivity"]["method"] == "fd"
