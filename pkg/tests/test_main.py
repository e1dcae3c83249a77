"""
End-to-end tests for the command-line dispatcher and its exit codes.
"""
import json

import pytest

from main import EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, dispatch
from services.instance_service import parse_native

L_TEXT = "pmpdc 4 4 2\n0 1 2 10\n1 0 1 9\n2 1 0 8\n10 9 8 0\n{s}\n"


def key_values(out):
    pairs = [line.split(None, 1) for line in out.strip().splitlines()]
    return {p[0]: p[1] if len(p) > 1 else "" for p in pairs}


@pytest.fixture
def line_file(tmp_path):
    path = tmp_path / "L.txt"
    path.write_text(L_TEXT.format(s="3 3 3 3"))
    return str(path)


@pytest.fixture
def tight_file(tmp_path):
    path = tmp_path / "L_tight.txt"
    path.write_text(L_TEXT.format(s="0.5 0.5 0.5 0.5"))
    return str(path)


@pytest.fixture
def profile_file(tmp_path):
    path = tmp_path / "Q.txt"
    path.write_text("approval 3 3 2\n111\n100\n000\n")
    return str(path)


@pytest.mark.parametrize("solver", ["exact", "exact-bigm", "grasp"])
def test_solve_pmpdc_line_instance(line_file, capsys, solver):
    assert dispatch(["solve-pmpdc", line_file, "--solver", solver, "--seed", "4"]) == EXIT_OK
    kv = key_values(capsys.readouterr().out)
    assert kv["objective"] == "2"
    assert kv["open"] == "1 3"


def test_solve_pmpdc_lagrangian_reports_bound(line_file, capsys):
    assert dispatch(["solve-pmpdc", line_file, "--solver", "lagrangian", "--iterations", "50"]) == EXIT_OK
    kv = key_values(capsys.readouterr().out)
    assert float(kv["lower_bound"]) <= 2
    assert kv["objective"] == "2"


def test_solve_pmpdc_infeasible_prints_witness(tight_file, capsys):
    assert dispatch(["solve-pmpdc", tight_file]) == EXIT_INFEASIBLE
    kv = key_values(capsys.readouterr().out)
    assert kv["status"] == "infeasible"
    assert kv["p_min"] == "4"


def test_solve_pmpdc_budget(tmp_path, capsys):
    n = 30
    rows = "\n".join(" ".join("0" for _ in range(n)) for _ in range(n))
    path = tmp_path / "big.txt"
    path.write_text(f"pmpdc {n} {n} 15\n{rows}\n" + " ".join("0" for _ in range(n)) + "\n")
    assert dispatch(["solve-pmpdc", str(path)]) == EXIT_BUDGET
    assert "budget" in capsys.readouterr().err


def test_solve_pmpdc_p_override(line_file, capsys):
    assert dispatch(["solve-pmpdc", line_file, "--p", "4"]) == EXIT_OK
    assert key_values(capsys.readouterr().out)["objective"] == "0"


def test_input_errors(tmp_path, line_file):
    bad = tmp_path / "bad.txt"
    bad.write_text("pmpdc 2 2 1\n0 1\n")
    assert dispatch(["solve-pmpdc", str(bad)]) == EXIT_INPUT
    assert dispatch(["solve-pmpdc", str(tmp_path / "missing.txt")]) == EXIT_INPUT
    assert dispatch(["solve-pmpdc", line_file, "--solver", "simplex"]) == EXIT_INPUT
    assert dispatch([]) == EXIT_INPUT


def test_feascheck(line_file, tight_file, capsys):
    assert dispatch(["feascheck", line_file]) == EXIT_OK
    assert key_values(capsys.readouterr().out)["p_min"] == "2"
    assert dispatch(["feascheck", tight_file]) == EXIT_INFEASIBLE
    assert dispatch(["feascheck", tight_file, "--p", "4"]) == EXIT_OK


def test_solve_committee(profile_file, capsys):
    assert dispatch(["solve-committee", profile_file]) == EXIT_OK
    kv = key_values(capsys.readouterr().out)
    assert kv["committee"] == "100"
    assert kv["objective"] == "3"
    assert dispatch(["solve-committee", profile_file, "--criterion", "minimax"]) == EXIT_OK
    assert key_values(capsys.readouterr().out)["objective"] == "2"
    assert dispatch(["solve-committee", profile_file, "--k", "1"]) == EXIT_OK
    assert key_values(capsys.readouterr().out)["objective"] == "2"
    assert dispatch(["solve-committee", profile_file, "--criterion", "minisum", "--format", "csv"]) == EXIT_OK
    assert "committee,100\n" in capsys.readouterr().out


def test_solve_sensors_weighted(capsys):
    argv = ["solve-sensors", "--a", "3", "--b", "1", "--criterion", "weighted", "--weights", "1,1,1",
            "--resolution", "0.1", "--levels", "1"]
    assert dispatch(argv) == EXIT_OK
    kv = key_values(capsys.readouterr().out)
    assert float(kv["value"]) == pytest.approx(0.5)
    assert "sensor_3" in kv


def test_solve_sensors_scenario_file_and_field(tmp_path, capsys):
    scenario = tmp_path / "blade.txt"
    scenario.write_text("sensors 2 2 0.01 2 1\n")
    field = tmp_path / "field.csv"
    argv = ["solve-sensors", str(scenario), "--criterion", "max-area", "--resolution", "0.1", "--levels", "1",
            "--field-csv", str(field)]
    assert dispatch(argv) == EXIT_OK
    assert "area" in capsys.readouterr().out
    assert field.read_text().startswith("x,y,eccentricity,feasible")


def test_solve_sensors_infeasible_and_missing_input(capsys):
    argv = ["solve-sensors", "--a", "2", "--b", "2", "--criterion", "max-area", "--Delta", "1",
            "--resolution", "0.1"]
    assert dispatch(argv) == EXIT_INFEASIBLE
    assert "min_Delta" in capsys.readouterr().out
    assert dispatch(["solve-sensors", "--criterion", "max-area", "--Delta", "2"]) == EXIT_INPUT


def test_gen_writes_parseable_instances(tmp_path):
    out = tmp_path / "gen.txt"
    assert dispatch(["gen", "pmpdc", "--n", "6", "--p", "2", "--seed", "9", "--out", str(out)]) == EXIT_OK
    inst = parse_native(out.read_text())
    assert inst.n_demand == 6 and inst.p == 2
    assert dispatch(["gen", "approval", "--n", "4", "--m", "5", "--k", "2", "--out", str(out)]) == EXIT_OK
    assert parse_native(out.read_text()).profile.m_candidates == 5


def test_bench_small_run(tmp_path, capsys):
    summary = tmp_path / "summary.json"
    argv = ["bench", "--solvers", "exact,minisum", "--pmpdc-instances", "2", "--committee-profiles", "1",
            "--format", "csv", "--summary", str(summary)]
    assert dispatch(argv) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("instance_id,solver")
    assert "wall_time" not in out.splitlines()[0]
    data = json.loads(summary.read_text())
    assert data["config"]["seed"] == 0
    assert "wall_time" in data["results"][0]


def test_bench_unknown_solver():
    assert dispatch(["bench", "--solvers", "simplex"]) == EXIT_INPUT


def test_bench_selftest_output_is_byte_identical(tmp_path):
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    assert dispatch(["bench", "--selftest", "--format", "csv", "--out", str(first)]) == EXIT_OK
    assert dispatch(["bench", "--selftest", "--format", "csv", "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert "grasp_gap_rate" in first.read_text()


def test_solve_pmpdc_bracketed_infeasibility_reports_lower_bound(tmp_path, capsys):
    n = 24
    rows = []
    for i in range(n):
        t, k = divmod(i, 3)
        served = {3 * t + k, 3 * t + (k + 1) % 3}
        rows.append(" ".join("1" if j in served else "10" for j in range(n)))
    path = tmp_path / "triangles.txt"
    path.write_text(f"pmpdc {n} {n} 8\n" + "\n".join(rows) + "\n" + " ".join("1" for _ in range(n)) + "\n")
    assert dispatch(["solve-pmpdc", str(path)]) == EXIT_INFEASIBLE
    kv = key_values(capsys.readouterr().out)
    assert kv["p_lower"] == "9"
    assert "p_min" not in kv
