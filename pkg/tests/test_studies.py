"""Command-line and runner tests on small, fast configurations."""

import math

import pytest

import main as cli
from convexlab.core.errors import InvalidArgumentError
from convexlab.core.mesh import build_structured_mesh
from convexlab.core.settings import THREADS_ENV_VAR
from convexlab.core.textio import read_constraint_labels, read_coo, read_csv, read_csv_columns, write_mesh
from convexlab.experiments.runner import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, ExperimentRunner
from convexlab.experiments.studies import make_target, observed_orders


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)


def test_mesh_command_writes_mesh_and_normals(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["mesh", "--kind", "mesh1", "--n", "2", "--out", str(out)]) == EXIT_OK
    assert (out / "mesh_mesh1_2.txt").read_text().startswith("9 8\n")
    header, rows = read_csv(out / "mesh_mesh1_2_normals.csv")
    assert header == ["nx", "ny", "angle"]
    assert len(rows) == 3
    assert "3 normal directions:" in capsys.readouterr().out


def test_mesh_command_reads_and_refines_file(tmp_path):
    source = write_mesh(build_structured_mesh("mesh2", 2), tmp_path / "square.txt")
    out = tmp_path / "out"
    assert cli.main(["mesh", "--mesh-file", str(source), "--refine", "1", "--out", str(out)]) == EXIT_OK
    assert (out / "mesh_file_square.txt").read_text().startswith("25 32\n")


def test_pm_audit_command(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["pm-audit", "--kind", "mesh4", "--n", "8", "--seed", "7", "--out", str(out)]) == EXIT_OK
    columns = read_csv_columns(out / "pm_audit.csv")
    assert columns["product"]
    assert min(columns["product"]) >= -1e-12


def test_consistency_command_for_one_group(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["consistency", "--case", "eq15", "--out", str(out)]) == EXIT_OK
    _, rows = read_csv(out / "consistency_summary.csv")
    assert rows == [["eq15", "consistent", "consistent", True, "eq15"]]
    assert (out / "consistency.csv").exists()


def test_unknown_case_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["consistency", "--case", "eq99", "--out", str(tmp_path)])
    assert excinfo.value.code == EXIT_USAGE


def test_unknown_flag_value_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["mesh", "--kind", "mesh9", "--out", str(tmp_path)])
    assert excinfo.value.code == EXIT_USAGE


def test_decreasing_levels_are_a_usage_error(tmp_path):
    assert cli.main(["subharmonic", "--n-levels", "8,4", "--out", str(tmp_path)]) == EXIT_USAGE


def test_unsupported_mode_fails_the_run(tmp_path):
    runner = ExperimentRunner("nonconvergence", None, {"constraints": "weak-convex", "out_dir": str(tmp_path)})
    assert runner.run() == EXIT_FAILURE
    status = runner.get_status()
    assert status["error_count"] == 1
    assert any("failed" in line for line in status["log_tail"])


def test_runner_status_lists_files(tmp_path):
    runner = ExperimentRunner("mesh", None, {"kind": "mesh3", "n": 2, "out_dir": str(tmp_path)})
    assert runner.run() == EXIT_OK
    status = runner.get_status()
    assert status["accepted"]
    assert set(status["files"]) == {"mesh", "normals"}
    assert status["summary"]["interior_edges"] == 8


def test_thread_flag_is_capped_by_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(THREADS_ENV_VAR, "2")
    runner = ExperimentRunner("consistency", None, {"threads": 8, "out_dir": str(tmp_path)})
    assert runner.build_config().threads == 2
    runner = ExperimentRunner("consistency", None, {"threads": 1, "out_dir": str(tmp_path)})
    assert runner.build_config().threads == 1


def test_mesh_export_writes_operators_and_rows(tmp_path):
    out = tmp_path / "out"
    args = ["mesh", "--kind", "mesh1", "--n", "2", "--degree", "2", "--export", "--out", str(out)]
    assert cli.main(args) == EXIT_OK
    stiffness = read_coo(out / "mesh_mesh1_2_p2_stiffness.coo")
    assert stiffness.shape == (25, 25)
    assert read_coo(out / "mesh_mesh1_2_p2_mass.coo").sum() == pytest.approx(1.0)
    rows = read_coo(out / "mesh_mesh1_2_p2_conformal.coo")
    labels = read_constraint_labels(out / "mesh_mesh1_2_p2_conformal.coo.labels")
    assert labels and len(labels) == len(set(labels))
    assert rows.shape[0] == len(labels)


def test_subharmonic_export_writes_one_qp_per_level(tmp_path):
    out = tmp_path / "out"
    cli.main(["subharmonic", "--n-levels", "2,4", "--export", "--out", str(out)])
    for n in (2, 4):
        directory = out / f"subharmonic_qp_n{n}"
        assert sorted(p.name for p in directory.iterdir()) == ["A.coo", "A.coo.labels", "P.coo", "pinned.txt", "q.txt"]
    assert len((out / "subharmonic_qp_n4" / "q.txt").read_text().splitlines()) == 25


def test_runner_rejects_unknown_experiment():
    with pytest.raises(InvalidArgumentError):
        ExperimentRunner("plot")


def test_observed_orders():
    orders = observed_orders([0.5, 0.25, 0.125], [4.0, 1.0, 0.0])
    assert math.isnan(orders[0])
    assert orders[1] == pytest.approx(2.0)
    assert math.isnan(orders[2])


def test_make_target():
    mesh = build_structured_mesh("mesh1", 4)
    assert make_target("affine", mesh).laplacian(0.3, 0.3) == 0.0
    lemma = make_target("lemma2", mesh)
    assert lemma.u(0.0, 0.0) == pytest.approx(0.0)
    with pytest.raises(InvalidArgumentError):
        make_target("cubic", mesh)
