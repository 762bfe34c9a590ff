import os

import numpy as np

from config import CaseConfig
from main import run
from reports.report_builder import TRAJECTORY_COLUMNS, ReportBuilder, read_meta, version_string
from verify.studies import StudyRow, StudyTable


def study(name, slope):
    return StudyTable(name, "dt", slope - 0.2, slope + 0.2,
                      [StudyRow(p, p ** slope) for p in (0.1, 0.05, 0.025, 0.0125)])


def test_single_particle_outputs(tmp_path):
    config = CaseConfig("single-particle", overrides=["run.t_final=0.5", f"output.output_dir={tmp_path}"])
    paths = ReportBuilder(str(tmp_path)).write_outputs(run(config))
    assert sorted(os.path.basename(p) for p in paths) == ["diagnostics.csv", "run.meta", "trajectory.csv"]

    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == ",".join(TRAJECTORY_COLUMNS)
    assert len(lines) == 7
    rows = np.loadtxt(str(tmp_path / "trajectory.csv"), delimiter=",", skiprows=1)
    np.testing.assert_allclose(rows[0, 1:4], [5.0, 0.0, 0.0])


def test_meta_round_trip(tmp_path):
    config = CaseConfig("diocotron", overrides=["run.eps=0.025", "run.n_particles=500",
                                                "run.t_final=0.1", "grid.nx=20", "grid.ny=20",
                                                "grid.nz=1", "output.write_phi=true",
                                                f"output.output_dir={tmp_path}"])
    result = run(config)
    paths = ReportBuilder(str(tmp_path)).write_outputs(result)
    names = {os.path.basename(p) for p in paths}
    assert {"rho_000001.dat", "rho_avg_000001.dat", "phi_000001.dat"} <= names

    text = (tmp_path / "run.meta").read_text()
    assert text.startswith(f"# magpic {version_string()}")
    assert read_meta(str(tmp_path / "run.meta")) == config


def test_version_string_starts_with_package_version():
    from config import __version__
    assert version_string().startswith(__version__)


def test_verification_report(tmp_path):
    tables = [study("convergence SI1", 1.0), study("convergence SI2", 2.0)]
    tables[1].rows[-1] = StudyRow(0.0125, 1.0)
    report = ReportBuilder(str(tmp_path)).write_verification_report(tables, "convergence")
    assert not report.passed
    assert "1 of 2 studies passed" in report.markdown
    assert "<table>" in report.html
    assert "PASS convergence SI1" in report.html
    assert (tmp_path / "convergence.md").read_text() == report.markdown
    assert (tmp_path / "convergence.html").exists()
