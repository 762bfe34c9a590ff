import pytest

from cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, build_parser, main


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_OK
    assert "eps-consistency" in capsys.readouterr().out


def test_help_lists_config_keys():
    text = build_parser().format_help()
    assert "run.dt" in text
    assert "grid.shape_order" in text


def test_invalid_override_exits_with_config_error(tmp_path, capsys):
    code = main(["single-particle", "--set", "run.dt=-1", "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_CONFIG
    assert "run.dt" in capsys.readouterr().err


def test_unknown_key_exits_with_config_error(tmp_path, capsys):
    code = main(["diocotron", "--set", "grid.nq=3", "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_CONFIG
    assert "grid.nq" in capsys.readouterr().err


def test_single_particle_run(tmp_path):
    code = main(["single-particle", "--set", "run.t_final=1", "--set", "run.scheme=SI2",
                 "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_OK
    assert (tmp_path / "trajectory.csv").exists()
    assert (tmp_path / "diagnostics.csv").exists()
    assert "scheme = SI2" in (tmp_path / "run.meta").read_text()


def test_config_file_and_seed(tmp_path):
    cfg = tmp_path / "case.cfg"
    cfg.write_text("[run]\nt_final = 0.2\n")
    out = tmp_path / "out"
    code = main(["single-particle", "--config", str(cfg), "--seed", "42", "--out", str(out), "--quiet"])
    assert code == EXIT_OK
    meta = (out / "run.meta").read_text()
    assert "seed = 42" in meta
    assert "t_final = 0.2" in meta


def test_aborted_run_exits_with_failure(tmp_path):
    code = main(["single-particle", "--set", "run.scheme=SI1", "--set", "case.particle_vx=100",
                 "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_FAILED


def test_convergence_command(tmp_path):
    code = main(["convergence", "--scheme", "SI1", "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_OK
    csv = (tmp_path / "convergence_SI1_eps_1.csv").read_text()
    assert csv.splitlines()[-1].startswith("# PASS")
    assert (tmp_path / "convergence.md").exists()


def test_bad_scheme_choice_is_rejected():
    with pytest.raises(SystemExit):
        main(["convergence", "--scheme", "SI9"])


@pytest.mark.slow
def test_poisson_command(tmp_path):
    code = main(["poisson-test", "--set", "grid.nx=32", "--threads", "2", "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_OK
    assert (tmp_path / "poisson.html").exists()
