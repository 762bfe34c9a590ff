import pytest

from config import SECTIONS, CaseConfig, help_table, parse_config_text, parse_overrides
from exceptions import ConfigError


def test_builtin_defaults():
    cfg = CaseConfig()
    assert cfg.run.case == "single-particle"
    assert cfg.grid.shape_order == 1
    assert cfg.output.snapshot_interval == 0


def test_case_defaults_apply():
    cfg = CaseConfig("dshape")
    assert cfg.case.domain == "dshape"
    assert cfg.case.b_profile == "dshape"
    assert cfg.grid.ny == 96
    assert cfg.case.permittivity == 10.0
    assert CaseConfig("single-particle").case.permittivity == 1.0


def test_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[run]\neps = 0.02\ndt = 0.05  # halved\n\n[grid]\nnx = 48\n")
    cfg = CaseConfig("diocotron", config_file=str(path), overrides=["run.dt=0.025"])
    assert cfg.run.eps == 0.02
    assert cfg.run.dt == 0.025
    assert cfg.grid.nx == 48
    assert cfg.run.t_final == 40.0


def test_case_named_in_file_wins_over_argument(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[run]\ncase = dshape\n")
    assert CaseConfig("diocotron", config_file=str(path)).case.domain == "dshape"


def test_values_are_coerced():
    cfg = CaseConfig(overrides=["run.n_particles=1e3", "output.write_phi=yes", "run.scheme=si2"])
    assert cfg.run.n_particles == 1000
    assert cfg.output.write_phi is True
    assert cfg.run.scheme == "SI2"


@pytest.mark.parametrize("override, key", [
    ("run.dt=-1", "run.dt"),
    ("run.eps=0", "run.eps"),
    ("run.bogus=1", "run.bogus"),
    ("grid.nx=abc", "grid.nx"),
    ("grid.shape_order=4", "grid.shape_order"),
    ("case.alpha=1.5", "case.alpha"),
    ("case.permittivity=0", "case.permittivity"),
    ("run.seed=-3", "run.seed"),
    ("scheme.si3_stage_times=random", "scheme.si3_stage_times"),
])
def test_invalid_values_name_the_key(override, key):
    with pytest.raises(ConfigError) as info:
        CaseConfig("diocotron", overrides=[override])
    assert info.value.key == key
    assert key in str(info.value)


def test_unknown_case():
    with pytest.raises(ConfigError, match="unknown case"):
        CaseConfig("tokamak")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        CaseConfig(config_file=str(tmp_path / "missing.cfg"))


def test_config_text_errors():
    with pytest.raises(ConfigError):
        parse_config_text("[plasma]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("eps = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("[run]\neps\n")
    with pytest.raises(ConfigError):
        parse_overrides(["run.eps"])


def test_dumps_round_trip(tmp_path):
    cfg = CaseConfig("dshape", overrides=["run.eps=1e-4", "run.seed=18446744073709551615",
                                          "output.write_phi=true"])
    assert CaseConfig.from_text(cfg.dumps()) == cfg
    path = tmp_path / "nested" / "saved.cfg"
    cfg.save_to_file(str(path))
    assert CaseConfig(config_file=str(path)) == cfg


def test_help_table_lists_every_key():
    text = help_table()
    for name, cls in SECTIONS.items():
        for key in vars(cls()):
            assert f"{name}.{key}" in text
