import math

import numpy as np
import pytest

from diagnostics.energy_monitor import (
    CSV_COLUMNS,
    DiagnosticsRecord,
    EnergyMonitor,
    adiabatic,
    energy,
    field_energy,
    read_diagnostics_csv,
    relative_variation,
    write_diagnostics_csv,
)
from exceptions import OutputError, ZeroBaseline
from pic.particles import ParticleState
from poisson.field_solver import FieldState
from pusher.fields import uniform_profile


def one_particle(e_perp=2.0, v_par=3.0):
    return ParticleState(x=[[0.0, 0.0, 0.0]], v=[[0.0, 0.0, v_par]], e_perp=[e_perp], w=[1.0])


def test_energy_of_one_particle(disk_classification):
    field = FieldState.zeros(disk_classification.grid)
    assert energy(one_particle(), field, disk_classification) == (6.5, 0.0, 6.5)


def test_uniform_field_energy(disk_classification):
    cls = disk_classification
    field = FieldState.zeros(cls.grid)
    field.E[..., 0] = 1.0
    nodes = np.count_nonzero(cls.interior) * cls.grid.nz
    assert field_energy(field, cls) == pytest.approx(0.5 * nodes * cls.grid.cell_volume)


def test_field_energy_matches_integral(disk_classification):
    cls = disk_classification
    grid = cls.grid
    X, Y = grid.mesh()
    field = FieldState.zeros(grid)
    # phi = 1 - r^2
    field.E[..., 0] = 2.0 * X[:, :, None]
    field.E[..., 1] = 2.0 * Y[:, :, None]
    assert field_energy(field, cls) == pytest.approx(math.pi, rel=0.05)


def test_field_energy_scales_with_permittivity(disk_classification):
    cls = disk_classification
    field = FieldState.zeros(cls.grid, permittivity=4.0)
    field.E[..., 1] = 1.0
    nodes = np.count_nonzero(cls.interior) * cls.grid.nz
    assert field_energy(field, cls) == pytest.approx(2.0 * nodes * cls.grid.cell_volume)


def test_adiabatic_invariant():
    p = one_particle(e_perp=1.0)
    assert adiabatic(p, uniform_profile(1.0)) == 1.0
    assert adiabatic(p, uniform_profile(2.0)) == 0.5


def test_adiabatic_matches_velocity_form(rng):
    v = rng.standard_normal((200, 3))
    p = ParticleState.from_velocities(rng.standard_normal((200, 3)), v, 0.1)
    expected = np.sum(0.1 * (v[:, 0] ** 2 + v[:, 1] ** 2) / 4.0)
    assert adiabatic(p, uniform_profile(2.0)) == pytest.approx(expected, rel=1e-12)


def test_diagnostics_ignore_particle_order(rng, disk_classification):
    p = ParticleState.from_velocities(rng.standard_normal((1000, 3)), rng.standard_normal((1000, 3)),
                                      rng.uniform(0.5, 2.0, 1000))
    order = rng.permutation(1000)
    q = ParticleState(p.x[order], p.v[order], p.e_perp[order], p.w[order])
    field = FieldState.zeros(disk_classification.grid)
    assert energy(q, field)[0] == pytest.approx(energy(p, field)[0], rel=1e-12)
    profile = uniform_profile(1.5)
    assert adiabatic(q, profile) == pytest.approx(adiabatic(p, profile), rel=1e-12)


def test_relative_variation():
    np.testing.assert_array_equal(relative_variation([3.0, 3.0, 3.0]), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(relative_variation([2.0, 3.0]), [0.0, 0.5])
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(relative_variation(4.0 * (1.0 + 0.3 * t)), 0.3 * t, atol=1e-15)
    assert relative_variation([]).size == 0
    with pytest.raises(ZeroBaseline):
        relative_variation([0.0, 1.0])


def test_monitor_with_external_potential():
    monitor = EnergyMonitor(uniform_profile(1.0), potential=lambda t, x: 2.0 * x[:, 0])
    p = ParticleState(x=[[1.5, 0.0, 0.0]], v=[[0.0, 0.0, 1.0]], e_perp=[1.0], w=[1.0])
    rec = monitor.record(0.0, p, None)
    assert rec.Ep == 3.0
    assert rec.Et == rec.Ek_aug + rec.Ep == 4.5
    assert rec.Ek_raw == 0.5
    assert rec.mu == 1.0


def test_monitor_rebuilds_limit_velocities(caplog):
    # limit states keep e_perp with v_perp = 0
    p = ParticleState(x=[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], v=[[0.0, 0.0, 1.0], [0.0, 0.0, -2.0]],
                      e_perp=[2.0, 0.5], w=[1.0, 3.0])
    raw = EnergyMonitor(uniform_profile(1.0)).record(0.0, p, None)
    assert raw.Ek_raw == pytest.approx(0.5 + 6.0)
    rebuilt = EnergyMonitor(uniform_profile(1.0), reconstruct=True).record(0.0, p, None)
    assert rebuilt.Ek_aug == pytest.approx(2.5 + 3.0 * 2.5)
    assert rebuilt.Ek_raw == pytest.approx(rebuilt.Ek_aug)
    assert "perpendicular direction" not in caplog.text


def test_monitor_variations():
    monitor = EnergyMonitor(uniform_profile(1.0))
    for e in (1.0, 1.1, 0.95):
        monitor.record(0.0, one_particle(e_perp=e, v_par=0.0), None)
    variations = monitor.variations()
    assert variations["Ep"] is None
    np.testing.assert_allclose(variations["mu"], [0.0, 0.1, -0.05])
    assert monitor.max_variation("Et") == pytest.approx(0.1)
    assert monitor.max_variation("Ep") is None


def test_csv_round_trip(tmp_path):
    records = [DiagnosticsRecord(0.1 * i, 1.0 / 3.0, 0.2, 1e-17, 1.0 / 3.0 + 1e-17, math.pi, 0.0)
               for i in range(4)]
    path = tmp_path / "out" / "diagnostics.csv"
    write_diagnostics_csv(str(path), records)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert read_diagnostics_csv(str(path)) == records


def test_csv_write_failure(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(OutputError) as info:
        write_diagnostics_csv(str(blocker / "diagnostics.csv"), [])
    assert "blocker" in info.value.path
