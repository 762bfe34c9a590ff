"""Shape functions, deposition, interpolation and velocity reconstruction."""

import numpy as np
import pytest

from pic.particles import ParticleState, ShapeSpec, shape, support_weights
from pic.transfer import CHUNK_SIZE, deposit, interpolate, interpolate_E, reconstruct_velocity


def test_hat_function():
    assert shape(1, 0.0) == 1.0
    assert shape(1, 1.0) == 0.0
    assert shape(1, -1.0) == 0.0


@pytest.mark.parametrize("order", [1, 2, 3])
def test_partition_of_unity(order, rng):
    for s in rng.uniform(-5.0, 5.0, 100):
        total = sum(shape(order, s - j) for j in range(-10, 11))
        assert total == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_support_weights_cover_the_spline(order, rng):
    s = rng.uniform(0.0, 20.0, 50)
    start, weights = support_weights(order, s)
    assert weights.shape == (50, order + 1)
    np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-14)
    first = start[:, None] + np.arange(order + 1)
    np.testing.assert_allclose(weights, shape(order, s[:, None] - first))


def test_shape_order_is_checked():
    with pytest.raises(ValueError):
        ShapeSpec(4)


def test_particle_state_validates_shapes():
    with pytest.raises(ValueError):
        ParticleState(np.zeros((2, 3)), np.zeros((3, 3)), np.zeros(2), np.ones(2))


def test_new_particles_have_exact_perp_energy(rng):
    v = rng.standard_normal((100, 3))
    p = ParticleState.from_velocities(rng.standard_normal((100, 3)), v, 0.5)
    assert np.array_equal(p.e_perp, 0.5 * (v[:, 0] ** 2 + v[:, 1] ** 2))
    assert p.total_charge == pytest.approx(50.0)


def test_particle_on_a_node_deposits_there(disk_classification):
    cls = disk_classification
    grid = cls.grid
    i, j = grid.nx // 2, grid.ny // 2
    x = [[*grid.node(i, j), grid.z_nodes[1]]]
    rho = deposit(ParticleState.from_velocities(x, [[0, 0, 0]], 2.0), cls).rho
    assert rho[i, j, 1] * grid.cell_volume == pytest.approx(2.0)
    assert np.count_nonzero(rho) == 1


def test_particle_at_cell_center_splits_evenly(disk_classification):
    cls = disk_classification
    grid = cls.grid
    i, j = grid.nx // 2, grid.ny // 2
    center = grid.node(i, j) + 0.5 * np.array([grid.dx, grid.dy])
    rho = deposit(ParticleState.from_velocities([[*center, 0.0]], [[0, 0, 0]], 1.0), cls).rho
    cell = rho[i:i + 2, j:j + 2, 0] * grid.cell_volume
    np.testing.assert_allclose(cell, 0.25, rtol=1e-12)
    assert rho.sum() * grid.cell_volume == pytest.approx(1.0)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_deposit_conserves_charge(disk_classification, make_particles, unit_disk, order):
    cls = disk_classification
    particles = make_particles(10_000, unit_disk, weight=0.01)
    result = deposit(particles, cls, ShapeSpec(order))
    total = result.rho.sum() * cls.grid.cell_volume + result.lost_charge
    assert total == pytest.approx(particles.total_charge, rel=1e-12)


def test_deposit_is_thread_independent(disk_classification, make_particles, unit_disk):
    particles = make_particles(CHUNK_SIZE + 5000, unit_disk)
    a = deposit(particles, disk_classification, threads=1).rho
    b = deposit(particles, disk_classification, threads=4).rho
    np.testing.assert_array_equal(a, b)


def test_uniform_field_is_interpolated_exactly(disk_classification, make_particles, unit_disk):
    grid = disk_classification.grid
    E = np.broadcast_to([0.5, -1.0, 2.0], (grid.nx, grid.ny, grid.nz, 3))
    particles = make_particles(100, unit_disk)
    np.testing.assert_allclose(interpolate_E(E, grid, particles.x), np.tile([0.5, -1.0, 2.0], (100, 1)),
                               rtol=1e-12)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_linear_field_is_reproduced(disk_classification, make_particles, unit_disk, order):
    grid = disk_classification.grid
    X, _ = grid.mesh()
    values = np.repeat((3.0 * X - 1.0)[:, :, None], grid.nz, axis=2)
    particles = make_particles(100, unit_disk)
    got = interpolate(values, grid, particles.x, ShapeSpec(order))
    np.testing.assert_allclose(got, 3.0 * particles.x[:, 0] - 1.0, atol=1e-12)


def test_value_at_a_node(disk_classification, rng):
    grid = disk_classification.grid
    values = rng.standard_normal((grid.nx, grid.ny, grid.nz))
    i, j, k = grid.nx // 2, grid.ny // 2 + 1, 2
    got = interpolate(values, grid, [[*grid.node(i, j), grid.z_nodes[k]]])
    assert got[0] == pytest.approx(values[i, j, k], abs=1e-14)


@pytest.mark.parametrize("order", [1, 3])
def test_deposit_and_interpolate_are_adjoint(disk_classification, make_particles, unit_disk, rng, order):
    cls = disk_classification
    grid = cls.grid
    spec = ShapeSpec(order)
    particles = make_particles(2000, unit_disk)
    particles.w[:] = rng.uniform(0.5, 1.5, particles.n)
    g = rng.standard_normal((grid.nx, grid.ny, grid.nz)) * cls.interior[:, :, None]
    lhs = np.sum(particles.w * interpolate(g, grid, particles.x, spec))
    rhs = np.sum(g * deposit(particles, cls, spec).rho) * grid.cell_volume
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_reconstruct_consistent_state(rng):
    v = rng.standard_normal((50, 3))
    w = reconstruct_velocity(v, 0.5 * (v[:, 0] ** 2 + v[:, 1] ** 2), v[:, 2])
    np.testing.assert_allclose(w, v, rtol=1e-12, atol=1e-14)


def test_reconstruct_rescales_perpendicular_speed():
    w = reconstruct_velocity([[1.0, 0.0, 0.0]], [2.0], [5.0])
    np.testing.assert_allclose(w, [[2.0, 0.0, 5.0]])


def test_reconstruct_zero_energy():
    w = reconstruct_velocity([[0.3, -0.4, 0.0]], [0.0], [1.5])
    np.testing.assert_allclose(w, [[0.0, 0.0, 1.5]])


def test_reconstruct_degenerate_direction_uses_x_axis(caplog):
    w = reconstruct_velocity([[0.0, 0.0, 0.0]], [0.5], [0.0])
    np.testing.assert_allclose(w, [[1.0, 0.0, 0.0]])
    assert "perpendicular direction" in caplog.text
    caplog.clear()
    np.testing.assert_allclose(reconstruct_velocity([[0.0, 0.0, 0.0]], [0.5], [0.0], warn=False),
                               [[1.0, 0.0, 0.0]])
    assert "perpendicular direction" not in caplog.text


@pytest.mark.parametrize("order", [1, 2, 3])
def test_transfer_with_no_particles(order, disk_classification):
    grid = disk_classification.grid
    spec = ShapeSpec(order)
    E = np.ones((grid.nx, grid.ny, grid.nz, 3))
    assert interpolate_E(E, grid, np.zeros((0, 3)), spec).shape == (0, 3)
    assert interpolate(E[..., 0], grid, np.zeros((0, 3)), spec).shape == (0,)
    empty = ParticleState(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0))
    result = deposit(empty, disk_classification, spec)
    assert result.lost_charge == 0.0
    assert not result.rho.any()
