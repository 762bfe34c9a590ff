"""Domain predicates, the D-shape mapping, boundary projection and node labels."""

import math

import numpy as np
import pytest

from exceptions import NoIntersection
from geometry.domain import (
    DomainSpec,
    boundary_trace,
    contains,
    invert_dshape,
    map_dshape,
)
from geometry.grid_classifier import NEIGHBOURS, GridSpec, NodeLabel, classify, grid_for


def test_disk_contains():
    disk = DomainSpec.disk(6.0)
    assert contains(disk, (0.0, 0.0))
    assert not contains(disk, (6.1, 0.0))


def test_dshape_contains_center(dshape):
    assert contains(dshape, (0.0, 0.0))


def test_contains_vectorised(dshape):
    pts = np.array([[0.0, 0.0], [30.0, 0.0], [0.0, 15.0]])
    np.testing.assert_array_equal(contains(dshape, pts), [True, False, True])


def test_map_dshape_center_and_axis():
    assert map_dshape(0.0, 1.234, (2.0, -1.0)) == pytest.approx((2.0, -1.0))
    assert map_dshape(10.0, 0.0, (2.0, -1.0)) == pytest.approx((12.0, -1.0))


def test_map_dshape_boundary_winds_once_around_center():
    theta = np.linspace(0.0, 2.0 * math.pi, 1024, endpoint=False)
    x, y = map_dshape(10.0, theta)
    angles = np.arctan2(y, x)
    steps = np.diff(np.append(angles, angles[0]))
    winding = np.sum((steps + math.pi) % (2 * math.pi) - math.pi) / (2 * math.pi)
    assert winding == pytest.approx(1.0, abs=1e-9)


def test_mapped_points_are_inside(dshape, rng):
    xi1 = rng.uniform(0.0, 10.0 * (1 - 1e-6), 1000)
    xi2 = rng.uniform(0.0, 2 * math.pi, 1000)
    x, y = map_dshape(xi1, xi2)
    assert np.all(contains(dshape, np.column_stack([x, y])))


def test_invert_dshape_round_trip(dshape, rng):
    xi1 = rng.uniform(0.5, 9.5, 200)
    xi2 = rng.uniform(0.0, 2 * math.pi, 200)
    x, y = map_dshape(xi1, xi2)
    back1, _ = invert_dshape(dshape, x, y)
    np.testing.assert_allclose(back1, xi1, rtol=1e-10)


@pytest.mark.parametrize("x_g, x_p, normal, s_g", [
    ((6.5, 0.0), (6.0, 0.0), (-1.0, 0.0), -0.5),
    ((0.0, -6.25), (0.0, -6.0), (0.0, 1.0), -0.25),
])
def test_disk_boundary_trace(x_g, x_p, normal, s_g):
    trace = boundary_trace(DomainSpec.disk(6.0), x_g)
    np.testing.assert_allclose(trace.point, x_p, atol=1e-14)
    np.testing.assert_allclose(trace.normal, normal, atol=1e-14)
    assert trace.distance == pytest.approx(s_g)


def test_dshape_boundary_trace_on_axis(dshape):
    trace = boundary_trace(dshape, (10.2, 0.0))
    np.testing.assert_allclose(trace.point, (10.0, 0.0), atol=1e-9)
    xi1, _ = invert_dshape(dshape, *trace.point)
    assert abs(float(xi1) - 10.0) < 1e-10
    assert trace.normal[0] < 0.0
    assert trace.distance == pytest.approx(-0.2, abs=1e-9)


def test_dshape_trace_is_closest_boundary_point(dshape, rng):
    theta = np.linspace(0.0, 2 * math.pi, 20000, endpoint=False)
    bx, by = map_dshape(10.0, theta)
    for angle in rng.uniform(0.0, 2 * math.pi, 10):
        px, py = map_dshape(10.4, angle)
        trace = boundary_trace(dshape, (px, py))
        dense = np.min(np.hypot(bx - px, by - py))
        assert -trace.distance <= dense + 1e-6
        assert abs(np.linalg.norm(trace.normal) - 1.0) < 1e-12


def test_trace_rejects_interior_points():
    with pytest.raises(NoIntersection):
        boundary_trace(DomainSpec.disk(6.0), (1.0, 1.0))


def test_classify_disk_labels():
    disk = DomainSpec.disk(6.0)
    grid = GridSpec(x_min=-8.0, y_min=-8.0, dx=0.5, dy=0.5, nx=33, ny=33, nz=1, lz=1.0)
    cls = classify(grid, disk)
    assert cls.labels[16, 16] == NodeLabel.INTERIOR
    assert cls.labels[32, 32] == NodeLabel.EXTERIOR
    assert cls.counts()["ghost"] > 0


def test_interior_stencils_close_on_ghosts(dshape_classification):
    cls = dshape_classification
    usable = cls.interior | cls.ghost
    for i, j in np.argwhere(cls.interior):
        for di, dj in NEIGHBOURS:
            assert usable[i + di, j + dj]


def test_every_ghost_has_a_trace(dshape_classification):
    cls = dshape_classification
    assert set(cls.ghost_nodes()) == {tuple(ij) for ij in np.argwhere(cls.ghost)}


def test_classify_is_thread_independent(dshape):
    grid = grid_for(dshape, 32, 40, 1)
    a, b = classify(grid, dshape), classify(grid, dshape, threads=4)
    np.testing.assert_array_equal(a.labels, b.labels)
    for node in a.traces:
        np.testing.assert_array_equal(a.traces[node].point, b.traces[node].point)


def test_grid_from_domain_keeps_margin(unit_disk):
    grid = GridSpec.from_domain(unit_disk, 24, 24, 2, margin_cells=2)
    assert grid.x_min == pytest.approx(-1.0 - 2 * grid.dx)
    assert grid.x_nodes[-1] == pytest.approx(1.0 + 2 * grid.dx)
    assert grid.dz == pytest.approx(0.5)


def test_grid_too_small_for_margin(unit_disk):
    with pytest.raises(ValueError):
        GridSpec.from_domain(unit_disk, 6, 6, 1, margin_cells=2)
