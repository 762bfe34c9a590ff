"""Shared fixtures for the magpic test suite."""

import logging

import numpy as np
import pytest

from geometry.domain import DomainSpec, contains
from geometry.grid_classifier import classify, grid_for
from pic.particles import ParticleState
from pusher.fields import analytic_sampler, constant_sampler, uniform_profile


@pytest.fixture(autouse=True)
def quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_disk():
    return DomainSpec.disk(1.0)


@pytest.fixture
def dshape():
    return DomainSpec.dshape(10.0)


@pytest.fixture
def disk_classification(unit_disk):
    grid = grid_for(unit_disk, 32, 32, 4)
    return classify(grid, unit_disk)


@pytest.fixture
def dshape_classification(dshape):
    return classify(grid_for(dshape, 40, 56, 4), dshape)


@pytest.fixture
def single_particle():
    return ParticleState.from_velocities([[5.0, 0.0, 0.0]], [[4.0, 3.0, 2.0]], 1.0)


@pytest.fixture
def analytic():
    return analytic_sampler(0.1)


@pytest.fixture
def uniform_field():
    """E = (0.3, -0.2, 0.1) in a uniform b = 1."""
    return constant_sampler([0.3, -0.2, 0.1], uniform_profile(1.0), 0.1)


def random_particles(rng, n, domain, lz=1.0, weight=1.0):
    """n particles uniform in the bounding box of domain, kept inside it."""
    x0, x1, y0, y1 = domain.bounding_box()
    pts = []
    while sum(len(p) for p in pts) < n:
        cand = np.column_stack([rng.uniform(x0, x1, 2 * n), rng.uniform(y0, y1, 2 * n),
                                rng.uniform(0.0, lz, 2 * n)])
        pts.append(cand[contains(domain, cand[:, :2])])
    x = np.concatenate(pts)[:n]
    return ParticleState.from_velocities(x, rng.standard_normal((n, 3)), weight)


@pytest.fixture
def make_particles(rng):
    return lambda n, domain, **kw: random_particles(rng, n, domain, **kw)
