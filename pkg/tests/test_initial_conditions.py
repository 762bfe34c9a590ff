import math

import numpy as np
import pytest

from config import CaseConfig
from exceptions import RejectionStall
from geometry.domain import DomainSpec, contains
from sim.initial_conditions import (
    CaseDensity,
    diocotron_density,
    domain_for,
    dshape_density,
    sample_initial,
    sample_positions,
)


def sampled(case, n, seed=7):
    cfg = CaseConfig(case, overrides=[f"run.n_particles={n}", f"run.seed={seed}"])
    return cfg, sample_initial(cfg, np.random.default_rng(cfg.run.seed))


def test_diocotron_density_values():
    params = CaseConfig("diocotron").case
    n = diocotron_density(params)
    x = np.array([[6.5, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 7.5, 0.0], [0.0, 6.5, 0.0]])
    expected = params.n0 * np.array([1.0 + 6.0 * params.alpha, 0.0, 0.0, 1.0 + 5.0 * params.alpha])
    np.testing.assert_allclose(n.density(x), expected, rtol=1e-12, atol=1e-9)
    assert np.all(n.density(x) <= n.peak)


def test_dshape_density_peak_bounds_samples(rng):
    params = CaseConfig("dshape").case
    n = dshape_density(params)
    x = np.column_stack([rng.uniform(-10, 10, 5000), rng.uniform(-14, 14, 5000),
                         rng.uniform(0, 1, 5000)])
    assert np.all(n.density(x) >= 0.0)
    assert np.all(n.density(x) <= n.peak)
    center = np.array([[params.gauss_x, params.gauss_y, 0.25 * params.lz / params.kz]])
    scale = params.n0 * (2.0 * math.pi) ** 1.5 / (8.0 * math.pi ** 2 * params.gauss_r0 ** 2)
    far = math.exp(-(2.0 * math.hypot(params.gauss_x, params.gauss_y)) ** 2 / (2.0 * params.gauss_r0 ** 2))
    assert n.density(center)[0] == pytest.approx(scale * (1.0 + far))


@pytest.mark.parametrize("case", ["diocotron", "dshape"])
def test_samples_lie_in_the_domain(case):
    cfg, particles = sampled(case, 2000)
    domain = domain_for(cfg.case)
    assert particles.n == 2000
    assert np.all(contains(domain, particles.x[:, :2]))
    assert np.all((particles.x[:, 2] >= 0.0) & (particles.x[:, 2] < domain.lz))
    assert np.array_equal(particles.e_perp, 0.5 * (particles.v[:, 0] ** 2 + particles.v[:, 1] ** 2))
    assert np.all(particles.w == particles.w[0])


def test_diocotron_samples_stay_in_the_annulus():
    cfg, particles = sampled("diocotron", 2000)
    r = np.hypot(particles.x[:, 0], particles.x[:, 1])
    assert r.min() >= cfg.case.r1
    assert r.max() <= cfg.case.r2


def test_total_charge_estimate():
    n = 20_000
    cfg, particles = sampled("diocotron", n)
    c = cfg.case
    exact = c.n0 * math.pi * (c.r2 ** 2 - c.r1 ** 2) * c.lz
    assert particles.total_charge == pytest.approx(exact, rel=0.03)


def test_maxwellian_moments():
    n = 20_000
    _, particles = sampled("diocotron", n)
    assert np.all(np.abs(particles.v.mean(axis=0)) < 4.0 / math.sqrt(n))
    np.testing.assert_allclose(particles.v.var(axis=0), 1.0, atol=0.05)


def test_sampling_is_deterministic():
    _, a = sampled("dshape", 500, seed=11)
    _, b = sampled("dshape", 500, seed=11)
    _, c = sampled("dshape", 500, seed=12)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v) and np.array_equal(a.w, b.w)
    assert not np.array_equal(a.x, c.x)


def test_empty_density_stalls(rng):
    empty = CaseDensity("empty", lambda x: np.zeros(x.shape[0]), 1.0)
    with pytest.raises(RejectionStall) as info:
        sample_positions(DomainSpec.disk(1.0), empty, 10, rng)
    assert info.value.rate < 1e-4


def test_uniform_density_acceptance_matches_area(rng):
    flat = CaseDensity("flat", lambda x: np.ones(x.shape[0]), 1.0)
    x, rate = sample_positions(DomainSpec.disk(1.0), flat, 50_000, rng)
    assert x.shape == (50_000, 3)
    x0, x1, y0, y1 = DomainSpec.disk(1.0).bounding_box()
    assert rate == pytest.approx(math.pi / ((x1 - x0) * (y1 - y0)), rel=0.02)


def test_single_particle_state():
    cfg = CaseConfig("single-particle", overrides=["case.particle_vx=1.5"])
    p = sample_initial(cfg, np.random.default_rng(0))
    np.testing.assert_array_equal(p.x, [[5.0, 0.0, 0.0]])
    np.testing.assert_array_equal(p.v, [[1.5, 3.0, 2.0]])
    assert p.e_perp[0] == pytest.approx(0.5 * (1.5 ** 2 + 9.0))
    assert p.w[0] == 1.0
