#!/usr/bin/env python3
"""
Initial particle data for the shipped test cases.

Positions are drawn by rejection sampling against the case density inside
D x [0, L_z); velocities are unit-temperature Maxwellian; all particles carry
the same weight, estimated from the acceptance rate.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from config import CaseConfig, CaseParams
from exceptions import RejectionStall
from geometry.domain import DomainSpec, contains
from pic.particles import ParticleState

logger = logging.getLogger(__name__)

# below this acceptance rate the sampler gives up
MIN_ACCEPTANCE = 1e-4
# proposals drawn before the acceptance rate is trusted
MIN_PROPOSALS = 100_000
MAX_BATCH = 4_000_000

Density = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CaseDensity:
    """Macroscopic density n(x) of a case and an upper bound of it."""
    name: str
    density: Density
    peak: float


def domain_for(params: CaseParams) -> DomainSpec:
    center = (params.center_x, params.center_y)
    if params.domain == "disk":
        return DomainSpec.disk(params.disk_radius, center, params.lz)
    return DomainSpec.dshape(params.r0_dshape, center, params.lz)


def diocotron_density(params: CaseParams) -> CaseDensity:
    """n0 (1 + alpha (cos(theta) + 5 cos(2 pi kz z / lz))) on r1 <= r <= r2."""
    xc, yc = params.center_x, params.center_y
    wave = 2.0 * math.pi * params.kz / params.lz

    def density(x: np.ndarray) -> np.ndarray:
        dx = x[:, 0] - xc
        dy = x[:, 1] - yc
        r = np.hypot(dx, dy)
        theta = np.arctan2(dy, dx)
        n = params.n0 * (1.0 + params.alpha * (np.cos(theta) + 5.0 * np.cos(wave * x[:, 2])))
        return np.where((r >= params.r1) & (r <= params.r2), n, 0.0)

    return CaseDensity("diocotron", density, params.n0 * (1.0 + 6.0 * abs(params.alpha)))


def dshape_density(params: CaseParams) -> CaseDensity:
    """Two Gaussians of width r0 at +-x0 times n0 (1 + alpha cos(2 pi kz z / lz)).

    The prefactor (2 pi)^(3/2) / (8 pi^2 r0^2) is the velocity integral of the
    Maxwellian phase-space density.
    """
    r0 = params.gauss_r0
    x0 = np.array([params.gauss_x, params.gauss_y])
    center = np.array([params.center_x, params.center_y])
    wave = 2.0 * math.pi * params.kz / params.lz
    scale = params.n0 * (2.0 * math.pi) ** 1.5 / (8.0 * math.pi ** 2 * r0 ** 2)

    def density(x: np.ndarray) -> np.ndarray:
        rel = x[:, :2] - center
        plus = np.sum((rel - x0) ** 2, axis=1)
        minus = np.sum((rel + x0) ** 2, axis=1)
        bumps = np.exp(-plus / (2.0 * r0 ** 2)) + np.exp(-minus / (2.0 * r0 ** 2))
        return scale * (1.0 + params.alpha * np.cos(wave * x[:, 2])) * bumps

    # each Gaussian is at most one
    return CaseDensity("dshape", density, 2.0 * scale * (1.0 + abs(params.alpha)))


CASE_DENSITIES: Dict[str, Callable[[CaseParams], CaseDensity]] = {
    "diocotron": diocotron_density,
    "dshape": dshape_density,
}


def sample_positions(domain: DomainSpec, profile: CaseDensity, n: int,
                     rng: np.random.Generator):
    """n positions distributed like the density inside D.

    Returns (positions, acceptance) where acceptance counts the proposals
    used up to the n-th accepted one.
    """
    x_lo, x_hi, y_lo, y_hi = domain.bounding_box()
    lo = np.array([x_lo, y_lo, 0.0])
    span = np.array([x_hi - x_lo, y_hi - y_lo, domain.lz])

    accepted = []
    n_accepted = 0
    proposed = 0
    rate = None
    while n_accepted < n:
        remaining = n - n_accepted
        guess = max(rate or 0.0, MIN_ACCEPTANCE)
        batch = int(min(MAX_BATCH, max(65536, math.ceil(1.2 * remaining / guess))))
        points = lo + span * rng.random((batch, 3))
        u = rng.random(batch)
        keep = contains(domain, points[:, :2]) & (u * profile.peak < profile.density(points))
        hits = np.flatnonzero(keep)
        if hits.size >= remaining:
            proposed += int(hits[remaining - 1]) + 1
            hits = hits[:remaining]
        else:
            proposed += batch
        accepted.append(points[hits])
        n_accepted += hits.size
        rate = n_accepted / proposed
        if proposed >= MIN_PROPOSALS and rate < MIN_ACCEPTANCE:
            raise RejectionStall(profile.name, rate)

    logger.debug(f"{profile.name}: accepted {n} of {proposed} proposals ({rate:.3f})")
    return np.concatenate(accepted)[:n], rate


def sample_initial(config: CaseConfig, rng: np.random.Generator) -> ParticleState:
    """Particles of the configured case with equal weights and e_perp = |v_perp|^2/2."""
    params = config.case
    case = config.run.case
    if case == "single-particle":
        return single_particle_state(params)
    if case not in CASE_DENSITIES:
        raise ValueError(f"no initial density for case '{case}'")

    domain = domain_for(params)
    profile = CASE_DENSITIES[case](params)
    n = config.run.n_particles
    x, rate = sample_positions(domain, profile, n, rng)
    v = rng.standard_normal((n, 3))

    x_lo, x_hi, y_lo, y_hi = domain.bounding_box()
    box_volume = (x_hi - x_lo) * (y_hi - y_lo) * domain.lz
    total = profile.peak * box_volume * rate
    logger.info(f"Sampled {n} particles for {case}: total charge {total:.6g}, "
                f"acceptance {rate:.3f}")
    return ParticleState.from_velocities(x, v, total / n)


def single_particle_state(params: CaseParams) -> ParticleState:
    """One unit-weight particle at the configured position and velocity."""
    x = np.array([[params.particle_x, params.particle_y, params.particle_z]])
    v = np.array([[params.particle_vx, params.particle_vy, params.particle_vz]])
    return ParticleState.from_velocities(x, v, 1.0)
