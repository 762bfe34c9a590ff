#!/usr/bin/env python3
"""
Field samplers for the particle pushers.

A FieldSampler bundles the electric field E(t, x), the magnetic intensity
profile b(x_perp) with its gradient, and the stiffness parameter eps. The
external magnetic field is B = b(x_perp) e_z / eps.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from geometry.grid_classifier import GridSpec
from pic.particles import ShapeSpec
from pic.transfer import interpolate_E

logger = logging.getLogger(__name__)

ScalarField = Callable[[float, np.ndarray], np.ndarray]
VectorField = Callable[[float, np.ndarray], np.ndarray]


def _radius_sq(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return x[:, 0] ** 2 + x[:, 1] ** 2


@dataclass(frozen=True)
class MagneticProfile:
    """Static intensity b(x_perp) >= b0 > 0 and its perpendicular gradient.

    Both callables take (t, x) with x of shape (N, 3); t is accepted for a
    time-dependent profile but the shipped profiles ignore it.
    """
    name: str
    intensity: ScalarField
    gradient: VectorField
    b0: float

    def b(self, t: float, x: np.ndarray) -> np.ndarray:
        values = self.intensity(t, np.atleast_2d(x))
        if np.any(values < self.b0 * (1.0 - 1e-12)):
            raise ValueError(f"{self.name}: b fell below its lower bound {self.b0}")
        return values

    def grad_b(self, t: float, x: np.ndarray) -> np.ndarray:
        """(N, 3) array with zero z-component."""
        return self.gradient(t, np.atleast_2d(x))


def uniform_profile(b0: float = 1.0) -> MagneticProfile:
    return MagneticProfile(
        name="uniform",
        intensity=lambda t, x: np.full(x.shape[0], b0),
        gradient=lambda t, x: np.zeros((x.shape[0], 3)),
        b0=b0,
    )


def single_particle_profile() -> MagneticProfile:
    """b = 1 / (10^2 - r^2), defined for r < 10."""
    def intensity(t, x):
        return 1.0 / (100.0 - _radius_sq(x))

    def gradient(t, x):
        g = np.zeros((x.shape[0], 3))
        scale = 2.0 / (100.0 - _radius_sq(x)) ** 2
        g[:, 0] = scale * x[:, 0]
        g[:, 1] = scale * x[:, 1]
        return g

    return MagneticProfile("single_particle", intensity, gradient, b0=0.01)


def dshape_profile() -> MagneticProfile:
    """b = 20 / sqrt(20^2 - r^2), defined for r < 20."""
    def intensity(t, x):
        return 20.0 / np.sqrt(400.0 - _radius_sq(x))

    def gradient(t, x):
        g = np.zeros((x.shape[0], 3))
        scale = 20.0 / (400.0 - _radius_sq(x)) ** 1.5
        g[:, 0] = scale * x[:, 0]
        g[:, 1] = scale * x[:, 1]
        return g

    return MagneticProfile("dshape", intensity, gradient, b0=1.0)


MAGNETIC_PROFILES: Dict[str, Callable[..., MagneticProfile]] = {
    "uniform": uniform_profile,
    "single_particle": single_particle_profile,
    "dshape": dshape_profile,
}


def make_profile(name: str, b0: float = 1.0) -> MagneticProfile:
    if name not in MAGNETIC_PROFILES:
        raise ValueError(f"unknown magnetic profile '{name}'")
    return uniform_profile(b0) if name == "uniform" else MAGNETIC_PROFILES[name]()


@dataclass(frozen=True)
class FieldSampler:
    """E(t, x), magnetic profile and eps seen by the pushers."""
    electric: VectorField
    magnetic: MagneticProfile
    eps: float
    potential: Optional[ScalarField] = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    def E(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.electric(t, np.atleast_2d(x))

    def b(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.magnetic.b(t, x)

    def grad_b(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.magnetic.grad_b(t, x)


class SingleParticlePotential:
    """phi = 20 r + 0.5 cos(2 pi z) and E = -grad(phi)."""

    radial_slope = 20.0
    axial_amplitude = 0.5

    def phi(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.radial_slope * np.sqrt(_radius_sq(x)) + \
            self.axial_amplitude * np.cos(2.0 * math.pi * x[:, 2])

    def E(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        r = np.sqrt(_radius_sq(x))
        safe = np.where(r > 0.0, r, 1.0)
        out = np.zeros((x.shape[0], 3))
        out[:, 0] = np.where(r > 0.0, -self.radial_slope * x[:, 0] / safe, 0.0)
        out[:, 1] = np.where(r > 0.0, -self.radial_slope * x[:, 1] / safe, 0.0)
        out[:, 2] = 2.0 * math.pi * self.axial_amplitude * np.sin(2.0 * math.pi * x[:, 2])
        return out


def analytic_sampler(eps: float, profile: str = "single_particle") -> FieldSampler:
    """Single-particle potential with the named magnetic profile."""
    potential = SingleParticlePotential()
    return FieldSampler(electric=potential.E, magnetic=make_profile(profile), eps=eps,
                        potential=potential.phi)


def grid_sampler(E: np.ndarray, grid: GridSpec, magnetic: MagneticProfile, eps: float,
                 spec: ShapeSpec = ShapeSpec()) -> FieldSampler:
    """Sampler over a frozen nodal field; the stage time is ignored."""
    return FieldSampler(electric=lambda t, x: interpolate_E(E, grid, x, spec),
                        magnetic=magnetic, eps=eps)


def constant_sampler(E0, magnetic: MagneticProfile, eps: float) -> FieldSampler:
    E0 = np.asarray(E0, dtype=float)
    return FieldSampler(electric=lambda t, x: np.broadcast_to(E0, (np.atleast_2d(x).shape[0], 3)).copy(),
                        magnetic=magnetic, eps=eps)
