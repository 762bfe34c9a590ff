#!/usr/bin/env python3
"""
Particle storage and B-spline shape functions.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class ParticleState:
    """Unknowns of the augmented characteristics, one row per particle.

    x and v are (N, 3); e_perp and w are (N,). e_perp is the auxiliary
    perpendicular energy, w the statistical weight in charge units.
    """
    x: np.ndarray
    v: np.ndarray
    e_perp: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        self.e_perp = np.atleast_1d(np.asarray(self.e_perp, dtype=float))
        self.w = np.atleast_1d(np.asarray(self.w, dtype=float))
        n = self.x.shape[0]
        if self.x.shape != (n, 3) or self.v.shape != (n, 3):
            raise ValueError(f"positions {self.x.shape} and velocities {self.v.shape} must be (N, 3)")
        if self.e_perp.shape != (n,) or self.w.shape != (n,):
            raise ValueError("e_perp and w must hold one value per particle")

    @classmethod
    def from_velocities(cls, x, v, w) -> "ParticleState":
        """New particles with e_perp = |v_perp|^2 / 2 exactly."""
        v = np.atleast_2d(np.asarray(v, dtype=float))
        e_perp = 0.5 * (v[:, 0] ** 2 + v[:, 1] ** 2)
        return cls(x=x, v=v, e_perp=e_perp, w=np.broadcast_to(w, e_perp.shape).copy())

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def v_par(self) -> np.ndarray:
        return self.v[:, 2]

    @property
    def total_charge(self) -> float:
        return float(self.w.sum())

    def copy(self) -> "ParticleState":
        return ParticleState(self.x.copy(), self.v.copy(), self.e_perp.copy(), self.w.copy())

    def subset(self, mask: np.ndarray) -> "ParticleState":
        return ParticleState(self.x[mask], self.v[mask], self.e_perp[mask], self.w[mask])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))
                    and np.all(np.isfinite(self.e_perp)))


@dataclass(frozen=True)
class ShapeSpec:
    """Centred B-spline of the given order, support radius one cell per order."""
    order: int = 1

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError(f"shape order must be 1, 2 or 3, got {self.order}")

    @property
    def support(self) -> int:
        """Number of nodes touched per axis."""
        return self.order + 1

    @property
    def radius(self) -> float:
        return 0.5 * (self.order + 1)


def shape(order: int, s) -> np.ndarray:
    """B-spline value at normalised offset s (in cells)."""
    a = np.abs(np.asarray(s, dtype=float))
    if order == 1:
        return np.maximum(0.0, 1.0 - a)
    if order == 2:
        return np.where(a < 0.5, 0.75 - a ** 2,
                        np.where(a < 1.5, 0.5 * (1.5 - a) ** 2, 0.0))
    if order == 3:
        return np.where(a < 1.0, 2.0 / 3.0 - a ** 2 + 0.5 * a ** 3,
                        np.where(a < 2.0, (2.0 - a) ** 3 / 6.0, 0.0))
    raise ValueError(f"unsupported shape order {order}")


def support_weights(order: int, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """First supporting node index and the order+1 weights along one axis.

    s is the particle coordinate in cell units measured from node 0.
    """
    s = np.asarray(s, dtype=float)
    start = np.floor(s - 0.5 * (order + 1)).astype(np.int64) + 1
    offsets = np.arange(order + 1)
    nodes = start[..., None] + offsets
    return start, shape(order, s[..., None] - nodes)
