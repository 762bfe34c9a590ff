#!/usr/bin/env python3
"""
Cross-section geometry of the cylinder: disk or Miller D-shape.
Provides inside tests, the curvilinear D-shape mapping and its inverse,
and boundary projections with inward normals for ghost extrapolation.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from exceptions import NoIntersection

logger = logging.getLogger(__name__)

# Miller D-shape constants
DSHAPE_TRIANGULARITY = math.asin(0.416)
DSHAPE_ELONGATION = 1.66

# |level| below this counts as lying on the boundary
BOUNDARY_TOLERANCE = 1e-12

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class DomainSpec:
    """Cross-section D of the cylinder D x [0, L_z)."""
    kind: str
    center: Tuple[float, float]
    # disk radius R, or the D-shape scale R0
    radius: float
    lz: float = 1.0

    def __post_init__(self):
        if self.kind not in ("disk", "dshape"):
            raise ValueError(f"unknown domain kind '{self.kind}'")
        if not self.radius > 0:
            raise ValueError(f"domain radius must be positive, got {self.radius}")
        if not self.lz > 0:
            raise ValueError(f"L_z must be positive, got {self.lz}")

    @classmethod
    def disk(cls, radius: float, center: Tuple[float, float] = (0.0, 0.0),
             lz: float = 1.0) -> "DomainSpec":
        return cls("disk", (float(center[0]), float(center[1])), float(radius), float(lz))

    @classmethod
    def dshape(cls, r0: float = 10.0, center: Tuple[float, float] = (0.0, 0.0),
               lz: float = 1.0) -> "DomainSpec":
        return cls("dshape", (float(center[0]), float(center[1])), float(r0), float(lz))

    def bounding_box(self) -> Tuple[float, float, float, float]:
        """Axis-aligned box (x_min, x_max, y_min, y_max) enclosing D."""
        xc, yc = self.center
        if self.kind == "disk":
            r = self.radius
            return xc - r, xc + r, yc - r, yc + r
        theta = np.linspace(0.0, 2.0 * math.pi, 4097)
        px, py = map_dshape(self.radius, theta, self.center)
        return float(px.min()), float(px.max()), float(py.min()), float(py.max())


@dataclass(frozen=True)
class BoundaryTrace:
    """Projection of an exterior point onto the boundary along the normal."""
    point: np.ndarray
    normal: np.ndarray
    distance: float


def _dshape_direction(xi2: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Direction of the D-shape ray at angle xi2 (the mapping divided by xi1)."""
    psi = xi2 + DSHAPE_TRIANGULARITY * np.sin(xi2)
    return np.cos(psi), DSHAPE_ELONGATION * np.sin(xi2)


def map_dshape(xi1: ArrayLike, xi2: ArrayLike,
               center: Tuple[float, float] = (0.0, 0.0)) -> Tuple[ArrayLike, ArrayLike]:
    """Map curvilinear (xi1, xi2) to physical (x, y).

    The boundary of the D-shape is the image of xi1 = R0. The elongated
    component uses sin(xi2), the same angle argument as the x component.
    """
    dx, dy = _dshape_direction(xi2)
    return center[0] + xi1 * dx, center[1] + xi1 * dy


def _ray_angle(xi2: np.ndarray) -> np.ndarray:
    dx, dy = _dshape_direction(xi2)
    return np.mod(np.arctan2(dy, dx), 2.0 * math.pi)


def invert_dshape(domain: DomainSpec, px: ArrayLike, py: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Curvilinear coordinates of physical points.

    The ray angle is monotone in xi2, so xi2 is found by bisection; along a
    ray the mapping is linear in xi1, which then follows by division.
    """
    rx = np.asarray(px, dtype=float) - domain.center[0]
    ry = np.asarray(py, dtype=float) - domain.center[1]
    target = np.mod(np.arctan2(ry, rx), 2.0 * math.pi)
    lo = np.zeros_like(target)
    hi = np.full_like(target, 2.0 * math.pi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = _ray_angle(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    xi2 = 0.5 * (lo + hi)
    dx, dy = _dshape_direction(xi2)
    xi1 = np.hypot(rx, ry) / np.hypot(dx, dy)
    return xi1, xi2


def level(domain: DomainSpec, px: ArrayLike, py: ArrayLike) -> np.ndarray:
    """Normalised signed level: negative inside D, zero on the boundary."""
    if domain.kind == "disk":
        r = np.hypot(np.asarray(px, dtype=float) - domain.center[0],
                     np.asarray(py, dtype=float) - domain.center[1])
        return r / domain.radius - 1.0
    xi1, _ = invert_dshape(domain, px, py)
    return xi1 / domain.radius - 1.0


def contains(domain: DomainSpec, point) -> Union[bool, np.ndarray]:
    """True where the point lies strictly inside D.

    Accepts a single (x, y) pair or an array of shape (..., 2).
    """
    pts = np.asarray(point, dtype=float)
    inside = level(domain, pts[..., 0], pts[..., 1]) < 0.0
    if inside.ndim == 0:
        return bool(inside)
    return inside


def _dshape_curve(domain: DomainSpec, theta: float):
    """Boundary point and its first two theta-derivatives."""
    r0 = domain.radius
    delta, kappa = DSHAPE_TRIANGULARITY, DSHAPE_ELONGATION
    psi = theta + delta * math.sin(theta)
    dpsi = 1.0 + delta * math.cos(theta)
    ddpsi = -delta * math.sin(theta)
    point = np.array([domain.center[0] + r0 * math.cos(psi),
                      domain.center[1] + r0 * kappa * math.sin(theta)])
    d1 = np.array([-r0 * math.sin(psi) * dpsi, r0 * kappa * math.cos(theta)])
    d2 = np.array([-r0 * (math.cos(psi) * dpsi ** 2 + math.sin(psi) * ddpsi),
                   -r0 * kappa * math.sin(theta)])
    return point, d1, d2


def outward_normal(domain: DomainSpec, point: np.ndarray) -> np.ndarray:
    """Analytic outward unit normal of the boundary at a boundary point."""
    if domain.kind == "disk":
        radial = np.asarray(point, dtype=float) - np.asarray(domain.center)
        return radial / np.linalg.norm(radial)
    _, xi2 = invert_dshape(domain, point[0], point[1])
    _, tangent, _ = _dshape_curve(domain, float(xi2))
    # the curve runs counter-clockwise, so the outward normal is the tangent turned clockwise
    normal = np.array([tangent[1], -tangent[0]])
    return normal / np.linalg.norm(normal)


def _trace_disk(domain: DomainSpec, x_g: np.ndarray) -> BoundaryTrace:
    radial = x_g - np.asarray(domain.center)
    dist = float(np.linalg.norm(radial))
    if dist < domain.radius * (1.0 - BOUNDARY_TOLERANCE) or dist == 0.0:
        raise NoIntersection(f"point {tuple(x_g)} is not outside the disk")
    unit = radial / dist
    x_p = np.asarray(domain.center) + domain.radius * unit
    return BoundaryTrace(point=x_p, normal=-unit, distance=-(dist - domain.radius))


def _newton_dshape(domain: DomainSpec, x_g: np.ndarray):
    """Closest boundary point by Newton iteration on the boundary angle."""
    samples = np.linspace(0.0, 2.0 * math.pi, 512, endpoint=False)
    bx, by = map_dshape(domain.radius, samples, domain.center)
    theta = float(samples[np.argmin((bx - x_g[0]) ** 2 + (by - x_g[1]) ** 2)])
    tolerance = 1e-12 * domain.radius
    for _ in range(50):
        point, d1, d2 = _dshape_curve(domain, theta)
        offset = point - x_g
        grad = float(offset @ d1)
        hess = float(d1 @ d1 + offset @ d2)
        if hess <= 0.0:
            return None
        step = grad / hess
        theta -= step
        if abs(step) * np.linalg.norm(d1) < tolerance:
            point, _, _ = _dshape_curve(domain, theta)
            return point
    return None


def _bisect_ray(domain: DomainSpec, x_g: np.ndarray) -> np.ndarray:
    """Boundary crossing on the segment from the centre to x_g."""
    center = np.asarray(domain.center)
    lo, hi = 0.0, 1.0
    if level(domain, *(center + hi * (x_g - center))) <= 0.0:
        raise NoIntersection(f"no boundary crossing between centre and {tuple(x_g)}")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if level(domain, *(center + mid * (x_g - center))) < 0.0:
            lo = mid
        else:
            hi = mid
    return center + 0.5 * (lo + hi) * (x_g - center)


def boundary_trace(domain: DomainSpec, x_g) -> BoundaryTrace:
    """Project an exterior point x_g onto the boundary of D.

    Returns the boundary point x_p, the inward unit normal n at x_p and the
    signed distance s_g = -|x_g - x_p| of x_g along that normal.
    """
    x_g = np.asarray(x_g, dtype=float)
    if domain.kind == "disk":
        return _trace_disk(domain, x_g)

    if level(domain, x_g[0], x_g[1]) < -BOUNDARY_TOLERANCE:
        raise NoIntersection(f"point {tuple(x_g)} is not outside the D-shape")

    x_p = _newton_dshape(domain, x_g)
    if x_p is None:
        logger.debug(f"Newton projection failed at {tuple(x_g)}, bisecting the radial ray")
        x_p = _bisect_ray(domain, x_g)

    normal = -outward_normal(domain, x_p)
    return BoundaryTrace(point=x_p, normal=normal,
                         distance=-float(np.linalg.norm(x_g - x_p)))
