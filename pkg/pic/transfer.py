#!/usr/bin/env python3
"""
Particle-grid transfer: charge deposition, field interpolation and
velocity reconstruction from the augmented state.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from geometry.grid_classifier import GridClassification, GridSpec, NodeLabel
from pic.particles import ParticleState, ShapeSpec, support_weights

logger = logging.getLogger(__name__)

# particles per deposition chunk
CHUNK_SIZE = 65536
# below this |v_perp| the perpendicular direction is undefined
DIRECTION_FLOOR = 1e-14


@dataclass(frozen=True)
class DepositResult:
    rho: np.ndarray
    # charge whose weights fell on ghost, exterior or off-grid nodes
    lost_charge: float


def _tensor_weights(grid: GridSpec, positions: np.ndarray, spec: ShapeSpec):
    """Flat node indices and weights of every (particle, support node) pair.

    Returns (index, weight, in_grid), each of shape (N, support**3).
    z wraps periodically; x and y outside the grid are flagged.
    """
    p = spec.order
    sx = (positions[:, 0] - grid.x_min) / grid.dx
    sy = (positions[:, 1] - grid.y_min) / grid.dy
    sz = np.mod(positions[:, 2], grid.lz) / grid.dz
    ix0, wx = support_weights(p, sx)
    iy0, wy = support_weights(p, sy)
    iz0, wz = support_weights(p, sz)
    offsets = np.arange(p + 1)
    ix = ix0[:, None] + offsets
    iy = iy0[:, None] + offsets
    iz = np.mod(iz0[:, None] + offsets, grid.nz)

    weight = wx[:, :, None, None] * wy[:, None, :, None] * wz[:, None, None, :]
    in_grid = ((ix >= 0) & (ix < grid.nx))[:, :, None, None] & \
              ((iy >= 0) & (iy < grid.ny))[:, None, :, None]
    in_grid = np.broadcast_to(in_grid, weight.shape)
    cx = np.clip(ix, 0, grid.nx - 1)[:, :, None, None]
    cy = np.clip(iy, 0, grid.ny - 1)[:, None, :, None]
    index = (cx * grid.ny + cy) * grid.nz + iz[:, None, None, :]
    shape = (positions.shape[0], (p + 1) ** 3)
    return index.reshape(shape), weight.reshape(shape), in_grid.reshape(shape)


def _deposit_chunk(cls: GridClassification, spec: ShapeSpec, x: np.ndarray,
                   w: np.ndarray) -> Tuple[np.ndarray, float]:
    grid = cls.grid
    index, weight, in_grid = _tensor_weights(grid, x, spec)
    interior = np.repeat(cls.labels.reshape(-1) == NodeLabel.INTERIOR, grid.nz)
    keep = in_grid & interior[index]
    charge = weight * w[:, None]
    total = np.bincount(index[keep], weights=charge[keep], minlength=grid.nx * grid.ny * grid.nz)
    return total, float(charge[~keep].sum())


def deposit(particles: ParticleState, cls: GridClassification,
            spec: ShapeSpec = ShapeSpec(), threads: int = 1) -> DepositResult:
    """Nodal charge density rho = sum_k w_k S(x - x_k) / dV.

    Weights landing on non-interior nodes are dropped and reported as
    lost charge. Chunks are summed in a fixed order so the result does not
    depend on the worker count beyond rounding.
    """
    grid = cls.grid
    size = grid.nx * grid.ny * grid.nz
    bounds = [(a, min(a + CHUNK_SIZE, particles.n)) for a in range(0, particles.n, CHUNK_SIZE)]
    task = lambda b: _deposit_chunk(cls, spec, particles.x[b[0]:b[1]], particles.w[b[0]:b[1]])
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts: List = list(pool.map(task, bounds))
    else:
        parts = [task(b) for b in bounds]

    total = np.zeros(size)
    lost = 0.0
    for chunk, dropped in parts:
        total += chunk
        lost += dropped
    if lost > 0.0:
        logger.debug(f"Deposition dropped {lost:.3e} charge outside the interior")
    rho = total.reshape(grid.nx, grid.ny, grid.nz) / grid.cell_volume
    return DepositResult(rho=rho, lost_charge=lost)


def interpolate(values: np.ndarray, grid: GridSpec, positions, spec: ShapeSpec = ShapeSpec()) -> np.ndarray:
    """Tensor B-spline interpolation of nodal data (nx, ny, nz[, c]) at positions.

    Uses the same weights as deposit; off-grid nodes contribute nothing.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    index, weight, in_grid = _tensor_weights(grid, positions, spec)
    flat = values.reshape((grid.nx * grid.ny * grid.nz,) + values.shape[3:])
    weight = np.where(in_grid, weight, 0.0)
    gathered = flat[index]
    if gathered.ndim == 3:
        return np.einsum("ns,nsc->nc", weight, gathered)
    return np.einsum("ns,ns->n", weight, gathered)


def interpolate_E(E: np.ndarray, grid: GridSpec, positions, spec: ShapeSpec = ShapeSpec()) -> np.ndarray:
    """Electric field at particle positions, shape (N, 3)."""
    return interpolate(E, grid, positions, spec)


def reconstruct_velocity(v_perp, e_perp, v_par, warn: bool = True) -> np.ndarray:
    """Velocity with perpendicular speed sqrt(2 e_perp) along v_perp.

    Where v_perp vanishes but e_perp does not, the direction defaults to e_x.
    Limit-model states carry no perpendicular velocity, so they pass warn=False.
    """
    v_perp = np.atleast_2d(np.asarray(v_perp, dtype=float))[:, :2]
    e_perp = np.atleast_1d(np.asarray(e_perp, dtype=float))
    v_par = np.atleast_1d(np.asarray(v_par, dtype=float))
    norm = np.hypot(v_perp[:, 0], v_perp[:, 1])
    degenerate = norm < DIRECTION_FLOOR
    if warn and np.any(degenerate & (e_perp > 0.0)):
        logger.warning(f"{int(np.sum(degenerate & (e_perp > 0.0)))} particles lost their "
                       f"perpendicular direction; using e_x")
    direction = np.where(degenerate[:, None], np.array([1.0, 0.0]),
                         v_perp / np.where(degenerate, 1.0, norm)[:, None])
    speed = np.sqrt(2.0 * np.maximum(e_perp, 0.0))
    out = np.empty((v_perp.shape[0], 3))
    out[:, :2] = speed[:, None] * direction
    out[:, 2] = v_par
    return out
