#!/usr/bin/env python3
"""
Cartesian grid embedding of the cylinder cross-section.
Labels every (x, y) node as interior, ghost or exterior and attaches the
boundary projection data each ghost node needs for extrapolation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Tuple

import numpy as np

from geometry.domain import (
    BOUNDARY_TOLERANCE,
    BoundaryTrace,
    DomainSpec,
    boundary_trace,
    level,
)

logger = logging.getLogger(__name__)

NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class NodeLabel(IntEnum):
    INTERIOR = 0
    GHOST = 1
    EXTERIOR = 2


@dataclass(frozen=True)
class GridSpec:
    """Node-centred grid on a box around D, periodic along z.

    Nodes are inclusive in x and y: x_i = x_min + i*dx for i in [0, nx).
    Along z there are nz nodes z_k = k*dz with dz = lz/nz.
    """
    x_min: float
    y_min: float
    dx: float
    dy: float
    nx: int
    ny: int
    nz: int
    lz: float

    @classmethod
    def from_domain(cls, domain: DomainSpec, nx: int, ny: int, nz: int = 1,
                    margin_cells: int = 2) -> "GridSpec":
        """Fit nx-by-ny nodes on the bounding box of D plus a margin of cells."""
        if min(nx, ny) < 2 * margin_cells + 3:
            raise ValueError(f"grid {nx}x{ny} too small for a margin of {margin_cells} cells")
        if nz < 1:
            raise ValueError(f"nz must be >= 1, got {nz}")
        x0, x1, y0, y1 = domain.bounding_box()
        dx = (x1 - x0) / (nx - 1 - 2 * margin_cells)
        dy = (y1 - y0) / (ny - 1 - 2 * margin_cells)
        return cls(x_min=x0 - margin_cells * dx, y_min=y0 - margin_cells * dy,
                   dx=dx, dy=dy, nx=nx, ny=ny, nz=nz, lz=domain.lz)

    @property
    def dz(self) -> float:
        return self.lz / self.nz

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    @property
    def x_nodes(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def y_nodes(self) -> np.ndarray:
        return self.y_min + self.dy * np.arange(self.ny)

    @property
    def z_nodes(self) -> np.ndarray:
        return self.dz * np.arange(self.nz)

    def node(self, i: int, j: int) -> np.ndarray:
        return np.array([self.x_min + i * self.dx, self.y_min + j * self.dy])

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (nx, ny) arrays."""
        return np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")


@dataclass
class GridClassification:
    grid: GridSpec
    domain: Optional[DomainSpec]
    labels: np.ndarray
    # nodes lying on the boundary itself; interior with a Dirichlet row
    on_boundary: np.ndarray
    regular: np.ndarray
    traces: Dict[Tuple[int, int], BoundaryTrace] = field(default_factory=dict)

    @property
    def interior(self) -> np.ndarray:
        return self.labels == NodeLabel.INTERIOR

    @property
    def ghost(self) -> np.ndarray:
        return self.labels == NodeLabel.GHOST

    @property
    def unknowns(self) -> np.ndarray:
        """Interior nodes whose potential is solved for."""
        return self.interior & ~self.on_boundary

    def is_interior(self, i: int, j: int) -> bool:
        if not (0 <= i < self.grid.nx and 0 <= j < self.grid.ny):
            return False
        return bool(self.labels[i, j] == NodeLabel.INTERIOR)

    def ghost_nodes(self) -> List[Tuple[int, int]]:
        return sorted(self.traces)

    def counts(self) -> Dict[str, int]:
        return {
            "interior": int(self.interior.sum()),
            "ghost": int(self.ghost.sum()),
            "exterior": int((self.labels == NodeLabel.EXTERIOR).sum()),
            "on_boundary": int(self.on_boundary.sum()),
            "regular": int(self.regular.sum()),
        }


def _shifted(mask: np.ndarray, di: int, dj: int) -> np.ndarray:
    """mask evaluated at (i+di, j+dj); False off the grid."""
    padded = np.pad(mask, 1, constant_values=False)
    nx, ny = mask.shape
    return padded[1 + di:1 + di + nx, 1 + dj:1 + dj + ny]


def classify(grid: GridSpec, domain: DomainSpec, threads: int = 1) -> GridClassification:
    """Label every grid node relative to D.

    Ghost nodes are exterior nodes in the five-point stencil of an interior
    node; each gets its boundary projection. Interior nodes whose whole
    stencil is interior are marked regular.
    """
    X, Y = grid.mesh()
    lev = level(domain, X, Y)
    on_boundary = np.abs(lev) < BOUNDARY_TOLERANCE
    interior = (lev < 0.0) | on_boundary

    all_interior = interior.copy()
    for di, dj in NEIGHBOURS:
        all_interior &= _shifted(interior, di, dj)
    ghost = ~interior & _touching(interior)

    labels = np.full(interior.shape, NodeLabel.EXTERIOR, dtype=np.int8)
    labels[interior] = NodeLabel.INTERIOR
    labels[ghost] = NodeLabel.GHOST

    ghost_index = [tuple(int(v) for v in ij) for ij in np.argwhere(ghost)]
    points = [grid.node(i, j) for i, j in ghost_index]
    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            found = list(pool.map(lambda p: boundary_trace(domain, p), points))
    else:
        found = [boundary_trace(domain, p) for p in points]
    traces = dict(zip(ghost_index, found))

    result = GridClassification(grid=grid, domain=domain, labels=labels,
                                on_boundary=on_boundary, regular=all_interior & interior & ~on_boundary,
                                traces=traces)
    logger.debug(f"Classified {grid.nx}x{grid.ny} grid: {result.counts()}")
    return result


def _touching(mask: np.ndarray) -> np.ndarray:
    """Nodes with at least one five-point neighbour in mask."""
    out = np.zeros_like(mask)
    for di, dj in NEIGHBOURS:
        out |= _shifted(mask, di, dj)
    return out


def cells_per_radius(grid: GridSpec, domain: DomainSpec) -> float:
    """Resolution of D in cells, used to warn about under-resolved runs."""
    return domain.radius / max(grid.dx, grid.dy)


def grid_for(domain: DomainSpec, nx: int, ny: int, nz: int,
             margin_cells: int = 2) -> GridSpec:
    grid = GridSpec.from_domain(domain, nx, ny, nz, margin_cells)
    if cells_per_radius(grid, domain) < 4:
        logger.warning(f"Domain resolved by only {cells_per_radius(grid, domain):.1f} cells per radius")
    return grid
