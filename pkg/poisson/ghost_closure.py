#!/usr/bin/env python3
"""
Ghost-node closures for the embedded-boundary Poisson discretisation.

A ghost value is extrapolated along the inward normal from the boundary
point x_p and two normal points x_h = x_p + h n, x_2h = x_p + 2h n. Their values
are interpolated from interior nodes by Lagrange stencils of degree 2,
falling back to degree 1 and 0 where the geometry leaves too few nodes.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from exceptions import NoInteriorNode
from geometry.domain import BoundaryTrace, contains
from geometry.grid_classifier import GridClassification

logger = logging.getLogger(__name__)

Node = Tuple[int, int]

# nearest-node search radius, in cells
SEARCH_CELLS = 3
# largest distance, in cells, between a window centre and the target
WINDOW_REACH = 1.5


@dataclass(frozen=True)
class Stencil:
    nodes: List[Node]
    weights: np.ndarray
    degree: int

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Interpolated value from nodal data of shape (nx, ny, ...)."""
        out = 0.0
        for (i, j), w in zip(self.nodes, self.weights):
            out = out + w * values[i, j]
        return out


def ghost_weights(s_g: float, h: float) -> Tuple[float, float, float]:
    """Quadratic extrapolation weights on the normal nodes {0, h, 2h} at s_g."""
    w_p = (s_g - h) * (s_g - 2.0 * h) / (2.0 * h * h)
    w_h = -s_g * (s_g - 2.0 * h) / (h * h)
    w_2h = s_g * (s_g - h) / (2.0 * h * h)
    return w_p, w_h, w_2h


def _lagrange(nodes: np.ndarray, x: float) -> np.ndarray:
    weights = np.ones(len(nodes))
    for a, xa in enumerate(nodes):
        for b, xb in enumerate(nodes):
            if a != b:
                weights[a] *= (x - xb) / (xa - xb)
    return weights


def _window(labels_ok, fixed: int, along_x: bool, target: float, origin: float,
            spacing: float, count: int) -> Optional[int]:
    """First index of three consecutive usable nodes on a grid line.

    Candidate windows are tried nearest centre first; the centre must lie
    within WINDOW_REACH cells of the target.
    """
    u = (target - origin) / spacing
    centres = sorted(range(int(math.floor(u)) - 1, int(math.floor(u)) + 3),
                     key=lambda c: (abs(c - u), c))
    for c in centres:
        if abs(c - u) > WINDOW_REACH:
            continue
        if c - 1 < 0 or c + 1 >= count:
            continue
        if along_x:
            ok = all(labels_ok(c + d, fixed) for d in (-1, 0, 1))
        else:
            ok = all(labels_ok(fixed, c + d) for d in (-1, 0, 1))
        if ok:
            return c - 1
    return None


def _quadratic_stencil(target: np.ndarray, cls: GridClassification,
                       normal: Optional[np.ndarray]) -> Optional[Stencil]:
    grid = cls.grid
    ok = cls.is_interior
    # lines are normal to the axis the boundary normal mostly follows
    lines_along_x = normal is not None and abs(normal[1]) > abs(normal[0])
    if lines_along_x:
        u, origin, spacing, count = target[1], grid.y_min, grid.dy, grid.ny
        v, v_origin, v_spacing, v_count = target[0], grid.x_min, grid.dx, grid.nx
        inward = 0 if normal is None else int(np.sign(normal[1]))
    else:
        u, origin, spacing, count = target[0], grid.x_min, grid.dx, grid.nx
        v, v_origin, v_spacing, v_count = target[1], grid.y_min, grid.dy, grid.ny
        inward = 0 if normal is None else int(np.sign(normal[0]))

    base = int(round((u - origin) / spacing))
    step = inward or 1
    for shift in (0, step, -step):
        lines = (base - 1 + shift, base + shift, base + 1 + shift)
        if min(lines) < 0 or max(lines) >= count:
            continue
        windows = []
        for line in lines:
            start = _window(ok, line, lines_along_x, v, v_origin, v_spacing, v_count)
            if start is None:
                break
            windows.append(start)
        else:
            line_pos = origin + spacing * np.asarray(lines, dtype=float)
            across = _lagrange(line_pos, u)
            nodes, weights = [], []
            for line, start, wa in zip(lines, windows, across):
                along_pos = v_origin + v_spacing * np.arange(start, start + 3, dtype=float)
                for offset, wb in enumerate(_lagrange(along_pos, v)):
                    k = start + offset
                    nodes.append((k, line) if lines_along_x else (line, k))
                    weights.append(wa * wb)
            return Stencil(nodes=nodes, weights=np.asarray(weights), degree=2)
    return None


def _bilinear_stencil(target: np.ndarray, cls: GridClassification) -> Optional[Stencil]:
    grid = cls.grid
    fx = (target[0] - grid.x_min) / grid.dx
    fy = (target[1] - grid.y_min) / grid.dy
    i0, j0 = int(math.floor(fx)), int(math.floor(fy))
    cells_i = [i0] + ([i0 - 1] if fx == i0 else [])
    cells_j = [j0] + ([j0 - 1] if fy == j0 else [])
    for i in cells_i:
        for j in cells_j:
            corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]
            if not all(cls.is_interior(a, b) for a, b in corners):
                continue
            tx, ty = fx - i, fy - j
            weights = np.array([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty])
            return Stencil(nodes=corners, weights=weights, degree=1)
    return None


def _nearest_stencil(target: np.ndarray, cls: GridClassification) -> Stencil:
    grid = cls.grid
    ic = int(round((target[0] - grid.x_min) / grid.dx))
    jc = int(round((target[1] - grid.y_min) / grid.dy))
    best, best_dist = None, math.inf
    for i in range(ic - SEARCH_CELLS, ic + SEARCH_CELLS + 1):
        for j in range(jc - SEARCH_CELLS, jc + SEARCH_CELLS + 1):
            if not cls.is_interior(i, j):
                continue
            dist = float(np.hypot(*(grid.node(i, j) - target)))
            if dist < best_dist:
                best, best_dist = (i, j), dist
    if best is None:
        raise NoInteriorNode(f"no interior node within {SEARCH_CELLS} cells of {tuple(target)}")
    return Stencil(nodes=[best], weights=np.ones(1), degree=0)


def interp_stencil(target, cls: GridClassification,
                   normal: Optional[np.ndarray] = None) -> Stencil:
    """Interpolation stencil on interior nodes for a point inside D.

    Tries the nine-node quadratic stencil on three grid lines transverse to
    the dominant component of `normal`, then the bilinear cell, then the
    nearest interior node.
    """
    target = np.asarray(target, dtype=float)
    stencil = _quadratic_stencil(target, cls, normal)
    if stencil is None:
        stencil = _bilinear_stencil(target, cls)
    if stencil is None:
        stencil = _nearest_stencil(target, cls)
    if stencil.degree < 2:
        logger.debug(f"Degree {stencil.degree} stencil at {tuple(np.round(target, 6))}")
    return stencil


@dataclass(frozen=True)
class GhostClosure:
    """Linear closure phi_g = w_p*phi(x_p) + w_h*phi(x_h) + w_2h*phi(x_2h)."""
    trace: BoundaryTrace
    w_p: float
    w_h: float
    w_2h: float
    stencil_h: Optional[Stencil]
    stencil_2h: Optional[Stencil]

    @property
    def degree(self) -> int:
        """Extrapolation order: 2 quadratic, 1 linear, 0 boundary value."""
        if self.stencil_2h is not None:
            return 2
        return 1 if self.stencil_h is not None else 0

    def node_weights(self) -> Dict[Node, float]:
        """Interior-node coefficients of the closure, boundary term excluded."""
        merged: Dict[Node, float] = {}
        for stencil, factor in ((self.stencil_h, self.w_h), (self.stencil_2h, self.w_2h)):
            if stencil is None:
                continue
            for node, w in zip(stencil.nodes, stencil.weights):
                merged[node] = merged.get(node, 0.0) + factor * float(w)
        return merged

    def evaluate(self, values: np.ndarray, boundary_value: float = 0.0) -> np.ndarray:
        """Ghost value from nodal data of shape (nx, ny, ...)."""
        out = self.w_p * boundary_value
        for (i, j), w in self.node_weights().items():
            out = out + w * values[i, j]
        return out


def build_closure(cls: GridClassification, node: Node) -> GhostClosure:
    """Closure of one ghost node, with lower-order fallbacks near thin regions."""
    trace = cls.traces[node]
    grid = cls.grid
    h = min(grid.dx, grid.dy)
    x_h = trace.point + h * trace.normal
    x_2h = trace.point + 2.0 * h * trace.normal
    s_g = trace.distance

    if contains(cls.domain, x_h) and contains(cls.domain, x_2h):
        w_p, w_h, w_2h = ghost_weights(s_g, h)
        return GhostClosure(trace, w_p, w_h, w_2h,
                            interp_stencil(x_h, cls, trace.normal),
                            interp_stencil(x_2h, cls, trace.normal))
    if contains(cls.domain, x_h):
        logger.warning(f"Ghost {node}: x_2h leaves the domain, extrapolating linearly")
        return GhostClosure(trace, (h - s_g) / h, s_g / h, 0.0,
                            interp_stencil(x_h, cls, trace.normal), None)
    logger.warning(f"Ghost {node}: x_h and x_2h leave the domain, using the boundary value")
    return GhostClosure(trace, 1.0, 0.0, 0.0, None, None)


def build_closures(cls: GridClassification) -> Dict[Node, GhostClosure]:
    closures = {node: build_closure(cls, node) for node in cls.ghost_nodes()}
    degrees = [c.degree for c in closures.values()]
    logger.info(
        f"Built {len(closures)} ghost closures "
        f"(quadratic {degrees.count(2)}, linear {degrees.count(1)}, boundary {degrees.count(0)})"
    )
    return closures
