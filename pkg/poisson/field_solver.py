#!/usr/bin/env python3
"""
Poisson solver -eps0 Lap(phi) = rho on D x [0, L_z) with phi = 0 on the boundary.

The density is Fourier transformed along the periodic z axis; every mode
k gives a 2-D Helmholtz problem (-Lap + kappa_k^2) phi_k = rho_k / eps0, assembled
with the five-point stencil and ghost closures and solved by BiCGSTAB.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, spsolve

from exceptions import OutputError, SingularSystem, SolverDiverged
from geometry.grid_classifier import NEIGHBOURS, GridClassification, GridSpec
from poisson.ghost_closure import GhostClosure, build_closures

logger = logging.getLogger(__name__)

# Relative size below which a mode component is round-off from the FFT
ROUNDOFF = 1e-14


@dataclass
class FieldState:
    """Nodal rho, phi and E = -grad(phi); arrays are (nx, ny, nz[, 3])."""
    grid: GridSpec
    rho: np.ndarray
    phi: np.ndarray
    E: np.ndarray
    residuals: Dict[int, float] = field(default_factory=dict)
    permittivity: float = 1.0

    @classmethod
    def zeros(cls, grid: GridSpec, permittivity: float = 1.0) -> "FieldState":
        shape = (grid.nx, grid.ny, grid.nz)
        return cls(grid=grid, rho=np.zeros(shape), phi=np.zeros(shape),
                   E=np.zeros(shape + (3,)), permittivity=permittivity)


@dataclass(frozen=True)
class ModeOperator:
    """Sparse Helmholtz operator of one z-mode over the unknown nodes.

    boundary_coupling holds, per row, the coefficient multiplying the
    Dirichlet value; each row of matrix plus that coefficient sums to kappa^2.
    """
    k: int
    kappa: float
    matrix: sp.csr_matrix
    boundary_coupling: np.ndarray


def mode_wavenumber(k: int, lz: float) -> float:
    return 2.0 * math.pi * k / lz


def unknown_index(cls: GridClassification) -> np.ndarray:
    """Row number of every unknown node, -1 elsewhere."""
    index = np.full(cls.labels.shape, -1, dtype=np.int64)
    mask = cls.unknowns
    index[mask] = np.arange(int(mask.sum()))
    return index


def assemble_mode(cls: GridClassification, k: int,
                  closures: Optional[Dict[Tuple[int, int], GhostClosure]] = None) -> ModeOperator:
    """Five-point operator for mode k with ghost references eliminated."""
    grid = cls.grid
    if closures is None:
        closures = build_closures(cls)
    index = unknown_index(cls)
    n = int((index >= 0).sum())
    if n == 0:
        raise SingularSystem("no unknown interior nodes on this grid")

    kappa = mode_wavenumber(k, grid.lz)
    cx, cy = 1.0 / grid.dx ** 2, 1.0 / grid.dy ** 2
    rows, cols, vals = [], [], []
    coupling = np.zeros(n)

    def couple(row: int, node: Tuple[int, int], coef: float):
        target = index[node]
        if target >= 0:
            rows.append(row)
            cols.append(int(target))
            vals.append(coef)
        else:
            # on-boundary node: known Dirichlet value
            coupling[row] += coef

    for i, j in np.argwhere(index >= 0):
        row = int(index[i, j])
        rows.append(row)
        cols.append(row)
        vals.append(2.0 * cx + 2.0 * cy + kappa ** 2)
        for di, dj in NEIGHBOURS:
            coef = -(cx if di else cy)
            nb = (int(i + di), int(j + dj))
            if nb in closures:
                closure = closures[nb]
                coupling[row] += coef * closure.w_p
                for node, w in closure.node_weights().items():
                    couple(row, node, coef * w)
            elif cls.is_interior(*nb):
                couple(row, nb, coef)
            else:
                raise SingularSystem(f"node {(int(i), int(j))} references unlabelled neighbour {nb}")

    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    matrix.sum_duplicates()
    if np.any(matrix.diagonal() == 0.0):
        raise SingularSystem(f"mode k={k}: zero diagonal entry")
    return ModeOperator(k=k, kappa=kappa, matrix=matrix, boundary_coupling=coupling)


def _jacobi(matrix: sp.csr_matrix) -> LinearOperator:
    inv_diag = 1.0 / matrix.diagonal()
    return LinearOperator(matrix.shape, matvec=lambda x: inv_diag * x, dtype=float)


class PoissonSolver:
    """Spectral-in-z, embedded-boundary-in-(x, y) Poisson solver.

    Mode operators and closures are built once per classification and
    reused for every solve.
    """

    def __init__(self, classification: GridClassification, rtol: float = 1e-10,
                 threads: int = 1, dirichlet_value: float = 0.0, permittivity: float = 1.0):
        if permittivity <= 0.0:
            raise ValueError(f"permittivity must be > 0, got {permittivity}")
        self.cls = classification
        self.grid = classification.grid
        self.rtol = rtol
        self.threads = max(1, threads)
        self.dirichlet_value = dirichlet_value
        self.permittivity = permittivity
        self.closures = build_closures(classification)
        self.index = unknown_index(classification)
        self._operators: Dict[int, ModeOperator] = {}

    @property
    def modes(self) -> range:
        return range(self.grid.nz // 2 + 1)

    def operator(self, k: int) -> ModeOperator:
        if k not in self._operators:
            self._operators[k] = assemble_mode(self.cls, k, self.closures)
        return self._operators[k]

    def _krylov(self, op: ModeOperator, rhs: np.ndarray, scale: float = 0.0) -> Tuple[np.ndarray, float]:
        """Solve one real system; scale is the norm of the whole transformed density.

        A right-hand side at round-off level relative to scale is treated as
        zero. A BiCGSTAB breakdown falls back to a direct sparse solve.
        """
        norm = float(np.linalg.norm(rhs))
        if norm == 0.0 or norm <= ROUNDOFF * scale:
            return np.zeros_like(rhs), 0.0
        n = rhs.size
        iterations = [0]

        def count(_):
            iterations[0] += 1

        x, info = bicgstab(op.matrix, rhs, rtol=self.rtol, atol=0.0, maxiter=10 * n,
                           M=_jacobi(op.matrix), callback=count)
        if info < 0:
            logger.warning(f"mode k={op.k}: BiCGSTAB breakdown after {iterations[0]} iterations, "
                           f"switching to a direct solve")
            x = spsolve(op.matrix.tocsc(), rhs)
        residual = float(np.linalg.norm(rhs - op.matrix @ x)) / norm
        if info > 0 or not np.all(np.isfinite(x)) or (info < 0 and residual > self.rtol):
            raise SolverDiverged(op.k, residual, iterations[0])
        logger.debug(f"mode k={op.k}: {iterations[0]} iterations, residual {residual:.2e}")
        return x, residual

    def _solve_mode(self, k: int, rhs: np.ndarray, scale: float = 0.0) -> Tuple[int, np.ndarray, float]:
        op = self.operator(k)
        if k == 0 and self.dirichlet_value != 0.0:
            rhs = rhs - op.boundary_coupling * self.dirichlet_value * self.grid.nz
        real, res_r = self._krylov(op, np.ascontiguousarray(rhs.real), scale)
        imag, res_i = self._krylov(op, np.ascontiguousarray(rhs.imag), scale)
        return k, real + 1j * imag, max(res_r, res_i)

    def solve_poisson(self, rho: np.ndarray) -> FieldState:
        """phi and E for a nodal density of shape (nx, ny, nz)."""
        grid = self.grid
        rho = np.asarray(rho, dtype=float)
        if not np.all(np.isfinite(rho)):
            raise ValueError("density contains non-finite values")
        mask = self.index >= 0
        rho_hat = np.fft.rfft(rho[mask] / self.permittivity, axis=-1)
        scale = float(np.linalg.norm(rho_hat))

        jobs = [(k, rho_hat[:, k], scale) for k in self.modes]
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(lambda job: self._solve_mode(*job), jobs))
        else:
            results = [self._solve_mode(*job) for job in jobs]

        phi_hat = np.zeros_like(rho_hat)
        residuals = {}
        for k, values, residual in results:
            phi_hat[:, k] = values
            residuals[k] = residual

        phi = np.zeros((grid.nx, grid.ny, grid.nz))
        phi[mask] = np.fft.irfft(phi_hat, n=grid.nz, axis=-1)
        phi[self.cls.on_boundary] = self.dirichlet_value
        E = self.electric_field(phi)
        return FieldState(grid=grid, rho=rho, phi=phi, E=E, residuals=residuals,
                          permittivity=self.permittivity)

    def extended_potential(self, phi: np.ndarray) -> np.ndarray:
        """phi with ghost nodes filled from their closures."""
        ext = phi.copy()
        for (i, j), closure in self.closures.items():
            ext[i, j] = closure.evaluate(phi, self.dirichlet_value)
        return ext

    def electric_field(self, phi: np.ndarray) -> np.ndarray:
        """E = -grad(phi) on interior and ghost nodes, zero elsewhere."""
        grid = self.grid
        ext = self.extended_potential(phi)
        valid = self.cls.interior | self.cls.ghost
        E = np.zeros(phi.shape + (3,))
        E[..., 0] = -_difference(ext, valid, grid.dx, axis=0)
        E[..., 1] = -_difference(ext, valid, grid.dy, axis=1)
        E[..., 2] = -(np.roll(ext, -1, axis=2) - np.roll(ext, 1, axis=2)) / (2.0 * grid.dz)
        E[~valid] = 0.0
        return E


def _difference(values: np.ndarray, valid: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Centred difference where both neighbours are valid, one-sided otherwise."""
    pad = [(0, 0)] * values.ndim
    pad[axis] = (1, 1)
    v = np.pad(values, pad)
    m = np.pad(valid, [(1, 1) if a == axis else (0, 0) for a in range(valid.ndim)])
    n = values.shape[axis]
    take = lambda arr, s: np.take(arr, range(s, s + n), axis=axis)
    fwd, bwd = take(v, 2), take(v, 0)
    has_fwd, has_bwd = take(m, 2), take(m, 0)
    if values.ndim > valid.ndim:
        has_fwd = has_fwd[..., None]
        has_bwd = has_bwd[..., None]
    centred = (fwd - bwd) / (2.0 * h)
    forward = (fwd - values) / h
    backward = (values - bwd) / h
    return np.where(has_fwd & has_bwd, centred,
                    np.where(has_fwd, forward, np.where(has_bwd, backward, 0.0)))


def write_grid_snapshot(path: str, values: np.ndarray, grid: GridSpec, z_average: bool = False):
    """Plain-text snapshot: '# nx ny nz dx dy dz' then one block per z-slab.

    Each block has nx lines of ny values; blocks are separated by a blank
    line. With z_average the single block holds the z-mean and nz is 1.
    """
    data = np.asarray(values, dtype=float)
    if z_average:
        data = data.mean(axis=2, keepdims=True)
        dz = grid.lz
    else:
        dz = grid.dz
    nz = data.shape[2]
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            f.write(f"# {grid.nx} {grid.ny} {nz} {grid.dx!r} {grid.dy!r} {dz!r}\n")
            for k in range(nz):
                if k:
                    f.write("\n")
                np.savetxt(f, data[:, :, k], fmt="%.17g")
    except OSError as e:
        raise OutputError(path, e) from e


def read_grid_snapshot(path: str) -> np.ndarray:
    """Inverse of write_grid_snapshot; returns an (nx, ny, nz) array."""
    with open(path) as f:
        header = f.readline().lstrip("#").split()
        nx, ny, nz = (int(v) for v in header[:3])
        rows = [line.split() for line in f if line.strip()]
    flat = np.array(rows, dtype=float)
    return flat.reshape(nz, nx, ny).transpose(1, 2, 0)
