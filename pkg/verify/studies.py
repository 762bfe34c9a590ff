#!/usr/bin/env python3
"""
Verification studies: time-step convergence, eps-consistency between the
semi-implicit and limit schemes, v_perp damping, and manufactured Poisson
solutions. Every study returns a StudyTable whose least-squares log-log
slope is checked against the expected rate.
"""

import asyncio
import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import CaseParams
from exceptions import OutputError
from geometry.domain import DomainSpec
from geometry.grid_classifier import classify, grid_for
from pic.particles import ParticleState
from poisson.field_solver import PoissonSolver
from pusher.fields import FieldSampler, analytic_sampler
from pusher.integrators import advance, step_drift_rk4, to_limit_state
from pusher.schemes import SchemeKind, matching_pair, scheme_info
from sim.initial_conditions import single_particle_state

logger = logging.getLogger(__name__)

DEFAULT_DTS = (0.1, 0.05, 0.025, 0.0125)
# SI2 reaches second order only once the kink of chi at e_perp = |v_perp|^2 / 2
# is crossed inside a step; over the default window its slope stays near 1.5
SCHEME_DTS: Dict[SchemeKind, Tuple[float, ...]] = {
    SchemeKind.SI2: (0.04, 0.02, 0.01, 0.005),
}
DEFAULT_EPS = (1e-2, 1e-3, 1e-4)
DEFAULT_VPERP_EPS = (1e-2, 1e-3, 1e-4, 1e-5)
# reference step = min(dt) / REFERENCE_REFINEMENT
REFERENCE_REFINEMENT = 100
# half-widths of the accepted slope windows, per order
CONVERGENCE_TOLERANCE = {1: 0.15, 2: 0.2, 3: 0.3}
CONSISTENCY_SLOPE = (2.0, 0.3)
VPERP_SLOPE = (1.0, 0.2)
POISSON_MIN_SLOPE = 1.8
STABILITY_EPS = (1e-1, 1e-2, 1e-3, 1e-4)
# r_perp bound of the single-particle domain
STABILITY_RADIUS = 10.0
# perpendicular deviation allowed once the gyration is unresolved
STABILITY_PERP_TOL = 0.5
STABILITY_STIFF_EPS = 1e-4
# bound on the full-space deviation, z phase included, over every eps
STABILITY_BOUND = 2.5
# below this eps the reference is the limit model
DRIFT_REFERENCE_EPS = 1e-3
DRIFT_REFERENCE_DT = 1e-3
# RK4 reference step = eps / FULL_REFERENCE_RESOLUTION
FULL_REFERENCE_RESOLUTION = 50


@dataclass(frozen=True)
class StudyRow:
    param: float
    error: float


def log_slope(params: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(param) over all rows."""
    p = np.log(np.asarray(params, dtype=float))
    e = np.log(np.maximum(np.asarray(errors, dtype=float), np.finfo(float).tiny))
    return float(np.polyfit(p, e, 1)[0])


@dataclass
class StudyTable:
    """Rows of one study and the slope window it must land in."""
    name: str
    param_name: str
    lower: float
    upper: float = math.inf
    rows: List[StudyRow] = field(default_factory=list)

    @property
    def slope(self) -> float:
        return log_slope([r.param for r in self.rows], [r.error for r in self.rows])

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.slope)) and self.lower <= self.slope <= self.upper

    def local_slopes(self) -> List[Optional[float]]:
        """Slope between each row and the previous one; None for the first row."""
        out: List[Optional[float]] = [None]
        for prev, row in zip(self.rows, self.rows[1:]):
            out.append(log_slope([prev.param, row.param], [prev.error, row.error]))
        return out

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        window = f">= {self.lower:g}" if math.isinf(self.upper) else f"in [{self.lower:g}, {self.upper:g}]"
        return f"{verdict} {self.name}: slope {self.slope:.3f} {window}"


def write_study_csv(path: str, table: StudyTable):
    """`param,error,slope` rows followed by a `# PASS|FAIL` summary line."""
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(("param", "error", "slope"))
            for row, local in zip(table.rows, table.local_slopes()):
                writer.writerow(("%.17g" % row.param, "%.17g" % row.error,
                                 "" if local is None else "%.6f" % local))
            f.write(f"# {table.summary()}\n")
    except OSError as e:
        raise OutputError(path, e) from e


async def gather_rows(fn: Callable, params: Sequence, threads: int = 1) -> List:
    """Evaluate fn over params on a thread pool; results keep the input order."""
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        tasks = [loop.run_in_executor(pool, fn, p) for p in params]
        return await asyncio.gather(*tasks)


def run_rows(fn: Callable, params: Sequence, threads: int = 1) -> List:
    if threads <= 1 or len(params) <= 1:
        return [fn(p) for p in params]
    return asyncio.run(gather_rows(fn, params, threads))


async def batch_studies(studies: Sequence[Callable[[], StudyTable]], threads: int = 1) -> List[StudyTable]:
    """Run independent studies concurrently."""
    return await gather_rows(lambda study: study(), studies, threads)


@dataclass(frozen=True)
class ErrorScale:
    """Initial magnitudes of x, e_perp and v_par (1 where zero)."""
    x: float
    e: float
    v_par: float

    @classmethod
    def of(cls, state: ParticleState) -> "ErrorScale":
        pick = lambda value: value if value > 0.0 else 1.0
        return cls(x=pick(float(np.max(np.linalg.norm(state.x, axis=1)))),
                   e=pick(float(np.max(np.abs(state.e_perp)))),
                   v_par=pick(float(np.max(np.abs(state.v_par)))))


def state_error(a: ParticleState, b: ParticleState, scale: ErrorScale) -> float:
    """Largest scaled Euclidean distance in (x, e_perp, v_par) over particles."""
    dx = np.sum((a.x - b.x) ** 2, axis=1) / scale.x ** 2
    de = (a.e_perp - b.e_perp) ** 2 / scale.e ** 2
    dv = (a.v_par - b.v_par) ** 2 / scale.v_par ** 2
    return float(np.max(np.sqrt(dx + de + dv)))


def initial_state(params: Optional[CaseParams] = None, vperp_scale: float = 1.0) -> ParticleState:
    """Single-particle data with v_perp multiplied by vperp_scale."""
    state = single_particle_state(params or CaseParams())
    v = state.v.copy()
    v[:, :2] *= vperp_scale
    return ParticleState.from_velocities(state.x, v, state.w)


def _steps(t_final: float, dt: float) -> int:
    n = round(t_final / dt)
    if n < 1 or not math.isclose(n * dt, t_final, rel_tol=1e-9):
        raise ValueError(f"dt={dt} does not divide T={t_final}")
    return n


def _check_geometric(values: Sequence[float], minimum: int, name: str):
    if len(values) < minimum:
        raise ValueError(f"{name} list needs at least {minimum} entries, got {len(values)}")
    ratios = np.asarray(values[1:], dtype=float) / np.asarray(values[:-1], dtype=float)
    if not np.allclose(ratios, ratios[0], rtol=1e-6) or ratios[0] == 1.0:
        raise ValueError(f"{name} list must be geometric, got {list(values)}")


def trajectory(kind, state: ParticleState, dt: float, n_steps: int, sampler: FieldSampler,
               stage_times: str = "printed") -> List[ParticleState]:
    """States at steps 0..n_steps."""
    states = [to_limit_state(state) if scheme_info(kind).is_limit else state]
    advance(kind, state, 0.0, dt, n_steps, sampler, stage_times,
            observer=lambda n, t, s: states.append(s))
    return states


def drift_reference(state: ParticleState, dt: float, n_steps: int,
                    sampler: FieldSampler) -> ParticleState:
    """Tiny-step RK4 solution of the limit characteristics."""
    state = to_limit_state(state)
    for n in range(n_steps):
        state = step_drift_rk4(state, n * dt, dt, sampler)
    return state


def default_dts(scheme) -> Tuple[float, ...]:
    """Time steps of the convergence study when none are given."""
    return SCHEME_DTS.get(scheme_info(scheme).kind, DEFAULT_DTS)


def convergence_study(scheme, eps: Optional[float] = None, dts: Optional[Sequence[float]] = None,
                      t_final: float = 1.0, profile: str = "single_particle",
                      stage_times: str = "printed", threads: int = 1,
                      params: Optional[CaseParams] = None) -> StudyTable:
    """Global error at T against a reference for a list of time steps.

    Semi-implicit schemes are compared with RK4 on the original characteristics,
    limit schemes with RK4 on the limit characteristics, both at min(dt)/100.
    """
    info = scheme_info(scheme)
    if info.family == "reference":
        raise ValueError("the reference integrator has no convergence study")
    if dts is None:
        dts = default_dts(info.kind)
    _check_geometric(dts, 4, "dt")
    if eps is None:
        eps = 1e-3 if info.is_limit else 1.0
    sampler = analytic_sampler(eps, profile)
    state0 = initial_state(params)
    scale = ErrorScale.of(state0)

    dt_ref = min(dts) / REFERENCE_REFINEMENT
    n_ref = _steps(t_final, dt_ref)
    if info.is_limit:
        reference = drift_reference(state0, dt_ref, n_ref, sampler)
    else:
        reference = advance(SchemeKind.RK4REF, state0, 0.0, dt_ref, n_ref, sampler)

    def row(dt: float) -> StudyRow:
        final = advance(info.kind, state0, 0.0, dt, _steps(t_final, dt), sampler, stage_times)
        return StudyRow(dt, state_error(final, reference, scale))

    tol = CONVERGENCE_TOLERANCE[info.order]
    table = StudyTable(name=f"convergence {info.kind.value} eps={eps:g}", param_name="dt",
                       lower=info.order - tol, upper=info.order + tol)
    table.rows = run_rows(row, list(dts), threads)
    for r in table.rows:
        logger.info(f"{info.kind.value} dt={r.param:g} error={r.error:.3e}")
    logger.info(table.summary())
    return table


def epsilon_consistency_study(order: int, dt: float = 0.1, eps_list: Sequence[float] = DEFAULT_EPS,
                              t_final: float = 1.0, profile: str = "dshape",
                              stage_times: str = "printed", threads: int = 1,
                              params: Optional[CaseParams] = None) -> StudyTable:
    """max_t distance between the semi-implicit scheme and its limit scheme.

    The initial v_perp is scaled by eps. Distances use the magnitudes of the
    unscaled data so every row is measured in the same norm.
    """
    _check_geometric(eps_list, 3, "eps")
    si, limit = matching_pair(order)
    scale = ErrorScale.of(initial_state(params))
    n_steps = _steps(t_final, dt)

    def row(eps: float) -> StudyRow:
        sampler = analytic_sampler(eps, profile)
        state0 = initial_state(params, vperp_scale=eps)
        stiff = trajectory(si, state0, dt, n_steps, sampler, stage_times)
        drift = trajectory(limit, state0, dt, n_steps, sampler, stage_times)
        return StudyRow(eps, max(state_error(a, b, scale) for a, b in zip(stiff[1:], drift[1:])))

    center, tol = CONSISTENCY_SLOPE
    table = StudyTable(name=f"eps-consistency order {order} dt={dt:g}", param_name="eps",
                       lower=center - tol, upper=center + tol)
    table.rows = run_rows(row, list(eps_list), threads)
    for r in table.rows:
        logger.info(f"order {order} eps={r.param:g} deviation={r.error:.3e}")
    logger.info(table.summary())
    return table


def vperp_scaling_study(order: int = 3, dt: float = 0.1, eps_list: Sequence[float] = DEFAULT_VPERP_EPS,
                        t_final: float = 1.0, first_step: int = 5, profile: str = "dshape",
                        stage_times: str = "printed", threads: int = 1,
                        params: Optional[CaseParams] = None) -> StudyTable:
    """max over n >= first_step of |v_perp^n| against eps, from O(1) initial data."""
    _check_geometric(eps_list, 3, "eps")
    si, _ = matching_pair(order)
    n_steps = _steps(t_final, dt)
    if n_steps < first_step:
        raise ValueError(f"T/dt={n_steps} steps is shorter than first_step={first_step}")
    state0 = initial_state(params)

    def row(eps: float) -> StudyRow:
        states = trajectory(si, state0, dt, n_steps, analytic_sampler(eps, profile), stage_times)
        speed = max(float(np.max(np.hypot(s.v[:, 0], s.v[:, 1]))) for s in states[first_step:])
        return StudyRow(eps, speed)

    center, tol = VPERP_SLOPE
    table = StudyTable(name=f"vperp-scaling {si.value} dt={dt:g}", param_name="eps",
                       lower=center - tol, upper=center + tol)
    table.rows = run_rows(row, list(eps_list), threads)
    logger.info(table.summary())
    return table


def manufactured_potential(x, y, z, radius: float, lz: float) -> np.ndarray:
    """cos(a r^2) cos(2 pi z / lz) with a = pi / (2 R^2); zero on r = R."""
    a = math.pi / (2.0 * radius ** 2)
    return np.cos(a * (x ** 2 + y ** 2)) * np.cos(2.0 * math.pi * z / lz)


def manufactured_density(x, y, z, radius: float, lz: float) -> np.ndarray:
    """-Laplacian of manufactured_potential."""
    a = math.pi / (2.0 * radius ** 2)
    r2 = x ** 2 + y ** 2
    kz = 2.0 * math.pi / lz
    radial = 4.0 * a * np.sin(a * r2) + 4.0 * a ** 2 * r2 * np.cos(a * r2)
    return (radial + kz ** 2 * np.cos(a * r2)) * np.cos(kz * z)


def _disk_solve(n: int, nz: int, radius: float, lz: float, rtol: float, threads: int,
                density: Callable, exact: Callable) -> float:
    domain = DomainSpec.disk(radius, lz=lz)
    grid = grid_for(domain, n, n, nz)
    cls = classify(grid, domain, threads)
    X, Y = grid.mesh()
    Z = grid.z_nodes
    X3, Y3, Z3 = X[:, :, None], Y[:, :, None], Z[None, None, :]
    rho = np.broadcast_to(density(X3, Y3, Z3), (grid.nx, grid.ny, grid.nz))
    field_state = PoissonSolver(cls, rtol, threads).solve_poisson(rho)
    err = np.abs(field_state.phi - np.broadcast_to(exact(X3, Y3, Z3), rho.shape))
    return float(err[cls.unknowns].max())


def poisson_convergence_study(sizes: Sequence[int] = (32, 64, 128), nz: int = 4, radius: float = 1.0,
                              lz: float = 1.0, rtol: float = 1e-10, threads: int = 1) -> StudyTable:
    """Max nodal error of the manufactured solution against the mesh width."""
    table = StudyTable(name=f"poisson disk R={radius:g}", param_name="h", lower=POISSON_MIN_SLOPE)
    for n in sizes:
        h = grid_for(DomainSpec.disk(radius, lz=lz), n, n, nz).dx
        error = _disk_solve(n, nz, radius, lz, rtol, threads,
                            lambda x, y, z: manufactured_density(x, y, z, radius, lz),
                            lambda x, y, z: manufactured_potential(x, y, z, radius, lz))
        table.rows.append(StudyRow(h, error))
        logger.info(f"poisson n={n} h={h:.4g} max error {error:.3e}")
    logger.info(table.summary())
    return table


def quadratic_exactness(n: int = 32, radius: float = 1.0, rtol: float = 1e-10, threads: int = 1) -> float:
    """Max error for rho = 4 whose solution R^2 - r^2 the discretisation reproduces."""
    return _disk_solve(n, 1, radius, 1.0, rtol, threads,
                       lambda x, y, z: 4.0 + 0.0 * x,
                       lambda x, y, z: radius ** 2 - x ** 2 - y ** 2)


def dshape_residuals(nx: int = 64, ny: int = 96, nz: int = 4, r0: float = 10.0,
                     rtol: float = 1e-11, threads: int = 1) -> Dict[int, float]:
    """Per-mode relative residuals of a D-shape solve with a z-modulated density."""
    domain = DomainSpec.dshape(r0)
    grid = grid_for(domain, nx, ny, nz)
    cls = classify(grid, domain, threads)
    z = grid.z_nodes
    rho = np.broadcast_to(1.0 + 0.5 * np.cos(2.0 * math.pi * z / grid.lz), (nx, ny, nz))
    residuals = PoissonSolver(cls, rtol, threads).solve_poisson(rho).residuals
    for k, res in sorted(residuals.items()):
        logger.info(f"dshape mode k={k}: residual {res:.2e}")
    return residuals


@dataclass(frozen=True)
class StabilityRow:
    """Deviation of one coarse-step orbit from its reference, split by direction."""
    eps: float
    perp_error: float
    axial_error: float
    error: float
    max_radius: float


def _reference_orbit(state0: ParticleState, eps: float, dt: float, n_steps: int,
                     sampler: FieldSampler) -> List[ParticleState]:
    """Reference states at the coarse times 0, dt, ..., n_steps * dt."""
    drift = eps <= DRIFT_REFERENCE_EPS
    dt_ref = DRIFT_REFERENCE_DT if drift else eps / FULL_REFERENCE_RESOLUTION
    ratio = round(dt / dt_ref)
    if ratio < 1 or not math.isclose(ratio * dt_ref, dt, rel_tol=1e-9):
        raise ValueError(f"reference step {dt_ref:g} does not divide dt={dt}")
    state = to_limit_state(state0) if drift else state0
    states = [state]
    keep = lambda n, t, s: states.append(s) if n % ratio == 0 else None
    if drift:
        for n in range(1, n_steps * ratio + 1):
            state = step_drift_rk4(state, (n - 1) * dt_ref, dt_ref, sampler)
            keep(n, n * dt_ref, state)
    else:
        advance(SchemeKind.RK4REF, state0, 0.0, dt_ref, n_steps * ratio, sampler, observer=keep)
    return states


def stability_sweep(scheme="SI3", dt: float = 0.1, eps_list: Sequence[float] = STABILITY_EPS,
                    t_final: float = 10.0, stage_times: str = "printed", threads: int = 1,
                    params: Optional[CaseParams] = None) -> List[StabilityRow]:
    """A fixed coarse time step swept over eps, compared with a resolved reference.

    The reference is RK4 on the full characteristics at eps / 50 while the
    gyration can be followed, and RK4 on the limit characteristics at
    dt = 1e-3 from eps = 1e-3 down. Deviations are max over the coarse
    times, with the (x, y) part kept apart from the z phase.
    """
    kind = scheme_info(scheme).kind
    n_steps = _steps(t_final, dt)
    state0 = initial_state(params)

    def row(eps: float) -> StabilityRow:
        sampler = analytic_sampler(eps)
        coarse = trajectory(kind, state0, dt, n_steps, sampler, stage_times)
        reference = _reference_orbit(state0, eps, dt, n_steps, sampler)
        perp = max(float(np.max(np.linalg.norm(a.x[:, :2] - b.x[:, :2], axis=1)))
                   for a, b in zip(coarse, reference))
        axial = max(float(np.max(np.abs(a.x[:, 2] - b.x[:, 2]))) for a, b in zip(coarse, reference))
        full = max(float(np.max(np.linalg.norm(a.x - b.x, axis=1))) for a, b in zip(coarse, reference))
        radius = max(float(np.max(np.hypot(s.x[:, 0], s.x[:, 1]))) for s in coarse)
        logger.info(f"{kind.value} eps={eps:g} dt={dt:g}: perp {perp:.3e}, z {axial:.3e}, "
                    f"max r {radius:.3f}")
        return StabilityRow(eps, perp, axial, full, radius)

    return run_rows(row, list(eps_list), threads)


def stability_passed(rows: Sequence[StabilityRow]) -> bool:
    """Bounded orbit for every eps, small (x, y) deviation in the stiff regime."""
    for r in rows:
        if not (r.max_radius < STABILITY_RADIUS and r.error <= STABILITY_BOUND):
            return False
        if r.eps <= STABILITY_STIFF_EPS and r.perp_error > STABILITY_PERP_TOL:
            return False
    return True
