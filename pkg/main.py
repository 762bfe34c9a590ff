#!/usr/bin/env python3
"""
Main entry point for magpic runs.
Orchestrates the particle-in-cell loop: deposit, field solve, push,
boundary bookkeeping and diagnostics.
"""

import logging
import math
import signal
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from config import CaseConfig
from diagnostics.energy_monitor import DiagnosticsRecord, EnergyMonitor
from exceptions import MagpicError, SimulationAborted
from geometry.domain import contains
from geometry.grid_classifier import GridClassification, classify, grid_for
from pic.particles import ParticleState, ShapeSpec
from pic.transfer import deposit, reconstruct_velocity
from poisson.field_solver import PoissonSolver
from pusher.fields import analytic_sampler, grid_sampler, make_profile
from pusher.integrators import stepper, to_limit_state
from pusher.schemes import scheme_info
from sim.initial_conditions import domain_for, sample_initial

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def setup_logging(level: str = "INFO"):
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format=LOG_FORMAT, force=True)


def step_count(t_final: float, dt: float) -> int:
    """ceil(T / dt), ignoring rounding noise in the ratio."""
    return int(math.ceil(round(t_final / dt, 9)))


@dataclass
class Snapshot:
    step: int
    t: float
    rho: np.ndarray
    phi: np.ndarray


@dataclass
class RunResult:
    """Everything a run produces; written to disk by write_outputs."""
    config: CaseConfig
    particles: ParticleState
    records: List[DiagnosticsRecord] = field(default_factory=list)
    snapshots: List[Snapshot] = field(default_factory=list)
    # rows (t, x, y, z, vx, vy, vz, e_perp), single-particle runs only
    trajectory: Optional[np.ndarray] = None
    classification: Optional[GridClassification] = None
    steps: int = 0
    removed: int = 0
    removed_charge: float = 0.0
    # deposition charge dropped off the interior, summed over all solves
    dropped_charge: float = 0.0
    interrupted: bool = False


class PlasmaSimulation:
    """One configured run of a test case."""

    def __init__(self, config: CaseConfig):
        self.config = config
        self.running = False
        self.scheme = scheme_info(config.run.scheme)
        self.shape = ShapeSpec(config.grid.shape_order)
        self.magnetic = make_profile(config.case.b_profile, config.case.b0)
        self.rng = np.random.default_rng(config.run.seed)

    def install_signal_handlers(self):
        """Stop after the current step on SIGINT/SIGTERM; returns the previous handlers."""
        return {signum: signal.signal(signum, self._signal_handler)
                for signum in (signal.SIGINT, signal.SIGTERM)}

    @staticmethod
    def restore_signal_handlers(previous):
        for signum, handler in previous.items():
            signal.signal(signum, handler)

    def _signal_handler(self, signum, frame):
        logger.info(f"Received signal {signum}, stopping after the current step...")
        self.running = False

    def run(self) -> RunResult:
        run = self.config.run
        logger.info(f"Starting {run.case} with {self.scheme.kind.value} "
                    f"(eps={run.eps}, dt={run.dt}, T={run.t_final})")
        self.running = True
        if run.case == "single-particle":
            result = self._run_single_particle()
        else:
            result = self._run_pic()
        self.running = False
        logger.info(f"Finished {result.steps} steps, {result.particles.n} particles left, "
                    f"{result.removed} removed")
        return result

    def _run_single_particle(self) -> RunResult:
        run = self.config.run
        sampler = analytic_sampler(run.eps, self.config.case.b_profile)
        monitor = EnergyMonitor(sampler.magnetic, potential=sampler.potential,
                                reconstruct=self.scheme.is_limit)
        particles = sample_initial(self.config, self.rng)
        if self.scheme.is_limit:
            particles = to_limit_state(particles)
        step = stepper(self.scheme.kind, self.config.scheme.si3_stage_times)
        n_steps = step_count(run.t_final, run.dt)

        rows = [self._trajectory_row(0.0, particles, self.scheme.is_limit)]
        monitor.record(0.0, particles, None)
        result = RunResult(config=self.config, particles=particles)
        for n in range(1, n_steps + 1):
            t = (n - 1) * run.dt
            try:
                particles = step(particles, t, run.dt, sampler)
                if n % self.config.output.diag_interval == 0 or n == n_steps:
                    monitor.record(n * run.dt, particles, None)
            except (MagpicError, ValueError) as e:
                raise SimulationAborted(n, t, e) from e
            t = n * run.dt
            rows.append(self._trajectory_row(t, particles, self.scheme.is_limit))
            result.steps = n
            if not self.running:
                result.interrupted = True
                break
        result.particles = particles
        result.records = monitor.records
        result.trajectory = np.array(rows)
        return result

    @staticmethod
    def _trajectory_row(t: float, particles: ParticleState, reconstruct: bool = False) -> List[float]:
        """Limit-model rows report the velocity rebuilt from (e_perp, v_par)."""
        v = particles.v[0]
        if reconstruct:
            v = reconstruct_velocity(particles.v[:1], particles.e_perp[:1], particles.v_par[:1], warn=False)[0]
        return [t, *particles.x[0], *v, particles.e_perp[0]]

    def _run_pic(self) -> RunResult:
        run, out = self.config.run, self.config.output
        domain = domain_for(self.config.case)
        grid = grid_for(domain, self.config.grid.nx, self.config.grid.ny,
                        self.config.grid.nz, self.config.grid.margin_cells)
        cls = classify(grid, domain, run.threads)
        solver = PoissonSolver(cls, self.config.grid.solver_rtol, run.threads,
                               permittivity=self.config.case.permittivity)
        monitor = EnergyMonitor(self.magnetic, cls, reconstruct=self.scheme.is_limit)
        step = stepper(self.scheme.kind, self.config.scheme.si3_stage_times)

        particles = sample_initial(self.config, self.rng)
        if self.scheme.is_limit:
            particles = to_limit_state(particles)
        n0 = particles.n
        q0 = particles.total_charge
        result = RunResult(config=self.config, particles=particles, classification=cls)
        n_steps = step_count(run.t_final, run.dt)

        field_state, lost = self._solve(particles, cls, solver)
        result.dropped_charge = lost
        monitor.record(0.0, particles, field_state, self._lost_fraction(result, q0))
        for n in range(1, n_steps + 1):
            t = (n - 1) * run.dt
            try:
                sampler = grid_sampler(field_state.E, grid, self.magnetic, run.eps, self.shape)
                particles = step(particles, t, run.dt, sampler)
                particles = self._apply_boundaries(particles, domain, result)
                field_state, lost = self._solve(particles, cls, solver)
            except (MagpicError, ValueError) as e:
                raise SimulationAborted(n, t, e) from e
            assert particles.n + result.removed == n0
            result.dropped_charge += lost
            t = n * run.dt
            result.steps = n

            if n % out.diag_interval == 0 or n == n_steps:
                rec = monitor.record(t, particles, field_state, self._lost_fraction(result, q0))
                logger.info(f"step {n}/{n_steps} t={t:.4g} N={particles.n} "
                            f"Et={rec.Et:.8e} mu={rec.mu:.8e}")
            last = n == n_steps or not self.running
            if (out.snapshot_interval and n % out.snapshot_interval == 0) or last:
                result.snapshots.append(Snapshot(n, t, field_state.rho.copy(), field_state.phi.copy()))
            if not self.running:
                result.interrupted = True
                break

        result.particles = particles
        result.records = monitor.records
        return result

    @staticmethod
    def _lost_fraction(result: RunResult, q0: float) -> float:
        """Deposition charge dropped so far, summed over steps, over the initial charge."""
        return result.dropped_charge / q0 if q0 > 0.0 else 0.0

    def _solve(self, particles: ParticleState, cls: GridClassification,
               solver: PoissonSolver):
        deposited = deposit(particles, cls, self.shape, self.config.run.threads)
        rho = deposited.rho - self.config.case.rho0
        return solver.solve_poisson(rho), deposited.lost_charge

    def _apply_boundaries(self, particles: ParticleState, domain, result: RunResult) -> ParticleState:
        """Drop particles that left D and wrap z into [0, L_z)."""
        inside = contains(domain, particles.x[:, :2])
        exits = int(np.count_nonzero(~inside))
        if exits:
            result.removed += exits
            result.removed_charge += float(particles.w[~inside].sum())
            logger.warning(f"{exits} particles left the domain ({result.removed} in total)")
            particles = particles.subset(inside)
        particles.x[:, 2] = np.mod(particles.x[:, 2], domain.lz)
        return particles


def run(config: CaseConfig) -> RunResult:
    return PlasmaSimulation(config).run()


if __name__ == "__main__":
    from cli import main as cli_main
    sys.exit(cli_main())
