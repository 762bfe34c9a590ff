#!/usr/bin/env python3
"""
Energy and adiabatic-invariant diagnostics.
"""

import csv
import logging
import os
from dataclasses import astuple, dataclass, fields
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from exceptions import OutputError, ZeroBaseline
from geometry.grid_classifier import GridClassification
from pic.particles import ParticleState
from pic.transfer import reconstruct_velocity
from poisson.field_solver import FieldState
from pusher.fields import MagneticProfile

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "Ek_aug", "Ek_raw", "Ep", "Et", "mu", "charge_lost")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    Ek_aug: float
    Ek_raw: float
    Ep: float
    Et: float
    mu: float
    charge_lost: float


def kinetic_energy(particles: ParticleState) -> float:
    """Augmented kinetic energy sum w (e_perp + v_par^2 / 2)."""
    return float(np.sum(particles.w * (particles.e_perp + 0.5 * particles.v_par ** 2)))


def kinetic_energy_raw(particles: ParticleState, reconstruct: bool = False) -> float:
    """sum w |v|^2 / 2; limit-model states first get v back from (e_perp, v_par)."""
    v = particles.v
    if reconstruct:
        v = reconstruct_velocity(particles.v, particles.e_perp, particles.v_par, warn=False)
    return float(np.sum(particles.w * 0.5 * np.sum(v ** 2, axis=1)))


def field_energy(field: FieldState, cls: Optional[GridClassification] = None) -> float:
    """eps0/2 sum |E|^2 dV over interior nodes (every node when cls is None)."""
    density = 0.5 * field.permittivity * np.sum(field.E ** 2, axis=-1)
    if cls is not None:
        density = density[cls.interior]
    return float(density.sum() * field.grid.cell_volume)


def energy(particles: ParticleState, field: Optional[FieldState],
           cls: Optional[GridClassification] = None):
    """(E_k, E_p, E_t) with the augmented kinetic energy."""
    Ek = kinetic_energy(particles)
    Ep = field_energy(field, cls) if field is not None else 0.0
    return Ek, Ep, Ek + Ep


def potential_energy(particles: ParticleState, potential: Callable, t: float = 0.0) -> float:
    """sum w phi(x) for an external analytic potential."""
    return float(np.sum(particles.w * potential(t, particles.x)))


def adiabatic(particles: ParticleState, magnetic: MagneticProfile, t: float = 0.0) -> float:
    """mu = sum w e_perp / b(x_perp)."""
    if particles.n == 0:
        return 0.0
    return float(np.sum(particles.w * particles.e_perp / magnetic.b(t, particles.x)))


def relative_variation(series: Sequence[float]) -> np.ndarray:
    """(q(t_i) - q(t_0)) / q(t_0)."""
    q = np.asarray(series, dtype=float)
    if q.size == 0:
        return q
    if q[0] == 0.0:
        raise ZeroBaseline("relative variation against a zero initial value")
    return (q - q[0]) / q[0]


class EnergyMonitor:
    """Accumulates diagnostics records and writes them as CSV."""

    def __init__(self, magnetic: MagneticProfile, cls: Optional[GridClassification] = None,
                 potential: Optional[Callable] = None, reconstruct: bool = False):
        self.magnetic = magnetic
        self.reconstruct = reconstruct
        self.cls = cls
        self.potential = potential
        self.records: List[DiagnosticsRecord] = []

    def record(self, t: float, particles: ParticleState, field: Optional[FieldState],
               charge_lost: float = 0.0) -> DiagnosticsRecord:
        Ek = kinetic_energy(particles)
        if self.potential is not None:
            Ep = potential_energy(particles, self.potential, t)
        else:
            Ep = field_energy(field, self.cls) if field is not None else 0.0
        rec = DiagnosticsRecord(
            t=float(t), Ek_aug=Ek, Ek_raw=kinetic_energy_raw(particles, self.reconstruct),
            Ep=Ep, Et=Ek + Ep,
            mu=adiabatic(particles, self.magnetic, t), charge_lost=float(charge_lost),
        )
        self.records.append(rec)
        logger.debug(f"t={t:.4g} Ek={rec.Ek_aug:.6e} Ep={rec.Ep:.6e} mu={rec.mu:.6e}")
        return rec

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def variations(self) -> Dict[str, Optional[np.ndarray]]:
        """Relative variations of Ek, Ep, Et and mu; None for a zero baseline."""
        out = {}
        for name in ("Ek_aug", "Ep", "Et", "mu"):
            try:
                out[name] = relative_variation(self.column(name))
            except ZeroBaseline:
                out[name] = None
        return out

    def max_variation(self, name: str) -> Optional[float]:
        series = self.variations().get(name)
        if series is None or series.size == 0:
            return None
        return float(np.max(np.abs(series)))


def write_diagnostics_csv(path: str, records: Sequence[DiagnosticsRecord]):
    assert tuple(f.name for f in fields(DiagnosticsRecord)) == CSV_COLUMNS
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                writer.writerow(["%.17g" % value for value in astuple(rec)])
    except OSError as e:
        raise OutputError(path, e) from e


def read_diagnostics_csv(path: str) -> List[DiagnosticsRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [DiagnosticsRecord(**{k: float(v) for k, v in row.items()}) for row in reader]
