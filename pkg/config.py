#!/usr/bin/env python3
"""
Configuration module for magpic runs.
Holds the config sections, per-case defaults, the `key = value` file format
and the validation every entry point goes through.
"""

import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

from exceptions import ConfigError

logger = logging.getLogger(__name__)

__version__ = "1.0.0"

CASES = ("single-particle", "diocotron", "dshape")
DOMAINS = ("disk", "dshape")
PROFILES = ("uniform", "single_particle", "dshape")
SCHEMES = ("SI1", "SI2", "SI3", "LIMIT1", "LIMIT2", "LIMIT3", "RK4REF")
STAGE_TIMES = ("printed", "uniform")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class RunConfig:
    """Run-level settings."""
    # Test case: single-particle, diocotron or dshape
    case: str = "single-particle"
    # Time integrator
    scheme: str = "SI3"
    # Stiffness parameter; the external field is b(x)/eps
    eps: float = 0.1
    # Time step
    dt: float = 0.1
    # Final time
    t_final: float = 10.0
    # Number of macro-particles
    n_particles: int = 1
    # Seed of the particle sampler
    seed: int = 0
    # Worker threads for deposition, mode solves and study rows
    threads: int = 1
    # Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    log_level: str = "INFO"


@dataclass
class GridConfig:
    """Cartesian grid and Poisson solver settings."""
    nx: int = 64
    ny: int = 64
    nz: int = 8
    # Cells of padding between the domain and the grid edge
    margin_cells: int = 2
    # B-spline order of the particle shape (1, 2 or 3)
    shape_order: int = 1
    # Relative residual of the per-mode Krylov solves
    solver_rtol: float = 1e-10


@dataclass
class CaseParams:
    """Geometry, magnetic profile and initial data."""
    domain: str = "disk"
    disk_radius: float = 9.0
    center_x: float = 0.0
    center_y: float = 0.0
    # Scale of the D-shaped cross-section
    r0_dshape: float = 10.0
    # Length of the periodic direction
    lz: float = 1.0
    # Annulus of the diocotron density
    r1: float = 6.0
    r2: float = 7.0
    # Peak density
    n0: float = 4000.0
    # Perturbation amplitude
    alpha: float = 0.001
    # Axial perturbation mode number, cos(2 pi kz z / lz)
    kz: int = 3
    # Neutralising background subtracted from the density
    rho0: float = 0.0
    # eps0 in -eps0 Lap(phi) = rho; also scales the field energy
    permittivity: float = 1.0
    b_profile: str = "uniform"
    # Intensity of the uniform profile
    b0: float = 1.0
    # Width and centre of the D-shape Gaussians (the second sits at minus the centre)
    gauss_r0: float = 3.0
    gauss_x: float = 1.5
    gauss_y: float = -1.5
    # Single-particle initial data
    particle_x: float = 5.0
    particle_y: float = 0.0
    particle_z: float = 0.0
    particle_vx: float = 4.0
    particle_vy: float = 3.0
    particle_vz: float = 2.0


@dataclass
class SchemeConfig:
    """Integrator options."""
    # Field evaluation times of the last third-order stages: printed or uniform
    si3_stage_times: str = "printed"


@dataclass
class OutputConfig:
    """Output settings."""
    output_dir: str = "./output"
    # Steps between diagnostics records
    diag_interval: int = 1
    # Steps between density snapshots; 0 writes only the final one
    snapshot_interval: int = 0
    # Also write potential snapshots
    write_phi: bool = False


SECTIONS = {
    "run": RunConfig,
    "grid": GridConfig,
    "case": CaseParams,
    "scheme": SchemeConfig,
    "output": OutputConfig,
}

CASE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "single-particle": {
        "run.scheme": "SI3", "run.eps": 0.1, "run.dt": 0.1, "run.t_final": 10.0,
        "run.n_particles": 1,
        "case.domain": "disk", "case.disk_radius": 10.0, "case.b_profile": "single_particle",
    },
    "diocotron": {
        "run.scheme": "SI3", "run.eps": 0.05, "run.dt": 0.1, "run.t_final": 40.0,
        "run.n_particles": 100000,
        "grid.nx": 64, "grid.ny": 64, "grid.nz": 8,
        "case.domain": "disk", "case.disk_radius": 9.0, "case.r1": 6.0, "case.r2": 7.0,
        "case.n0": 4000.0, "case.alpha": 0.001, "case.kz": 3, "case.lz": 1.0,
        "case.b_profile": "uniform", "case.b0": 1.0, "case.rho0": 0.0, "case.permittivity": 200.0,
    },
    "dshape": {
        "run.scheme": "SI3", "run.eps": 0.01, "run.dt": 0.5, "run.t_final": 20.0,
        "run.n_particles": 100000,
        "grid.nx": 64, "grid.ny": 96, "grid.nz": 8,
        "case.domain": "dshape", "case.r0_dshape": 10.0, "case.lz": 1.0,
        "case.n0": 5000.0, "case.alpha": 0.001, "case.kz": 1,
        "case.gauss_r0": 3.0, "case.gauss_x": 1.5, "case.gauss_y": -1.5,
        "case.b_profile": "dshape", "case.rho0": 0.0, "case.permittivity": 10.0,
    },
}


def _coerce(key: str, kind: type, value: Any) -> Any:
    """Convert a raw value to the annotated field type."""
    if isinstance(value, kind) and not (kind is int and isinstance(value, bool)):
        return value
    text = str(value).strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if kind is int:
            try:
                return int(text)
            except ValueError:
                as_float = float(text)
                if not as_float.is_integer():
                    raise
                return int(as_float)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(key, f"expected {kind.__name__}, got '{text}'") from None


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse `[section]` / `key = value` text into dotted keys."""
    values: Dict[str, str] = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(section, f"unknown section ({source}:{number})")
            continue
        if "=" not in line:
            raise ConfigError(line, f"expected 'key = value' ({source}:{number})")
        if section is None:
            raise ConfigError(line, f"key outside any section ({source}:{number})")
        key, value = (part.strip() for part in line.split("=", 1))
        values[f"{section}.{key}"] = value
    return values


def parse_overrides(overrides: Iterable[str]) -> Dict[str, str]:
    """`section.key=value` strings from --set."""
    values: Dict[str, str] = {}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        values[key] = value
    return values


class CaseConfig:
    """Main configuration class.

    Precedence: built-in defaults < case defaults < config file < overrides.
    """

    def __init__(self, case: Optional[str] = None, config_file: Optional[str] = None,
                 overrides: Optional[Iterable[str]] = None):
        self.run = RunConfig()
        self.grid = GridConfig()
        self.case = CaseParams()
        self.scheme = SchemeConfig()
        self.output = OutputConfig()

        file_values = self._read_file(config_file) if config_file else {}
        override_values = parse_overrides(overrides)
        chosen = override_values.get("run.case") or file_values.get("run.case") or case
        if chosen is not None:
            self.set("run", "case", chosen)
            self.apply_case_defaults(self.run.case)
        self.update(file_values)
        self.update(override_values)
        self.validate()

    @classmethod
    def from_text(cls, text: str) -> "CaseConfig":
        values = parse_config_text(text)
        cfg = cls(case=values.get("run.case"))
        cfg.update(values)
        cfg.validate()
        return cfg

    @staticmethod
    def _read_file(config_file: str) -> Dict[str, str]:
        try:
            with open(config_file, "r") as f:
                return parse_config_text(f.read(), config_file)
        except FileNotFoundError:
            raise ConfigError("--config", f"file {config_file} not found") from None

    def apply_case_defaults(self, case: str):
        if case not in CASE_DEFAULTS:
            raise ConfigError("run.case", f"unknown case '{case}', expected one of {', '.join(CASES)}")
        self.update(CASE_DEFAULTS[case])

    def update(self, values: Dict[str, Any]):
        for dotted, value in values.items():
            self.set_dotted(dotted, value)

    def set_dotted(self, dotted: str, value: Any):
        if "." not in dotted:
            raise ConfigError(dotted, "expected section.key")
        section, key = dotted.split(".", 1)
        self.set(section, key, value)

    def _section(self, section: str):
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
        return getattr(self, section)

    def get(self, section: str, key: str, default: Any = None) -> Any:
        """Get a configuration value."""
        obj = self._section(section)
        return getattr(obj, key, default)

    def set(self, section: str, key: str, value: Any):
        """Set a configuration value, coerced to the field type."""
        obj = self._section(section)
        types = {f.name: f.type for f in fields(obj)}
        if key not in types:
            raise ConfigError(f"{section}.{key}", "unknown key")
        setattr(obj, key, _coerce(f"{section}.{key}", types[key], value))

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: dict(vars(getattr(self, name))) for name in SECTIONS}

    def __eq__(self, other) -> bool:
        return isinstance(other, CaseConfig) and self.to_dict() == other.to_dict()

    def dumps(self) -> str:
        """Config text that parses back to an equal configuration."""
        lines: List[str] = []
        for name in SECTIONS:
            if lines:
                lines.append("")
            lines.append(f"[{name}]")
            for key, value in vars(getattr(self, name)).items():
                lines.append(f"{key} = {_format(value)}")
        return "\n".join(lines) + "\n"

    def save_to_file(self, config_file: str):
        Path(os.path.dirname(config_file) or ".").mkdir(parents=True, exist_ok=True)
        with open(config_file, "w") as f:
            f.write(self.dumps())

    def validate(self):
        """Raise ConfigError naming the first invalid key."""
        r, g, c, s, o = self.run, self.grid, self.case, self.scheme, self.output
        checks: List[Tuple[str, bool, str]] = [
            ("run.case", r.case in CASES, f"expected one of {', '.join(CASES)}"),
            ("run.scheme", r.scheme.upper() in SCHEMES, f"expected one of {', '.join(SCHEMES)}"),
            ("run.eps", r.eps > 0, "must be > 0"),
            ("run.dt", r.dt > 0, "must be > 0"),
            ("run.t_final", r.t_final > 0, "must be > 0"),
            ("run.n_particles", r.n_particles >= 1, "must be >= 1"),
            ("run.seed", 0 <= r.seed < 2 ** 64, "must fit in an unsigned 64-bit integer"),
            ("run.threads", r.threads >= 1, "must be >= 1"),
            ("run.log_level", r.log_level.upper() in LOG_LEVELS, f"expected one of {', '.join(LOG_LEVELS)}"),
            ("grid.margin_cells", g.margin_cells >= 1, "must be >= 1"),
            ("grid.nx", g.nx >= 2 * g.margin_cells + 3, "too small for the margin"),
            ("grid.ny", g.ny >= 2 * g.margin_cells + 3, "too small for the margin"),
            ("grid.nz", g.nz >= 1, "must be >= 1"),
            ("grid.shape_order", g.shape_order in (1, 2, 3), "must be 1, 2 or 3"),
            ("grid.solver_rtol", 0 < g.solver_rtol < 1, "must lie in (0, 1)"),
            ("case.domain", c.domain in DOMAINS, f"expected one of {', '.join(DOMAINS)}"),
            ("case.disk_radius", c.disk_radius > 0, "must be > 0"),
            ("case.r0_dshape", c.r0_dshape > 0, "must be > 0"),
            ("case.lz", c.lz > 0, "must be > 0"),
            ("case.r2", 0 <= c.r1 < c.r2, "annulus needs 0 <= r1 < r2"),
            ("case.n0", c.n0 > 0, "must be > 0"),
            ("case.permittivity", c.permittivity > 0, "must be > 0"),
            ("case.alpha", abs(c.alpha) < 1, "must satisfy |alpha| < 1"),
            ("case.b_profile", c.b_profile in PROFILES, f"expected one of {', '.join(PROFILES)}"),
            ("case.b0", c.b0 > 0, "must be > 0"),
            ("case.gauss_r0", c.gauss_r0 > 0, "must be > 0"),
            ("scheme.si3_stage_times", s.si3_stage_times in STAGE_TIMES,
             f"expected one of {', '.join(STAGE_TIMES)}"),
            ("output.diag_interval", o.diag_interval >= 1, "must be >= 1"),
            ("output.snapshot_interval", o.snapshot_interval >= 0, "must be >= 0"),
        ]
        for key, ok, message in checks:
            if not ok:
                raise ConfigError(key, f"{message} (got {self.get(*key.split('.'))!r})")
        self.run.scheme = self.run.scheme.upper()
        self.run.log_level = self.run.log_level.upper()


def help_table() -> str:
    """Every config key with its type and built-in default."""
    rows = []
    for name, cls in SECTIONS.items():
        for f in fields(cls):
            rows.append(f"  {name}.{f.name:<20} {f.type.__name__:<6} {_format(f.default)}")
    cases = ", ".join(CASE_DEFAULTS)
    return "config keys (section.key  type  default):\n" + "\n".join(rows) + \
        f"\n\ncase defaults ({cases}) override the built-in values; see docs/config.md"
