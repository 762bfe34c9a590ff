#!/usr/bin/env python3
"""
Report builder for run outputs and verification summaries.
Writes diagnostics, grid snapshots, trajectories and the run.meta echo of
the resolved configuration, and renders study tables as markdown and HTML.
"""

import csv
import logging
import os
import subprocess
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Dict, List, Sequence

import markdown
import numpy as np
from jinja2 import Template

from config import CaseConfig, __version__
from diagnostics.energy_monitor import write_diagnostics_csv
from exceptions import OutputError
from main import RunResult
from poisson.field_solver import write_grid_snapshot
from verify.studies import StudyTable

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("t", "x", "y", "z", "vx", "vy", "vz", "eperp")

META_TEMPLATE = Template(
    "# magpic {{ version }}\n"
    "# case {{ case }}: {{ steps }} steps, {{ particles }} particles, {{ removed }} removed"
    "{% if interrupted %} (interrupted){% endif %}\n"
    "{{ config_text }}"
)

VERIFICATION_TEMPLATE = Template("""# magpic verification report

Generated {{ created_at }} by magpic {{ version }}.
{{ passed }} of {{ tables|length }} studies passed.
{% for table in tables %}
## {{ table.name }}

| {{ table.param_name }} | error | slope |
|---|---|---|
{% for row in table.rows %}| {{ row.param }} | {{ row.error }} | {{ row.slope }} |
{% endfor %}
**{{ table.summary }}**
{% endfor %}
""")

HTML_TEMPLATE = Template("""<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>{{ title }}</title></head>
<body>
{{ body }}
</body>
</html>
""")


def version_string() -> str:
    """Package version, suffixed with the short commit when run from a checkout."""
    try:
        sha = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             cwd=os.path.dirname(os.path.abspath(__file__)),
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return __version__
    if sha.returncode != 0 or not sha.stdout.strip():
        return __version__
    return f"{__version__}-g{sha.stdout.strip()}"


def render_meta(result: RunResult) -> str:
    return META_TEMPLATE.render(
        version=version_string(), case=result.config.run.case, steps=result.steps,
        particles=result.particles.n, removed=result.removed,
        interrupted=result.interrupted, config_text=result.config.dumps(),
    )


def read_meta(path: str) -> CaseConfig:
    """Configuration echoed in a run.meta file."""
    with open(path) as f:
        return CaseConfig.from_text(f.read())


def write_trajectory_csv(path: str, rows: np.ndarray):
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRAJECTORY_COLUMNS)
            for row in rows:
                writer.writerow(["%.17g" % value for value in row])
    except OSError as e:
        raise OutputError(path, e) from e


def _write_text(path: str, text: str):
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(path, e) from e


@dataclass
class Report:
    """A rendered verification report."""
    title: str
    markdown: str
    html: str
    created_at: datetime
    passed: bool


class ReportBuilder:
    """Writes run outputs and verification reports under one directory."""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def write_outputs(self, result: RunResult) -> List[str]:
        """Every file of a finished run; returns the paths written."""
        config = result.config
        written = []

        path = self._path("diagnostics.csv")
        write_diagnostics_csv(path, result.records)
        written.append(path)

        if result.trajectory is not None:
            path = self._path("trajectory.csv")
            write_trajectory_csv(path, result.trajectory)
            written.append(path)

        grid = result.classification.grid if result.classification is not None else None
        for snap in result.snapshots:
            path = self._path(f"rho_{snap.step:06d}.dat")
            write_grid_snapshot(path, snap.rho, grid)
            written.append(path)
            path = self._path(f"rho_avg_{snap.step:06d}.dat")
            write_grid_snapshot(path, snap.rho, grid, z_average=True)
            written.append(path)
            if config.output.write_phi:
                path = self._path(f"phi_{snap.step:06d}.dat")
                write_grid_snapshot(path, snap.phi, grid)
                written.append(path)

        path = self._path("run.meta")
        _write_text(path, render_meta(result))
        written.append(path)
        logger.info(f"Wrote {len(written)} files to {self.output_dir}")
        return written

    def _prepare_template_data(self, tables: Sequence[StudyTable]) -> Dict[str, Any]:
        prepared = []
        for table in tables:
            rows = [{"param": f"{row.param:.4g}", "error": f"{row.error:.3e}",
                     "slope": "" if local is None else f"{local:.3f}"}
                    for row, local in zip(table.rows, table.local_slopes())]
            prepared.append({"name": table.name, "param_name": table.param_name,
                             "rows": rows, "summary": table.summary()})
        return {
            "tables": prepared,
            "passed": sum(1 for t in tables if t.passed),
            "version": version_string(),
            "created_at": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
        }

    def build_verification_report(self, tables: Sequence[StudyTable]) -> Report:
        data = self._prepare_template_data(tables)
        text = VERIFICATION_TEMPLATE.render(**data)
        body = markdown.markdown(text, extensions=['tables', 'fenced_code'])
        title = "magpic verification report"
        return Report(title=title, markdown=text, html=HTML_TEMPLATE.render(title=title, body=body),
                      created_at=datetime.now(), passed=all(t.passed for t in tables))

    def write_verification_report(self, tables: Sequence[StudyTable], name: str = "verification") -> Report:
        report = self.build_verification_report(tables)
        _write_text(self._path(f"{name}.md"), report.markdown)
        _write_text(self._path(f"{name}.html"), report.html)
        logger.info(f"Verification report: {sum(t.passed for t in tables)}/{len(tables)} passed")
        return report


def write_outputs(result: RunResult, output_dir: str = None) -> List[str]:
    return ReportBuilder(output_dir or result.config.output.output_dir).write_outputs(result)
