#!/usr/bin/env python3
"""
CLI interface for magpic.
Runs the test cases and the verification studies from the command line.

Exit codes: 0 success, 1 failed study or aborted run, 2 configuration error.
"""

import argparse
import asyncio
import logging
import os
import sys
from functools import partial
from typing import List, Optional

from config import CASES, CaseConfig, __version__, help_table
from exceptions import ConfigError, MagpicError, SimulationAborted
from main import PlasmaSimulation, setup_logging
from reports.report_builder import ReportBuilder
from verify.studies import (
    DEFAULT_EPS,
    POISSON_MIN_SLOPE,
    batch_studies,
    convergence_study,
    dshape_residuals,
    epsilon_consistency_study,
    poisson_convergence_study,
    quadratic_exactness,
    vperp_scaling_study,
    write_study_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

# max error of the quadratic disk solution and max D-shape mode residual
QUADRATIC_TOLERANCE = 1e-8
DSHAPE_RESIDUAL = 1e-10


class MagpicCLI:
    """Command-line interface for magpic."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.quiet = args.quiet

    def say(self, text: str = ""):
        if not self.quiet:
            print(text)

    def banner(self, title: str):
        self.say("=" * 60)
        self.say(title)
        self.say("=" * 60)

    def build_config(self, case: Optional[str]) -> CaseConfig:
        """Case defaults < --config file < --set overrides < global flags."""
        overrides = list(self.args.set or [])
        if self.args.seed is not None:
            overrides.append(f"run.seed={self.args.seed}")
        if self.args.threads is not None:
            overrides.append(f"run.threads={self.args.threads}")
        if self.args.out is not None:
            overrides.append(f"output.output_dir={self.args.out}")
        if self.quiet:
            overrides.append("run.log_level=WARNING")
        config = CaseConfig(case=case, config_file=self.args.config, overrides=overrides)
        setup_logging(config.run.log_level)
        return config

    def run_case(self, case: str) -> int:
        config = self.build_config(case)
        self.banner(f"magpic {__version__} - {case}")
        simulation = PlasmaSimulation(config)
        previous = simulation.install_signal_handlers()
        try:
            result = simulation.run()
        except SimulationAborted as e:
            logger.error(f"Run aborted: {e}")
            return EXIT_FAILED
        finally:
            simulation.restore_signal_handlers(previous)
        paths = ReportBuilder(config.output.output_dir).write_outputs(result)

        last = result.records[-1]
        self.say(f"\nSteps: {result.steps}   particles: {result.particles.n}   removed: {result.removed}")
        self.say(f"Final t={last.t:.6g}  Ek={last.Ek_aug:.8e}  Ep={last.Ep:.8e}  mu={last.mu:.8e}")
        if result.trajectory is not None:
            x = result.trajectory[-1]
            self.say(f"Final position ({x[1]:.6f}, {x[2]:.6f}, {x[3]:.6f})")
        self.say(f"\nWrote {len(paths)} files to {config.output.output_dir}")
        return EXIT_OK

    def _finish_studies(self, config: CaseConfig, tables, stem: str) -> int:
        out = config.output.output_dir
        for table in tables:
            write_study_csv(os.path.join(out, f"{_slug(table.name)}.csv"), table)
            self.say(f"\n{table.name}")
            self.say(f"  {table.param_name:>12} {'error':>14} {'slope':>8}")
            for row, local in zip(table.rows, table.local_slopes()):
                slope = "" if local is None else f"{local:8.3f}"
                self.say(f"  {row.param:12.4g} {row.error:14.6e} {slope}")
            self.say(f"  {table.summary()}")
        report = ReportBuilder(out).write_verification_report(tables, stem)
        return EXIT_OK if report.passed else EXIT_FAILED

    def run_convergence(self) -> int:
        config = self.build_config(None)
        self.banner("magpic - time-step convergence")
        dts = self.args.dt or None
        studies = [partial(convergence_study, scheme, self.args.eps, dts, self.args.t_final,
                           self.args.profile, config.scheme.si3_stage_times)
                   for scheme in self.args.scheme]
        tables = asyncio.run(batch_studies(studies, config.run.threads))
        return self._finish_studies(config, tables, "convergence")

    def run_consistency(self) -> int:
        config = self.build_config(None)
        self.banner("magpic - eps-consistency with the limit schemes")
        eps_list = self.args.eps or list(DEFAULT_EPS)
        studies = [partial(epsilon_consistency_study, order, self.args.dt, eps_list,
                           self.args.t_final, self.args.profile, config.scheme.si3_stage_times)
                   for order in self.args.order]
        if not self.args.no_vperp:
            studies.append(partial(vperp_scaling_study, max(self.args.order), self.args.dt,
                                   profile=self.args.profile,
                                   stage_times=config.scheme.si3_stage_times))
        tables = asyncio.run(batch_studies(studies, config.run.threads))
        return self._finish_studies(config, tables, "consistency")

    def run_poisson_test(self) -> int:
        config = self.build_config(None)
        self.banner("magpic - Poisson solver checks")
        g, threads = config.grid, config.run.threads
        sizes = [g.nx, 2 * g.nx, 4 * g.nx]
        table = poisson_convergence_study(sizes, nz=max(g.nz, 4), rtol=g.solver_rtol, threads=threads)
        quadratic = quadratic_exactness(g.nx, rtol=g.solver_rtol, threads=threads)
        residuals = dshape_residuals(g.nx, g.ny, max(g.nz, 4), rtol=min(g.solver_rtol, 1e-11),
                                     threads=threads)
        worst = max(residuals.values())

        status = self._finish_studies(config, [table], "poisson")
        self.say(f"\nQuadratic solution max error: {quadratic:.3e} (limit {QUADRATIC_TOLERANCE:g})")
        self.say(f"D-shape worst mode residual: {worst:.3e} (limit {DSHAPE_RESIDUAL:g})")
        if table.slope < POISSON_MIN_SLOPE or quadratic > QUADRATIC_TOLERANCE or worst > DSHAPE_RESIDUAL:
            return EXIT_FAILED
        return status


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in text).strip("_")


def _global_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Sampler seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, help="Worker threads")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    common.add_argument("--config", help="Config file with [section] / key = value lines")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="Override one config key (repeatable)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(
        prog="magpic",
        description="Semi-implicit particle-in-cell solver for strongly magnetized plasmas",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python cli.py single-particle --set run.scheme=SI3 --set run.eps=1e-4
  python cli.py diocotron --set run.n_particles=20000 --out ./diocotron
  python cli.py convergence --scheme SI1 SI2 SI3
  python cli.py eps-consistency --order 1 2
  python cli.py poisson-test --set grid.nx=32

""" + help_table(),
    )
    parser.add_argument("--version", action="version", version=f"magpic {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    for case in CASES:
        subparsers.add_parser(case, parents=[common], help=f"Run the {case} case",
                              formatter_class=argparse.RawDescriptionHelpFormatter,
                              epilog=help_table())

    conv = subparsers.add_parser("convergence", parents=[common], help="Time-step convergence study")
    conv.add_argument("--scheme", nargs="+", default=["SI1", "SI2", "SI3"], type=str.upper,
                      choices=["SI1", "SI2", "SI3", "LIMIT1", "LIMIT2", "LIMIT3"])
    conv.add_argument("--eps", type=float, help="Stiffness (default 1, or 1e-3 for limit schemes)")
    conv.add_argument("--dt", type=float, nargs="+", help="Geometric list of time steps (default depends on the scheme)")
    conv.add_argument("--t-final", type=float, default=1.0)
    conv.add_argument("--profile", default="single_particle", choices=["single_particle", "dshape"])

    cons = subparsers.add_parser("eps-consistency", parents=[common],
                                 help="eps-consistency between the stiff and limit schemes")
    cons.add_argument("--order", type=int, nargs="+", default=[1, 2, 3], choices=[1, 2, 3])
    cons.add_argument("--dt", type=float, default=0.1)
    cons.add_argument("--eps", type=float, nargs="+", help="Geometric list of eps values")
    cons.add_argument("--t-final", type=float, default=1.0)
    cons.add_argument("--profile", default="dshape", choices=["single_particle", "dshape"])
    cons.add_argument("--no-vperp", action="store_true", help="Skip the v_perp damping study")

    subparsers.add_parser("poisson-test", parents=[common],
                          help="Manufactured-solution and D-shape Poisson checks")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_OK
    setup_logging("WARNING" if args.quiet else "INFO")

    cli = MagpicCLI(args)
    try:
        if args.command in CASES:
            return cli.run_case(args.command)
        if args.command == "convergence":
            return cli.run_convergence()
        if args.command == "eps-consistency":
            return cli.run_consistency()
        if args.command == "poisson-test":
            return cli.run_poisson_test()
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (MagpicError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILED
    parser.print_help()
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
