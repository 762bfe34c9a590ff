#!/usr/bin/env python3
"""
Error types raised by the magpic modules.
Library code raises these; only the CLI turns them into exit codes.
"""

from typing import Optional


class MagpicError(Exception):
    """Base class for every error raised by magpic."""


class ConfigError(MagpicError):
    """A configuration key is unknown or holds an invalid value."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class NoIntersection(MagpicError):
    """The boundary search from a ghost node failed to bracket the boundary."""


class NoInteriorNode(MagpicError):
    """No interior node lies close enough to build an interpolation stencil."""


class SingularSystem(MagpicError):
    """The assembled mode operator has an empty or zero row."""


class SolverDiverged(MagpicError):
    """The Krylov iteration for one Fourier mode did not reach its tolerance."""

    def __init__(self, mode: int, residual: float, iterations: int):
        self.mode = mode
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"mode k={mode} stopped at relative residual {residual:.3e} "
            f"after {iterations} iterations"
        )


class StatePoisoned(MagpicError):
    """A time step produced non-finite particle data."""

    def __init__(self, scheme: str, stage: int):
        self.scheme = scheme
        self.stage = stage
        super().__init__(f"{scheme}: non-finite state after stage {stage}")


class ZeroBaseline(MagpicError):
    """A relative variation was requested against a zero initial value."""


class RejectionStall(MagpicError):
    """Rejection sampling accepts too few proposals to be useful."""

    def __init__(self, case: str, rate: float):
        self.case = case
        self.rate = rate
        super().__init__(f"{case}: acceptance rate {rate:.2e} below 1e-4")


class OutputError(MagpicError):
    """Writing an output file failed."""

    def __init__(self, path: str, cause: Optional[BaseException] = None):
        self.path = path
        detail = f": {cause}" if cause else ""
        super().__init__(f"cannot write {path}{detail}")


class SimulationAborted(MagpicError):
    """A run stopped on an error; carries the step at which it happened."""

    def __init__(self, step: int, time: float, cause: BaseException):
        self.step = step
        self.time = time
        self.cause = cause
        super().__init__(f"aborted at step {step} (t={time:.6g}): {cause}")
