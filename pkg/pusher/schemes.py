#!/usr/bin/env python3
"""
Time-integration scheme registry and coefficient tables.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple


class SchemeKind(str, Enum):
    SI1 = "SI1"
    SI2 = "SI2"
    SI3 = "SI3"
    LIMIT1 = "LIMIT1"
    LIMIT2 = "LIMIT2"
    LIMIT3 = "LIMIT3"
    RK4REF = "RK4REF"

    @classmethod
    def parse(cls, value) -> "SchemeKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown scheme '{value}', expected one of "
                             f"{', '.join(k.value for k in cls)}") from None


# smallest root of g^2 - 2g + 1/2
SDIRK_GAMMA = 1.0 - 1.0 / math.sqrt(2.0)

SI3_ALPHA = 0.24169426078821
SI3_BETA = SI3_ALPHA / 4.0
SI3_ETA = 0.12915286960590
SI3_GAMMA = 0.5 - SI3_ALPHA - SI3_BETA - SI3_ETA


@dataclass(frozen=True)
class SchemeInfo:
    """Registry entry for one integrator."""
    kind: SchemeKind
    order: int
    family: str
    description: str
    coefficients: Dict[str, float] = field(default_factory=dict)

    @property
    def is_limit(self) -> bool:
        return self.family == "limit"


def _register() -> Dict[SchemeKind, SchemeInfo]:
    sdirk = {"gamma": SDIRK_GAMMA}
    four_stage = {"alpha": SI3_ALPHA, "beta": SI3_BETA, "eta": SI3_ETA, "gamma": SI3_GAMMA}
    entries: List[SchemeInfo] = [
        SchemeInfo(SchemeKind.SI1, 1, "semi-implicit",
                   "backward Euler on the rotation, forward Euler on the rest"),
        SchemeInfo(SchemeKind.SI2, 2, "semi-implicit",
                   "L-stable two-stage SDIRK with an explicit predictor", sdirk),
        SchemeInfo(SchemeKind.SI3, 3, "semi-implicit",
                   "four-stage third-order IMEX Runge-Kutta", four_stage),
        SchemeInfo(SchemeKind.LIMIT1, 1, "limit", "first-order drift-kinetic limit"),
        SchemeInfo(SchemeKind.LIMIT2, 2, "limit", "second-order drift-kinetic limit", sdirk),
        SchemeInfo(SchemeKind.LIMIT3, 3, "limit", "third-order drift-kinetic limit", four_stage),
        SchemeInfo(SchemeKind.RK4REF, 4, "reference",
                   "explicit classical Runge-Kutta on the original characteristics"),
    ]
    return {entry.kind: entry for entry in entries}


SCHEMES: Dict[SchemeKind, SchemeInfo] = _register()


def scheme_info(kind) -> SchemeInfo:
    return SCHEMES[SchemeKind.parse(kind)]


def matching_pair(order: int) -> Tuple[SchemeKind, SchemeKind]:
    """Semi-implicit scheme and its limit scheme of the same order."""
    return SchemeKind(f"SI{order}"), SchemeKind(f"LIMIT{order}")


# field evaluation times (fractions of dt) for the last two SI3 stages:
# (H at stage 3, b at stage 3, H at stage 4, b at stage 4)
SI3_STAGE_TIMES = {
    "printed": (1.0, 1.0, 0.5, 1.0),
    "uniform": (1.0, 1.0, 0.5, 0.5),
}
