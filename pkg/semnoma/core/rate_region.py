"""
Boundary of the semantic-versus-bit (SvB) rate region on a static channel.

For each N-user target R_bar the F-user rate is maximised over a p_f × alpha_f
grid subject to the N-user rate constraint. Sweeping R_bar from 0 to the
interference-free rate traces the boundary.
"""

import logging
from enum import Enum
from typing import List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from semnoma.core.errors import InfeasibleError
from semnoma.core.link_model import (
    FadingState,
    SystemParams,
    bitcom_rate,
    interference_free_rate,
    n_user_bit_rate,
    semcom_rate,
)

logger = logging.getLogger(__name__)

REGION_COLUMNS = ["r_bar", "s", "p_f", "alpha_f", "objective"]


class RegionObjective(str, Enum):
    SEMCOM = "semcom"
    BITCOM_EQUIVALENT = "bitcom_equivalent"


class RegionSpec(BaseModel):
    """Power budget and search discretisation of one boundary sweep."""

    model_config = ConfigDict(frozen=True)

    p_f_max: float = Field(..., gt=0.0, description="F-user power budget (W)")
    p_grid: int = Field(401, ge=2, description="Grid points on [0, p_f_max]")
    alpha_grid: int = Field(401, ge=2, description="Grid points on [0, 1]")
    r_sweep: int = Field(41, ge=2, description="Number of R_bar samples")
    objective: RegionObjective = RegionObjective.SEMCOM


class RegionPoint(BaseModel):
    """One boundary sample and the (p_f, alpha_f) achieving it."""

    model_config = ConfigDict(frozen=True)

    s: float = Field(..., ge=0.0)
    r_bar: float = Field(..., ge=0.0)
    p_f: float = Field(..., ge=0.0)
    alpha_f: float = Field(..., ge=0.0, le=1.0)


class _RegionGrid:
    """Objective and N-user rate tabulated on the p_f × alpha_f grid."""

    def __init__(self, spec: RegionSpec, st: FadingState, params: SystemParams):
        self.p = np.linspace(0.0, spec.p_f_max, spec.p_grid)
        self.alpha = np.linspace(0.0, 1.0, spec.alpha_grid)
        if spec.objective is RegionObjective.SEMCOM:
            per_unit = semcom_rate(self.p, st, params)
        else:
            per_unit = bitcom_rate(self.p, st, params)
        # rows: p_f, columns: alpha_f (argmax order gives the tie-break)
        self.objective = per_unit[:, None] * self.alpha[None, :]
        self.rate = n_user_bit_rate(self.alpha[None, :], self.p[:, None], st, params)
        self.ceiling = float(interference_free_rate(st, params))

    def best(self, r_bar: float) -> RegionPoint:
        slack = 1e-12 * max(1.0, r_bar)
        feasible = self.rate >= r_bar - slack
        masked = np.where(feasible, self.objective, -np.inf)
        i, j = np.unravel_index(np.argmax(masked), masked.shape)
        s = float(masked[i, j])
        if s <= 0.0:
            return RegionPoint(s=0.0, r_bar=r_bar, p_f=0.0, alpha_f=0.0)
        return RegionPoint(s=s, r_bar=r_bar, p_f=float(self.p[i]), alpha_f=float(self.alpha[j]))


def _check_target(r_bar: float, ceiling: float) -> None:
    if r_bar < 0.0 or r_bar > ceiling * (1.0 + 1e-12):
        raise InfeasibleError(
            "N-user target is outside [0, interference-free rate]",
            details={"r_bar": r_bar, "ceiling": ceiling},
        )


def boundary_point(
    r_bar: float, spec: RegionSpec, st: FadingState, params: SystemParams
) -> RegionPoint:
    """
    Best F-user rate on the grid for a given N-user target.

    Raises:
        InfeasibleError: If r_bar exceeds the interference-free N-user rate.
    """
    grid = _RegionGrid(spec, st, params)
    _check_target(r_bar, grid.ceiling)
    return grid.best(r_bar)


def sweep_boundary(spec: RegionSpec, st: FadingState, params: SystemParams) -> List[RegionPoint]:
    """Boundary samples for R_bar uniformly spaced on [0, interference-free rate]."""
    grid = _RegionGrid(spec, st, params)
    targets = np.linspace(0.0, grid.ceiling, spec.r_sweep)
    logger.info(
        f"Sweeping {spec.objective.value} boundary: P_f^max={spec.p_f_max} W, "
        f"{spec.r_sweep} targets up to {grid.ceiling:.4f} bits/s/Hz"
    )
    return [grid.best(float(r)) for r in targets]


def region_frame(points: Sequence[RegionPoint], objective: RegionObjective) -> pd.DataFrame:
    """Boundary samples as a table with the documented CSV columns."""
    rows = [
        {"r_bar": pt.r_bar, "s": pt.s, "p_f": pt.p_f, "alpha_f": pt.alpha_f, "objective": objective.value}
        for pt in points
    ]
    return pd.DataFrame(rows, columns=REGION_COLUMNS)
