"""
Baselines, resource-management variants, policy evaluation, the
brute-force optimum certifier and the figure sweeps.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from semnoma.core.errors import ArgumentError, InfeasibleError, SemNomaError
from semnoma.core.link_model import (
    FadingState,
    FadingStates,
    ModePolicy,
    Policy,
    PolicyDecision,
    PowerPolicy,
    SystemParams,
    TimePolicy,
    as_states,
    f_user_rates,
    gain_columns,
    n_user_bit_rate,
    policy_rates,
    static_state,
)
from semnoma.core.rate_region import RegionObjective, RegionSpec, sweep_boundary
from semnoma.core.scenario1 import Scenario1Config, Scenario1Solution, solve_s1
from semnoma.core.scenario2 import Scenario2Config, Scenario2Solution, solve_s2, solve_s2_variants

logger = logging.getLogger(__name__)

MAX_ORACLE_STATES = 32
ORACLE_MIP_GAP = 1e-9

FIGURE_COLUMNS = [
    "figure",
    "scheme",
    "p0",
    "r_bar",
    "p_avg",
    "p_peak",
    "ergodic_s",
    "ergodic_r",
    "avg_power",
    "frac_off",
    "frac_bitcom",
    "frac_semcom",
]
REGION_FIGURE_COLUMNS = ["figure", "objective", "p_f_max", "r_bar", "s", "p_f", "alpha_f"]

ScenarioConfig = Union[Scenario1Config, Scenario2Config]
Solution = Union[Scenario1Solution, Scenario2Solution]
ModelT = TypeVar("ModelT", bound=BaseModel)
ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")


class SchemeId(BaseModel):
    """Method restriction plus power and time-share feasible sets."""

    model_config = ConfigDict(frozen=True)

    mode_policy: ModePolicy = ModePolicy.OPPORTUNISTIC
    power_policy: PowerPolicy = PowerPolicy.CONTINUOUS
    time_policy: TimePolicy = TimePolicy.CONTINUOUS

    @property
    def label(self) -> str:
        return f"{self.mode_policy.value}/{self.power_policy.value}/{self.time_policy.value}"

    @classmethod
    def on_off(cls, mode_policy: ModePolicy = ModePolicy.OPPORTUNISTIC) -> "SchemeId":
        return cls(
            mode_policy=mode_policy, power_policy=PowerPolicy.ON_OFF, time_policy=TimePolicy.ON_OFF
        )


class EvalResult(BaseModel):
    """Sample-average metrics of a policy."""

    model_config = ConfigDict(frozen=True)

    ergodic_s: float = Field(..., description="Ergodic F-user semantic rate (suts/s/Hz)")
    ergodic_r: float = Field(..., description="Ergodic N-user rate (bits/s/Hz)")
    avg_power: float = Field(..., ge=0.0, description="Average F-user power E[alpha·p] (W)")
    time_fractions: Dict[str, float] = Field(..., description="off / bitcom / semcom occupancy")

    @field_validator("time_fractions")
    @classmethod
    def check_fractions(cls, v: Dict[str, float]) -> Dict[str, float]:
        if set(v) != {"off", "bitcom", "semcom"}:
            raise ValueError("time_fractions needs exactly off, bitcom and semcom")
        if abs(sum(v.values()) - 1.0) > 1e-9:
            raise ValueError(f"time fractions sum to {sum(v.values())}, expected 1")
        return v


class QuantGrid(BaseModel):
    """Quantisation of the per-state choices searched by the oracle."""

    model_config = ConfigDict(frozen=True)

    power_levels: int = Field(21, ge=2, description="Uniform power levels on [0, p_peak]")
    alpha_levels: int = Field(11, ge=2, description="Uniform time-share levels on [0, 1]")


@dataclass(frozen=True)
class OracleResult:
    best_objective: float
    policy: Optional[Policy]
    dual_bound: float
    feasible: bool


class FigureId(str, Enum):
    FIG2 = "fig2"
    FIG5 = "fig5"
    FIG6 = "fig6"
    FIG7 = "fig7"
    FIG8 = "fig8"
    PAVG = "pavg"
    FIG9 = "fig9"

    @classmethod
    def parse(cls, name: str) -> "FigureId":
        """
        Resolve a figure id or its long name.

        Raises:
            ArgumentError: If the name matches no figure.
        """
        key = name.strip().lower()
        if key in FIGURE_ALIASES:
            return FIGURE_ALIASES[key]
        try:
            return cls(key)
        except ValueError:
            raise ArgumentError(
                f"Unknown figure id: {name}",
                details={"known": [f.value for f in cls] + sorted(FIGURE_ALIASES)},
            )


FIGURE_ALIASES = {
    "region": FigureId.FIG2,
    "s_vs_rbar_s1": FigureId.FIG5,
    "s_vs_p0_s1": FigureId.FIG6,
    "time_fractions": FigureId.FIG7,
    "s_vs_rbar_s2": FigureId.FIG8,
    "s_vs_pavg_s2": FigureId.PAVG,
    "rm_comparison": FigureId.FIG9,
}

RM_VARIANTS = [
    (PowerPolicy.CONTINUOUS, TimePolicy.CONTINUOUS),
    (PowerPolicy.CONTINUOUS, TimePolicy.ON_OFF),
    (PowerPolicy.ON_OFF, TimePolicy.CONTINUOUS),
    (PowerPolicy.ON_OFF, TimePolicy.ON_OFF),
]


def _r_bar_sweep() -> List[float]:
    return [float(r) for r in range(13)]


class FigureConfig(BaseModel):
    """Sweep values of every figure; defaults reproduce the published cases."""

    model_config = ConfigDict(frozen=True)

    fig5_r_bar: List[float] = Field(default_factory=_r_bar_sweep)
    fig5_p0: List[float] = Field(default_factory=lambda: [2.0, 10.0])
    fig6_p0: List[float] = Field(
        default_factory=lambda: [float(p) for p in np.round(np.linspace(0.5, 10.0, 20), 6)]
    )
    fig6_r_bar: List[float] = Field(default_factory=lambda: [4.0, 8.0])
    fig7_cases: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(4.0, 2.0), (4.0, 10.0), (8.0, 2.0), (8.0, 10.0)],
        description="(r_bar, p0) pairs",
    )
    fig8_r_bar: List[float] = Field(default_factory=_r_bar_sweep)
    fig8_budgets: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(1.0, 2.0), (8.0, 10.0)], description="(p_avg, p_peak) pairs"
    )
    pavg_values: List[float] = Field(default_factory=lambda: [float(p) for p in range(1, 11)])
    pavg_peak: float = Field(10.0, gt=0.0)
    pavg_r_bar: List[float] = Field(default_factory=lambda: [4.0, 8.0])
    fig9_r_bar: List[float] = Field(default_factory=_r_bar_sweep)
    fig9_p_avg: float = Field(8.0, gt=0.0)
    fig9_p_peak: float = Field(10.0, gt=0.0)

    @model_validator(mode="after")
    def check_budgets(self) -> "FigureConfig":
        if max(self.pavg_values, default=0.0) > self.pavg_peak or self.fig9_p_avg > self.fig9_p_peak:
            raise ValueError("Average power budgets must not exceed the peak budget")
        return self


def _with(base: ModelT, **update: Any) -> ModelT:
    """Validated copy of a pydantic model with some fields replaced."""
    return type(base).model_validate({**base.model_dump(), **update})


def solve_scheme(
    scheme: SchemeId, states: Sequence[FadingState], cfg: ScenarioConfig, params: SystemParams
) -> Tuple[Solution, EvalResult]:
    """
    Solve one scheme on the given states and evaluate the resulting policy.

    A Scenario1Config runs on-off management without an average power budget
    (on_off/on_off schemes only); a Scenario2Config runs the continuous solver
    with the scheme's restrictions and the average power budget.

    Raises:
        ArgumentError: If the config does not fit the scheme.
        InfeasibleError: If the rate target cannot be met.
    """
    states = as_states(states)
    solution: Solution
    if isinstance(cfg, Scenario1Config):
        if scheme.power_policy is not PowerPolicy.ON_OFF or scheme.time_policy is not TimePolicy.ON_OFF:
            raise ArgumentError(
                "Constant-power management only supports on-off power and time",
                details={"scheme": scheme.label},
            )
        solution = solve_s1(states, cfg, params, scheme.mode_policy)
    elif isinstance(cfg, Scenario2Config):
        solution = solve_s2(
            states, cfg, params, scheme.mode_policy, scheme.power_policy, scheme.time_policy
        )
    else:
        raise ArgumentError(f"Unsupported scenario config: {type(cfg).__name__}")
    return solution, evaluate_policy(solution.policy, states, params)


def solve_schemes(
    schemes: Sequence[SchemeId], states: Sequence[FadingState], cfg: ScenarioConfig, params: SystemParams
) -> List[Tuple[Solution, EvalResult]]:
    """
    Solve several schemes on one configuration.

    Continuous-management schemes share one variant solver, so a scheme and
    the restrictions it contains are searched once.

    Raises:
        ArgumentError: If the config does not fit a scheme.
        InfeasibleError: If the rate target cannot be met.
    """
    states = as_states(states)
    if not isinstance(cfg, Scenario2Config):
        return [solve_scheme(scheme, states, cfg, params) for scheme in schemes]
    variants = [(s.mode_policy, s.power_policy, s.time_policy) for s in schemes]
    solutions = solve_s2_variants(states, cfg, params, variants)
    return [(sol, evaluate_policy(sol.policy, states, params)) for sol in solutions]


def evaluate_policy(
    decisions: Union[Policy, Sequence[PolicyDecision]],
    states: Sequence[FadingState],
    params: SystemParams,
) -> EvalResult:
    """
    Sample-average metrics and method occupancy of a policy.

    Raises:
        ArgumentError: If the number of decisions differs from the number of states.
    """
    policy = decisions if isinstance(decisions, Policy) else Policy.from_decisions(decisions)
    states = as_states(states)
    if len(policy) != len(states):
        raise ArgumentError(
            "One decision per fading state is required",
            details={"decisions": len(policy), "states": len(states)},
        )
    r, s = policy_rates(policy, states, params)
    sem = policy.alpha * (policy.rho == 1)
    bit = policy.alpha * (policy.rho == 0)
    semcom, bitcom = float(np.mean(sem)), float(np.mean(bit))
    return EvalResult(
        ergodic_s=float(np.mean(s)),
        ergodic_r=float(np.mean(r)),
        avg_power=float(np.mean(policy.alpha * policy.p)),
        time_fractions={"off": 1.0 - semcom - bitcom, "bitcom": bitcom, "semcom": semcom},
    )


def _choices(
    cfg: ScenarioConfig, scheme: SchemeId, quant: QuantGrid
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quantised (rho, alpha, p) candidates shared by every state; index 0 is off."""
    modes = {
        ModePolicy.OPPORTUNISTIC: [1, 0],
        ModePolicy.SEMCOM_ONLY: [1],
        ModePolicy.BITCOM_ONLY: [0],
    }[scheme.mode_policy]
    if isinstance(cfg, Scenario1Config):
        powers, alphas = [cfg.p0], [1.0]
    else:
        if scheme.power_policy is PowerPolicy.ON_OFF:
            powers = [cfg.p_peak]
        else:
            powers = list(np.linspace(0.0, cfg.p_peak, quant.power_levels)[1:])
        if scheme.time_policy is TimePolicy.ON_OFF:
            alphas = [1.0]
        else:
            alphas = list(np.linspace(0.0, 1.0, quant.alpha_levels)[1:])
    cands = [(0, 0.0, 0.0)] + [(r, a, p) for r in modes for p in powers for a in alphas]
    rho, alpha, p = (np.array(c, dtype=float) for c in zip(*cands))
    return rho.astype(np.int8), alpha, p


def _dual_bound(
    s: np.ndarray, r: np.ndarray, used: np.ndarray, cfg: ScenarioConfig
) -> float:
    """Smallest Lagrangian bound over a fixed multiplier grid (weak duality on the quantised set)."""
    prices = np.concatenate([[0.0], np.logspace(-3.0, 3.0, 61)])
    if isinstance(cfg, Scenario1Config):
        values = s[None] + prices[:, None, None] * r[None]
        bounds = values.max(axis=2).mean(axis=1) - prices * cfg.r_bar
        return float(np.min(bounds))

    best = np.inf
    deltas = prices[::2]
    for beta in prices[::2]:
        values = s[None] + beta * r[None] - deltas[:, None, None] * used[None]
        bounds = values.max(axis=2).mean(axis=1) - beta * cfg.r_bar + deltas * cfg.p_avg
        best = min(best, float(np.min(bounds)))
    return best


def brute_force_oracle(
    states: Sequence[FadingState],
    quant: QuantGrid,
    cfg: ScenarioConfig,
    params: SystemParams,
    scheme: Optional[SchemeId] = None,
) -> OracleResult:
    """
    Exact optimum of the quantised joint problem, plus a multiplier-grid bound.

    Every state picks one quantised (rho, alpha, p) candidate; the joint choice
    is a 0/1 program with one assignment row per state and the ergodic rate
    (and, for continuous management, average power) rows.

    Raises:
        ArgumentError: If more than MAX_ORACLE_STATES states are given.
    """
    states = as_states(states)
    n = len(states)
    if n > MAX_ORACLE_STATES:
        raise ArgumentError(
            f"Oracle instances are limited to {MAX_ORACLE_STATES} states", details={"states": n}
        )
    if scheme is None:
        scheme = SchemeId.on_off() if isinstance(cfg, Scenario1Config) else SchemeId()

    rho, alpha, p = _choices(cfg, scheme, quant)
    gains = gain_columns(states)
    s = f_user_rates(rho[None, :], alpha[None, :], p[None, :], gains, params)
    r = n_user_bit_rate(alpha[None, :], p[None, :], gains, params)
    used = np.broadcast_to(alpha * p, s.shape)
    c = s.shape[1]

    constraints = [
        LinearConstraint(sparse.kron(sparse.eye(n), np.ones((1, c))), 1.0, 1.0),
        LinearConstraint(r.reshape(1, -1), n * cfg.r_bar - 1e-9 * n * max(1.0, cfg.r_bar), np.inf),
    ]
    if isinstance(cfg, Scenario2Config):
        constraints.append(LinearConstraint(used.reshape(1, -1), -np.inf, n * cfg.p_avg))

    res = milp(
        c=-s.ravel() / n,
        constraints=constraints,
        integrality=np.ones(n * c),
        bounds=Bounds(0.0, 1.0),
        options={"mip_rel_gap": ORACLE_MIP_GAP},
    )
    dual_bound = _dual_bound(s, r, used, cfg)
    if res.status == 2:
        logger.info(f"Oracle: quantised instance with {n} states is infeasible")
        return OracleResult(best_objective=-np.inf, policy=None, dual_bound=dual_bound, feasible=False)
    if not res.success:
        raise SemNomaError("Oracle 0/1 program failed", details={"status": res.status, "message": res.message})

    pick = np.argmax(res.x.reshape(n, c), axis=1)
    policy = Policy(rho=rho[pick], alpha=alpha[pick], p=p[pick])
    best = float(np.mean(s[np.arange(n), pick]))
    logger.debug(f"Oracle: {n} states x {c} candidates, optimum {best:.6g}, dual bound {dual_bound:.6g}")
    return OracleResult(best_objective=best, policy=policy, dual_bound=dual_bound, feasible=True)


Task = Tuple[SchemeId, ScenarioConfig]


def _figure_tasks(
    fig: FigureId, fc: FigureConfig, s1: Scenario1Config, s2: Scenario2Config
) -> List[Task]:
    modes = list(ModePolicy)
    if fig is FigureId.FIG5:
        return [
            (SchemeId.on_off(m), _with(s1, p0=p0, r_bar=r))
            for p0 in fc.fig5_p0
            for m in modes
            for r in fc.fig5_r_bar
        ]
    if fig is FigureId.FIG6:
        return [
            (SchemeId.on_off(m), _with(s1, p0=p0, r_bar=r))
            for r in fc.fig6_r_bar
            for m in modes
            for p0 in fc.fig6_p0
        ]
    if fig is FigureId.FIG7:
        return [(SchemeId.on_off(), _with(s1, p0=p0, r_bar=r)) for r, p0 in fc.fig7_cases]
    if fig is FigureId.FIG8:
        return [
            (SchemeId(mode_policy=m), _with(s2, p_avg=pa, p_peak=pp, r_bar=r))
            for pa, pp in fc.fig8_budgets
            for m in modes
            for r in fc.fig8_r_bar
        ]
    if fig is FigureId.PAVG:
        return [
            (SchemeId(mode_policy=m), _with(s2, p_avg=pa, p_peak=fc.pavg_peak, r_bar=r))
            for r in fc.pavg_r_bar
            for m in modes
            for pa in fc.pavg_values
        ]
    if fig is FigureId.FIG9:
        return [
            (
                SchemeId(power_policy=pw, time_policy=tm),
                _with(s2, p_avg=fc.fig9_p_avg, p_peak=fc.fig9_p_peak, r_bar=r),
            )
            for pw, tm in RM_VARIANTS
            for r in fc.fig9_r_bar
        ]
    raise ArgumentError(f"Figure {fig.value} is not a fading-channel sweep")


def _row(fig: FigureId, scheme: SchemeId, cfg: ScenarioConfig, ev: EvalResult) -> Dict[str, Any]:
    return {
        "figure": fig.value,
        "scheme": scheme.label,
        "p0": getattr(cfg, "p0", np.nan),
        "r_bar": cfg.r_bar,
        "p_avg": getattr(cfg, "p_avg", np.nan),
        "p_peak": getattr(cfg, "p_peak", np.nan),
        "ergodic_s": ev.ergodic_s,
        "ergodic_r": ev.ergodic_r,
        "avg_power": ev.avg_power,
        "frac_off": ev.time_fractions["off"],
        "frac_bitcom": ev.time_fractions["bitcom"],
        "frac_semcom": ev.time_fractions["semcom"],
    }


def _group_tasks(tasks: List[Task]) -> List[Tuple[ScenarioConfig, List[int]]]:
    """Task indices per distinct config, in order of first appearance."""
    groups: Dict[ScenarioConfig, List[int]] = {}
    for i, (_, cfg) in enumerate(tasks):
        groups.setdefault(cfg, []).append(i)
    return list(groups.items())


def _run_group(
    fig: FigureId,
    cfg: ScenarioConfig,
    schemes: List[SchemeId],
    states: FadingStates,
    params: SystemParams,
) -> List[Optional[Dict[str, Any]]]:
    try:
        results = solve_schemes(schemes, states, cfg, params)
    except InfeasibleError as e:
        labels = ", ".join(s.label for s in schemes)
        logger.warning(f"{fig.value}: skipping {labels} at {cfg.model_dump()}: {e.message}")
        return [None] * len(schemes)
    return [_row(fig, scheme, cfg, ev) for scheme, (_, ev) in zip(schemes, results)]


def _default_regions() -> List[RegionSpec]:
    return [RegionSpec(p_f_max=p, objective=o) for o in RegionObjective for p in (0.1, 10.0)]


def _region_rows(params: SystemParams, regions: Sequence[RegionSpec]) -> pd.DataFrame:
    st = static_state(params)
    rows = []
    for spec in regions:
        for pt in sweep_boundary(spec, st, params):
            rows.append(
                {
                    "figure": FigureId.FIG2.value,
                    "objective": spec.objective.value,
                    "p_f_max": spec.p_f_max,
                    "r_bar": pt.r_bar,
                    "s": pt.s,
                    "p_f": pt.p_f,
                    "alpha_f": pt.alpha_f,
                }
            )
    return pd.DataFrame(rows, columns=REGION_FIGURE_COLUMNS)


def _map(fn: Callable[[ItemT], ResultT], items: List[ItemT], threads: int) -> List[ResultT]:
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_figure(
    fig: Union[FigureId, str],
    fc: FigureConfig,
    states: Sequence[FadingState],
    params: SystemParams,
    s1: Optional[Scenario1Config] = None,
    s2: Optional[Scenario2Config] = None,
    regions: Optional[Sequence[RegionSpec]] = None,
    threads: int = 1,
) -> pd.DataFrame:
    """
    Data behind one figure as a table.

    Schemes that share a sweep point are solved together; sweep points run
    independently (on `threads` workers when > 1) and rows come back in sweep
    order. Points whose rate target is infeasible are skipped.

    Raises:
        ArgumentError: If the figure id is unknown.
    """
    fig = FigureId.parse(fig) if isinstance(fig, str) else fig
    if fig is FigureId.FIG2:
        return _region_rows(params, regions or _default_regions())

    states = as_states(states)
    tasks = _figure_tasks(fig, fc, s1 or Scenario1Config(), s2 or Scenario2Config())
    groups = _group_tasks(tasks)
    logger.info(
        f"Running {fig.value}: {len(tasks)} scheme points at {len(groups)} sweep points on {len(states)} states"
    )
    solved = _map(
        lambda g: _run_group(fig, g[0], [tasks[i][0] for i in g[1]], states, params), groups, threads
    )
    rows: List[Optional[Dict[str, Any]]] = [None] * len(tasks)
    for (_, indices), group_rows in zip(groups, solved):
        for i, row in zip(indices, group_rows):
            rows[i] = row
    kept = [row for row in rows if row is not None]
    if len(kept) < len(rows):
        logger.warning(f"{fig.value}: {len(rows) - len(kept)} infeasible points skipped")
    return pd.DataFrame(kept, columns=FIGURE_COLUMNS)
