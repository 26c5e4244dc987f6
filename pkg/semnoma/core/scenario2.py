"""
Continuous resource management under a peak and an average power budget.

Both coupling constraints (ergodic N-user rate, average F-user power) are
dualised with the multipliers (beta, delta). For fixed multipliers every
fading state decouples into two one-dimensional power searches, one per
communication method. The dual is minimised with a central-cut ellipsoid
method and the time shares are recovered from a linear program over alpha
with the per-state methods and powers held fixed, at the few best dual
points the search visited.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from semnoma.core.errors import InfeasibleError, ParameterError
from semnoma.core.link_model import (
    FadingState,
    FadingStates,
    Gains,
    ModePolicy,
    Policy,
    PolicyDecision,
    PowerPolicy,
    SystemParams,
    TimePolicy,
    all_off_ceiling,
    as_states,
    bitcom_rate,
    f_user_rates,
    gain_columns,
    interference_free_rate,
    policy_rates,
    rate_loss,
    semcom_rate,
)
from semnoma.core.search import refine_rows
from semnoma.core.semantic_model import threshold_snr

logger = logging.getLogger(__name__)

FRACTIONAL_TOL = 1e-9
PRICE_BISECTIONS = 200
CROSSING_NUDGE = 1e-12
SLATER_TOL = 1e-9
RECOVERY_DUALS = 4
TIE_SWAPS = 4

StatesLike = Union[FadingStates, Sequence[FadingState]]


class Mode(str, Enum):
    SEM = "sem"
    BIT = "bit"


class Scenario2Config(BaseModel):
    """Targets, power budgets and solver settings for continuous management."""

    model_config = ConfigDict(frozen=True)

    r_bar: float = Field(4.0, ge=0.0, description="Ergodic N-user rate target (bits/s/Hz)")
    p_avg: float = Field(1.0, gt=0.0, description="Average power budget P_avg (W)")
    p_peak: float = Field(2.0, gt=0.0, description="Peak power budget P_peak (W)")
    power_grid: int = Field(1001, ge=2, description="Grid points of the power search")
    golden_iters: int = Field(30, ge=0, description="Golden-section steps after the grid")
    ellipsoid_tol: float = Field(1e-5, gt=0.0, description="Stop when sqrt(g'Ag) falls below")
    ellipsoid_max_iters: int = Field(500, ge=1)
    ellipsoid_radius: float = Field(1e6, gt=0.0, description="Initial ellipsoid semi-axis")

    @model_validator(mode="after")
    def check_budgets(self) -> "Scenario2Config":
        if self.p_avg > self.p_peak:
            raise ParameterError(
                "Average power budget cannot exceed the peak budget",
                details={"p_avg": self.p_avg, "p_peak": self.p_peak},
            )
        return self


class DualPoint(BaseModel):
    """Multipliers of the rate (beta) and average-power (delta) constraints."""

    model_config = ConfigDict(frozen=True)

    beta: float = Field(0.0, ge=0.0)
    delta: float = Field(0.0, ge=0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.beta, self.delta])


@dataclass(frozen=True)
class EllipsoidState:
    """Ellipsoid {x : (x - center)' shape^-1 (x - center) <= 1} in (beta, delta)."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=float)
        shape = np.asarray(self.shape, dtype=float)
        if center.shape != (2,) or shape.shape != (2, 2):
            raise ParameterError("Ellipsoid must live in two dimensions")
        if not np.allclose(shape, shape.T, rtol=1e-10, atol=0.0):
            raise ParameterError("Ellipsoid shape must be symmetric")
        try:
            np.linalg.cholesky(shape)
        except np.linalg.LinAlgError:
            raise ParameterError("Ellipsoid shape must be positive definite")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def initial(cls, radius: float) -> "EllipsoidState":
        return cls(np.ones(2), np.eye(2) * radius**2)

    def width(self, g: np.ndarray) -> float:
        return float(np.sqrt(g @ self.shape @ g))

    def cut(self, g: np.ndarray) -> "EllipsoidState":
        """Smallest ellipsoid containing the half {x : g'(x - center) <= 0}."""
        ag = self.shape @ g
        b = ag / np.sqrt(g @ ag)
        shape = 4.0 / 3.0 * (self.shape - 2.0 / 3.0 * np.outer(b, b))
        return EllipsoidState(self.center - b / 3.0, 0.5 * (shape + shape.T))


@dataclass(frozen=True)
class EllipsoidResult:
    duals: DualPoint
    dual_value: float
    iterations: int
    converged: bool
    history: Tuple[float, ...]
    candidates: Tuple[DualPoint, ...] = ()


@dataclass(frozen=True)
class Scenario2Solution:
    policy: Policy
    duals: DualPoint
    ergodic_s: float
    ergodic_r: float
    avg_power: float
    r_bar: float
    p_avg: float
    dual_value: float
    converged: bool = True
    iterations: int = 0
    lp_infeasible: bool = False

    @property
    def decisions(self) -> List[PolicyDecision]:
        return self.policy.decisions

    @property
    def duality_gap(self) -> float:
        return self.dual_value - self.ergodic_s

    @property
    def fractional_count(self) -> int:
        a = self.policy.alpha
        return int(np.count_nonzero((a > FRACTIONAL_TOL) & (a < 1.0 - FRACTIONAL_TOL)))


class _Choices(NamedTuple):
    rho: np.ndarray
    alpha: np.ndarray
    p: np.ndarray
    pi: np.ndarray
    contribution: np.ndarray
    alt_p: np.ndarray
    alt_pi: np.ndarray


def _pi(p: np.ndarray, mode: Mode, gains: Gains, dual: DualPoint, params: SystemParams) -> np.ndarray:
    rate = semcom_rate(p, gains, params) if mode is Mode.SEM else bitcom_rate(p, gains, params)
    return rate - dual.beta * rate_loss(p, gains, params) - dual.delta * np.asarray(p, dtype=float)


class PiTable:
    """
    Per-state method rates and N-user rate loss on the shared power grid.

    The Lagrangian density is affine in (beta, delta) once these are known,
    so the table is built once per solve and reused by every dual evaluation.
    A table is not safe to share between threads.
    """

    def __init__(
        self,
        states: FadingStates,
        cfg: Scenario2Config,
        params: SystemParams,
        power_policy: PowerPolicy = PowerPolicy.CONTINUOUS,
    ):
        self.states = states
        self.cfg = cfg
        self.params = params
        self.power_policy = power_policy
        self.gains = gain_columns(states)
        if power_policy is PowerPolicy.ON_OFF:
            self.p = np.array([cfg.p_peak])
        else:
            self.p = np.linspace(0.0, cfg.p_peak, cfg.power_grid)
        grid = self.p[None, :]
        self.r0 = interference_free_rate(states, params)
        self.loss = rate_loss(grid, self.gains, params)
        self.rates = {
            Mode.SEM: semcom_rate(grid, self.gains, params),
            Mode.BIT: bitcom_rate(grid, self.gains, params),
        }
        self.sem_start = self._sem_start()
        self._work = np.empty_like(self.loss)

    def __len__(self) -> int:
        return len(self.states)

    def _sem_start(self) -> np.ndarray:
        """Smallest power at which SemCom meets the similarity floor (inf if never)."""
        gamma_c = threshold_snr(self.params.sem)
        hf2 = self.states.hf2
        start = np.full(hf2.shape, np.inf)
        ok = hf2 > 0.0
        if np.isfinite(gamma_c):
            start[ok] = gamma_c * self.params.sigma2 / hf2[ok] * (1.0 + CROSSING_NUDGE)
        return start

    def pi(self, p: np.ndarray, mode: Mode, dual: DualPoint) -> np.ndarray:
        return _pi(p, mode, self.gains, dual, self.params)

    def maximize(self, mode: Mode, dual: DualPoint, refine: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """
        Per-state (p*, Pi*) of one method over [0, p_peak].

        Without `refine` the search stops at the grid and the SemCom floor
        crossing, which is what the ellipsoid iterations use.
        """
        values = np.multiply(self.loss, -dual.beta, out=self._work)
        values += self.rates[mode]
        if dual.delta:
            values -= dual.delta * self.p[None, :]
        k = np.argmax(values, axis=1)
        rows = np.arange(values.shape[0])
        x, fx = self.p[k], values[rows, k]
        if self.power_policy is PowerPolicy.ON_OFF:
            return x, fx

        p_peak = self.cfg.p_peak
        lo = np.zeros_like(x)
        if mode is Mode.SEM:
            # below the crossing SemCom delivers nothing and the best power is 0
            right = self.sem_start <= p_peak
            start = np.where(right, self.sem_start, 0.0)
            f_start = np.where(right, self.pi(start[:, None], mode, dual)[:, 0], -np.inf)
            take = f_start > fx
            x, fx = np.where(take, start, x), np.where(take, f_start, fx)
            lo = np.where(right & (x >= start), start, 0.0)
        if not refine:
            return x, fx

        step = p_peak / (self.p.size - 1)
        a = np.maximum(x - step, lo)
        b = np.minimum(x + step, p_peak)
        return refine_rows(lambda pts: self.pi(pts, mode, dual), x, fx, a, b, self.cfg.golden_iters)

    def choose(
        self, dual: DualPoint, modes: ModePolicy = ModePolicy.OPPORTUNISTIC, refine: bool = True
    ) -> _Choices:
        n = len(self)
        if modes is ModePolicy.SEMCOM_ONLY:
            p_s, pi_s = self.maximize(Mode.SEM, dual, refine)
            p_b, pi_b = np.zeros(n), np.full(n, -np.inf)
            sem = np.ones(n, dtype=bool)
        elif modes is ModePolicy.BITCOM_ONLY:
            p_s, pi_s = np.zeros(n), np.full(n, -np.inf)
            p_b, pi_b = self.maximize(Mode.BIT, dual, refine)
            sem = np.zeros(n, dtype=bool)
        else:
            p_s, pi_s = self.maximize(Mode.SEM, dual, refine)
            p_b, pi_b = self.maximize(Mode.BIT, dual, refine)
            # alpha* . Pi* per method; ties go to BitCom
            sem = np.maximum(pi_s, 0.0) > np.maximum(pi_b, 0.0)
        pi = np.where(sem, pi_s, pi_b)
        alpha = (pi > 0.0).astype(float)
        return _Choices(
            rho=sem.astype(np.int8),
            alpha=alpha,
            p=np.where(sem, p_s, p_b),
            pi=pi,
            contribution=dual.beta * self.r0 + alpha * pi,
            alt_p=np.where(sem, p_b, p_s),
            alt_pi=np.where(sem, pi_b, pi_s),
        )

    def evaluate(
        self, dual: DualPoint, modes: ModePolicy = ModePolicy.OPPORTUNISTIC, refine: bool = True
    ) -> Tuple[float, np.ndarray, _Choices]:
        """Dual value, subgradient and the per-state maximisers at `dual`."""
        ch = self.choose(dual, modes, refine)
        rate = self.r0 - ch.alpha * rate_loss(ch.p, self.states, self.params)
        power = float(np.mean(ch.alpha * ch.p))
        g2 = float(np.mean(ch.contribution)) - dual.beta * self.cfg.r_bar + dual.delta * self.cfg.p_avg
        subgrad = np.array([float(np.mean(rate)) - self.cfg.r_bar, self.cfg.p_avg - power])
        return g2, subgrad, ch


def _check_ceiling(states: FadingStates, cfg: Scenario2Config, params: SystemParams) -> None:
    ceiling = all_off_ceiling(states, params)
    if cfg.r_bar > ceiling:
        raise InfeasibleError(
            "Ergodic rate target exceeds the all-off ceiling",
            details={"r_bar": cfg.r_bar, "ceiling": ceiling},
        )


def pi_value(
    p: float, mode: Mode, st: FadingState, dual: DualPoint, cfg: Scenario2Config, params: SystemParams
) -> float:
    """Lagrangian density S_mode(p) - beta·(rate loss at p) - delta·p of one state."""
    gains = Gains(np.array(st.hn2), np.array(st.hf2))
    return float(_pi(np.asarray(p, dtype=float), mode, gains, dual, params))


def maximize_pi(
    mode: Mode,
    st: FadingState,
    dual: DualPoint,
    cfg: Scenario2Config,
    params: SystemParams,
    power_policy: PowerPolicy = PowerPolicy.CONTINUOUS,
) -> Tuple[float, float]:
    """Best power of one method for one state and its density value."""
    table = PiTable(as_states(st), cfg, params, power_policy)
    p, value = table.maximize(mode, dual)
    return float(p[0]), float(value[0])


def subproblem_s2(
    st: FadingState,
    dual: DualPoint,
    cfg: Scenario2Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
    power_policy: PowerPolicy = PowerPolicy.CONTINUOUS,
) -> Tuple[PolicyDecision, float]:
    """Lagrangian-maximising (rho, alpha, p) of one state and its contribution beta·r0 + alpha·Pi."""
    ch = PiTable(as_states(st), cfg, params, power_policy).choose(dual, modes)
    dec = PolicyDecision(rho=int(ch.rho[0]), alpha=float(ch.alpha[0]), p=float(ch.p[0]))
    return dec, float(ch.contribution[0])


def dual_function(
    states: StatesLike,
    dual: DualPoint,
    cfg: Scenario2Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
    power_policy: PowerPolicy = PowerPolicy.CONTINUOUS,
    table: Optional[PiTable] = None,
) -> Tuple[float, np.ndarray]:
    """
    Dual function g2 and its subgradient.

    Returns:
        (g2, [E[R*] - r_bar, p_avg - E[alpha*·p*]])
    """
    if table is None:
        table = PiTable(as_states(states), cfg, params, power_policy)
    g2, subgrad, _ = table.evaluate(dual, modes)
    return g2, subgrad


def initial_radius(g0: float, table: PiTable, cfg: Scenario2Config) -> float:
    """
    Radius of a ball around (1, 1) that holds every minimiser of g2.

    The all-off policy gives g2(beta, delta) >= beta·(ceiling - r_bar) + delta·p_avg,
    so no minimiser lies outside the box [0, g0/(ceiling - r_bar)] x [0, g0/p_avg].
    Without rate slack the configured radius is used.
    """
    slack = float(np.mean(table.r0)) - cfg.r_bar
    if slack <= SLATER_TOL * max(1.0, cfg.r_bar):
        return cfg.ellipsoid_radius
    bound = max(g0 / slack, g0 / cfg.p_avg, 1.0)
    return min(cfg.ellipsoid_radius, 2.0 * bound)


def _best_distinct(evaluated: List[Tuple[float, DualPoint]], count: int) -> Tuple[DualPoint, ...]:
    seen = set()
    out: List[DualPoint] = []
    for _, dual in sorted(evaluated, key=lambda item: item[0]):
        key = (dual.beta, dual.delta)
        if key in seen:
            continue
        seen.add(key)
        out.append(dual)
        if len(out) == count:
            break
    return tuple(out)


def ellipsoid_solve(
    states: StatesLike,
    cfg: Scenario2Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
    power_policy: PowerPolicy = PowerPolicy.CONTINUOUS,
    table: Optional[PiTable] = None,
) -> EllipsoidResult:
    """
    Minimise g2 over beta, delta >= 0 with central cuts.

    Dual values along the way are taken on the power grid; the returned
    candidates are the best distinct centers, best first.

    Raises:
        InfeasibleError: If r_bar exceeds the all-off ergodic ceiling.
    """
    states = as_states(states)
    _check_ceiling(states, cfg, params)
    if table is None:
        table = PiTable(states, cfg, params, power_policy)

    origin = DualPoint()
    g0, sub0, _ = table.evaluate(origin, modes, refine=False)
    if np.all(sub0 >= 0.0):
        logger.debug("Both constraints hold at zero multipliers")
        return EllipsoidResult(
            duals=origin, dual_value=g0, iterations=0, converged=True, history=(g0,), candidates=(origin,)
        )

    ellipsoid = EllipsoidState.initial(initial_radius(g0, table, cfg))
    best_value, best = g0, origin
    evaluated: List[Tuple[float, DualPoint]] = [(g0, origin)]
    history: List[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.ellipsoid_max_iters + 1):
        center = ellipsoid.center
        negative = np.flatnonzero(center < 0.0)
        if negative.size:
            # feasibility cut towards the non-negative orthant
            g = np.zeros(2)
            g[negative[0]] = -1.0
        else:
            dual = DualPoint(beta=center[0], delta=center[1])
            value, g, _ = table.evaluate(dual, modes, refine=False)
            evaluated.append((value, dual))
            if value < best_value:
                best_value, best = value, dual
            history.append(best_value)
            if not np.any(g) or ellipsoid.width(g) <= cfg.ellipsoid_tol:
                converged = True
                break
        try:
            ellipsoid = ellipsoid.cut(g)
        except ParameterError:
            logger.warning(f"Ellipsoid degenerated after {it} iterations; keeping best center")
            break
    else:
        logger.warning(
            f"Ellipsoid method reached {cfg.ellipsoid_max_iters} iterations without "
            f"meeting tolerance {cfg.ellipsoid_tol}"
        )

    logger.debug(f"Ellipsoid: beta*={best.beta:.6g}, delta*={best.delta:.6g}, g2={best_value:.6g}")
    return EllipsoidResult(
        duals=best,
        dual_value=float(best_value),
        iterations=it,
        converged=converged,
        history=tuple(history),
        candidates=_best_distinct(evaluated, RECOVERY_DUALS),
    )


def _knapsack(value: np.ndarray, d: np.ndarray, cap: float) -> np.ndarray:
    """Fractional knapsack: max value·alpha s.t. d·alpha <= cap, 0 <= alpha <= 1."""
    alpha = np.zeros_like(value)
    positive = value > 0.0
    alpha[positive & (d <= 0.0)] = 1.0
    idx = np.flatnonzero(positive & (d > 0.0))
    if idx.size == 0:
        return alpha
    order = idx[np.argsort(-(value[idx] / d[idx]), kind="stable")]
    used = np.cumsum(d[order])
    full = used <= cap
    alpha[order[full]] = 1.0
    over = np.flatnonzero(~full)
    if over.size:
        j = over[0]
        alpha[order[j]] = (cap - (used[j] - d[order[j]])) / d[order[j]]
    return alpha


def _purify(alpha: np.ndarray, s: np.ndarray, d: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Move along null directions of the two constraints until at most two alphas are fractional."""
    alpha = alpha.copy()
    rows = np.vstack([d, w])
    for _ in range(alpha.size):
        frac = np.flatnonzero((alpha > FRACTIONAL_TOL) & (alpha < 1.0 - FRACTIONAL_TOL))
        if frac.size <= 2:
            break
        trio = frac[:3]
        z = np.linalg.svd(rows[:, trio])[2][-1]
        if s[trio] @ z < 0.0:
            z = -z
        a = alpha[trio]
        with np.errstate(divide="ignore", invalid="ignore"):
            steps = np.where(z > 0.0, (1.0 - a) / z, np.where(z < 0.0, -a / z, np.inf))
        alpha[trio] = np.clip(a + np.min(steps) * z, 0.0, 1.0)
        alpha[alpha <= FRACTIONAL_TOL] = 0.0
        alpha[alpha >= 1.0 - FRACTIONAL_TOL] = 1.0
    return alpha


def solve_allocation_lp(
    s: np.ndarray, d: np.ndarray, w: np.ndarray, cap_rate: float, cap_power: float
) -> np.ndarray:
    """
    max s·alpha  s.t.  d·alpha <= cap_rate,  w·alpha <= cap_power,  0 <= alpha <= 1.

    Bisects the power price, mixes the two bracketing knapsack solutions so
    the power budget is tight, then purifies to at most two fractional entries.

    Raises:
        InfeasibleError: If a capacity is negative (alpha = 0 violates it).
    """
    s, d, w = (np.asarray(v, dtype=float) for v in (s, d, w))
    scale = max(1.0, float(np.sum(np.abs(d))), float(np.sum(np.abs(w))))
    if cap_rate < -1e-9 * scale or cap_power < -1e-9 * scale:
        raise InfeasibleError(
            "Time-share program has no feasible point",
            details={"cap_rate": cap_rate, "cap_power": cap_power},
        )
    cap_rate, cap_power = max(cap_rate, 0.0), max(cap_power, 0.0)

    def at(price: float) -> np.ndarray:
        return _knapsack(s - price * w, d, cap_rate)

    alpha = at(0.0)
    if w @ alpha <= cap_power:
        return _purify(alpha, s, d, w)

    priced = w > 0.0
    lo, hi = 0.0, float(np.max(s[priced] / w[priced]))
    a_lo, a_hi = alpha, at(hi)
    for _ in range(PRICE_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        a_mid = at(mid)
        if w @ a_mid > cap_power:
            lo, a_lo = mid, a_mid
        else:
            hi, a_hi = mid, a_mid

    p_lo, p_hi = float(w @ a_lo), float(w @ a_hi)
    theta = (cap_power - p_hi) / (p_lo - p_hi)
    alpha = np.clip(theta * a_lo + (1.0 - theta) * a_hi, 0.0, 1.0)
    return _purify(alpha, s, d, w)


def round_time_shares(
    alpha: np.ndarray, s: np.ndarray, d: np.ndarray, w: np.ndarray, cap_rate: float, cap_power: float
) -> np.ndarray:
    """
    Whole-block time shares from a feasible fractional allocation.

    Fractional entries are dropped, then whole states are switched on in
    order of rate per unit of (normalised) budget while both budgets allow.
    Starting from an LP optimum with at most two fractional entries the loss
    is at most the rate of two states.
    """
    on = alpha >= 1.0 - FRACTIONAL_TOL
    rate_left = cap_rate - float(np.sum(d[on]))
    power_left = cap_power - float(np.sum(w[on]))
    idx = np.flatnonzero(~on & (s > 0.0))
    if idx.size:
        tiny = np.finfo(float).tiny
        cost = d[idx] / max(cap_rate, tiny) + w[idx] / max(cap_power, tiny)
        for v in idx[np.argsort(-(s[idx] / np.maximum(cost, tiny)), kind="stable")]:
            if d[v] <= rate_left and w[v] <= power_left:
                on[v] = True
                rate_left -= d[v]
                power_left -= w[v]
    return on.astype(float)


class _Recovered(NamedTuple):
    rho: np.ndarray
    p: np.ndarray
    alpha: np.ndarray
    score: float
    lp_infeasible: bool


class _Allocator:
    """Time-share program for fixed per-state methods and powers."""

    def __init__(self, table: PiTable, cfg: Scenario2Config):
        self.table = table
        n = len(table)
        self.cap_rate = float(np.sum(table.r0)) - n * cfg.r_bar
        self.cap_power = n * cfg.p_avg

    def terms(self, rho: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        t = self.table
        return f_user_rates(rho, 1.0, p, t.states, t.params), rate_loss(p, t.states, t.params)

    def __call__(self, rho: np.ndarray, p: np.ndarray, fallback: np.ndarray) -> _Recovered:
        s, d = self.terms(rho, p)
        try:
            alpha = solve_allocation_lp(s, d, p, self.cap_rate, self.cap_power)
            infeasible = False
        except InfeasibleError:
            alpha, infeasible = fallback, True
        return _Recovered(rho, p, alpha, float(np.mean(s * alpha)), infeasible)

    def rounded(self, rec: _Recovered) -> _Recovered:
        s, d = self.terms(rec.rho, rec.p)
        alpha = round_time_shares(rec.alpha, s, d, rec.p, self.cap_rate, self.cap_power)
        return rec._replace(alpha=alpha, score=float(np.mean(s * alpha)))


def _better(a: _Recovered, b: Optional[_Recovered]) -> bool:
    return b is None or (not a.lp_infeasible, a.score) > (not b.lp_infeasible, b.score)


def _swap_ties(allocate: _Allocator, ch: _Choices, rec: _Recovered) -> _Recovered:
    """Try the other method in the states where both methods are priced almost equally."""
    idx = np.flatnonzero((ch.pi > 0.0) & (ch.alt_pi > 0.0))
    if idx.size == 0 or rec.lp_infeasible:
        return rec
    closest = idx[np.argsort(np.abs(ch.pi[idx] - ch.alt_pi[idx]), kind="stable")[:TIE_SWAPS]]
    for v in closest:
        rho, p = rec.rho.copy(), rec.p.copy()
        rho[v] = 1 - rho[v]
        p[v] = ch.alt_p[v]
        trial = allocate(rho, p, rec.alpha)
        if not trial.lp_infeasible and trial.score > rec.score:
            logger.debug(f"Switching state {v} to the other method lifts E[S] to {trial.score:.6g}")
            rec = trial
    return rec


def _recover(
    table: PiTable, duals: Sequence[DualPoint], cfg: Scenario2Config, modes: ModePolicy
) -> Tuple[_Recovered, float]:
    """Best continuous-time recovery over the candidate duals and the refined dual value at the first."""
    allocate = _Allocator(table, cfg)
    best: Optional[_Recovered] = None
    best_choices: Optional[_Choices] = None
    g2 = np.nan
    for i, dual in enumerate(duals):
        value, _, ch = table.evaluate(dual, modes)
        if i == 0:
            g2 = value
        rec = allocate(ch.rho, ch.p, ch.alpha)
        if _better(rec, best):
            best, best_choices = rec, ch
    if best is None or best_choices is None:
        raise ParameterError("At least one dual point is needed for recovery")
    if best.lp_infeasible:
        logger.warning("Time-share program infeasible at every candidate; keeping Lagrangian alphas")
    if modes is ModePolicy.OPPORTUNISTIC:
        best = _swap_ties(allocate, best_choices, best)
    return best, g2


def _to_solution(
    rec: _Recovered, table: PiTable, duals: DualPoint, g2: float, cfg: Scenario2Config
) -> Scenario2Solution:
    policy = Policy(rho=rec.rho, alpha=rec.alpha, p=rec.p)
    r, s = policy_rates(policy, table.states, table.params)
    return Scenario2Solution(
        policy=policy,
        duals=duals,
        ergodic_s=float(np.mean(s)),
        ergodic_r=float(np.mean(r)),
        avg_power=float(np.mean(rec.alpha * rec.p)),
        r_bar=cfg.r_bar,
        p_avg=cfg.p_avg,
        dual_value=g2,
        lp_infeasible=rec.lp_infeasible,
    )


def recover_primal(
    states: StatesLike,
    duals: DualPoint,
    cfg: Scenario2Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
    power_policy: PowerPolicy = PowerPolicy.CONTINUOUS,
    time_policy: TimePolicy = TimePolicy.CONTINUOUS,
    table: Optional[PiTable] = None,
) -> Scenario2Solution:
    """
    Fix (rho*, p*) at `duals` and re-optimise the time shares.

    If the time-share program is infeasible the Lagrangian alphas are kept
    and the solution is flagged with lp_infeasible. On-off time rounds the
    program's shares with `round_time_shares`.
    """
    states = as_states(states)
    if table is None:
        table = PiTable(states, cfg, params, power_policy)
    rec, g2 = _recover(table, [duals], cfg, modes)
    if time_policy is TimePolicy.ON_OFF:
        rec = _Allocator(table, cfg).rounded(rec)
    return _to_solution(rec, table, duals, g2, cfg)


Variant = Tuple[ModePolicy, PowerPolicy, TimePolicy]


def _contained(modes: ModePolicy, power: PowerPolicy) -> List[Tuple[ModePolicy, PowerPolicy]]:
    """Method/power restrictions whose policies are also feasible for (modes, power)."""
    out = []
    if modes is ModePolicy.OPPORTUNISTIC:
        out += [(ModePolicy.SEMCOM_ONLY, power), (ModePolicy.BITCOM_ONLY, power)]
    if power is PowerPolicy.CONTINUOUS:
        out.append((modes, PowerPolicy.ON_OFF))
    return out


class VariantSolver:
    """
    Resource-management variants of one instance, each solved at most once.

    A (methods, power) pair runs one ellipsoid search and both time policies
    share it. A variant also weighs the solutions of the variants it
    contains (single-method, on-off power), so it never reports less than
    any of them.
    """

    def __init__(self, states: StatesLike, cfg: Scenario2Config, params: SystemParams):
        self.states = as_states(states)
        self.cfg = cfg
        self.params = params
        _check_ceiling(self.states, cfg, params)
        self._tables: Dict[PowerPolicy, PiTable] = {}
        self._searches: Dict[Tuple[ModePolicy, PowerPolicy], EllipsoidResult] = {}
        self._recovered: Dict[Tuple[ModePolicy, PowerPolicy], Tuple[_Recovered, float]] = {}
        self._solutions: Dict[Variant, Scenario2Solution] = {}

    def table(self, power: PowerPolicy) -> PiTable:
        if power not in self._tables:
            self._tables[power] = PiTable(self.states, self.cfg, self.params, power)
        return self._tables[power]

    def search(self, modes: ModePolicy, power: PowerPolicy) -> EllipsoidResult:
        key = (modes, power)
        if key not in self._searches:
            self._searches[key] = ellipsoid_solve(
                self.states, self.cfg, self.params, modes, power, table=self.table(power)
            )
        return self._searches[key]

    def _own(self, modes: ModePolicy, power: PowerPolicy, time: TimePolicy) -> Scenario2Solution:
        key = (modes, power)
        result = self.search(modes, power)
        if key not in self._recovered:
            duals = result.candidates or (result.duals,)
            self._recovered[key] = _recover(self.table(power), duals, self.cfg, modes)
        rec, g2 = self._recovered[key]
        if time is TimePolicy.ON_OFF:
            rec = _Allocator(self.table(power), self.cfg).rounded(rec)
        solution = _to_solution(rec, self.table(power), result.duals, g2, self.cfg)
        return replace(solution, converged=result.converged, iterations=result.iterations)

    def solve(
        self,
        modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
        power: PowerPolicy = PowerPolicy.CONTINUOUS,
        time: TimePolicy = TimePolicy.CONTINUOUS,
    ) -> Scenario2Solution:
        key = (modes, power, time)
        if key in self._solutions:
            return self._solutions[key]
        own = self._own(modes, power, time)
        best = own
        for sub_modes, sub_power in _contained(modes, power):
            other = self.solve(sub_modes, sub_power, time)
            if other.ergodic_s > best.ergodic_s:
                logger.debug(
                    f"{sub_modes.value}/{sub_power.value} solution beats {modes.value}/{power.value}: "
                    f"{other.ergodic_s:.6g} > {best.ergodic_s:.6g}"
                )
                best = replace(
                    other,
                    duals=own.duals,
                    dual_value=own.dual_value,
                    converged=own.converged,
                    iterations=own.iterations,
                )
        self._solutions[key] = best
        logger.info(
            f"Scenario II ({modes.value}, power {power.value}, time {time.value}): "
            f"beta*={best.duals.beta:.6g}, delta*={best.duals.delta:.6g}, "
            f"E[S]={best.ergodic_s:.6g}, gap={best.duality_gap:.3g}, "
            f"{best.iterations} ellipsoid steps"
        )
        return best


def solve_s2(
    states: StatesLike,
    cfg: Scenario2Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
    power_policy: PowerPolicy = PowerPolicy.CONTINUOUS,
    time_policy: TimePolicy = TimePolicy.CONTINUOUS,
) -> Scenario2Solution:
    """
    Ellipsoid search for the optimal duals followed by time-share recovery.

    Raises:
        InfeasibleError: If r_bar exceeds the all-off ergodic ceiling.
    """
    return VariantSolver(states, cfg, params).solve(modes, power_policy, time_policy)


def solve_s2_variants(
    states: StatesLike, cfg: Scenario2Config, params: SystemParams, variants: Sequence[Variant]
) -> List[Scenario2Solution]:
    """Several variants on one instance, sharing tables, searches and contained solutions."""
    solver = VariantSolver(states, cfg, params)
    return [solver.solve(*variant) for variant in variants]
