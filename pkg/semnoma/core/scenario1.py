"""
On-off resource management: per fading state the F-user is either silent or
transmits for the whole block at the constant power P0, using SemCom or
BitCom. The ergodic N-user rate constraint is dualised with a single
multiplier lambda, each state is solved by a three-way comparison, and
lambda is found by bisection.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from semnoma.core.errors import InfeasibleError
from semnoma.core.link_model import (
    FadingState,
    FadingStates,
    ModePolicy,
    Policy,
    PolicyDecision,
    SystemParams,
    all_off_ceiling,
    as_states,
    bitcom_rate,
    interference_free_rate,
    n_user_active_rate,
    policy_rates,
    semcom_rate,
)

logger = logging.getLogger(__name__)

MAX_BISECTIONS = 200
LAMBDA_REL_TOL = 1e-12
FILL_GUARD = 1e-12

StatesLike = Union[FadingStates, Sequence[FadingState]]


class Scenario1Config(BaseModel):
    """Constant on-power and ergodic target for on-off management."""

    model_config = ConfigDict(frozen=True)

    p0: float = Field(2.0, gt=0.0, description="Constant on-power P0 (W)")
    r_bar: float = Field(4.0, ge=0.0, description="Ergodic N-user rate target (bits/s/Hz)")
    lambda_tol: float = Field(1e-4, gt=0.0, description="Relative tolerance on E[R] - r_bar that stops the bisection early")
    lambda_max_doublings: int = Field(60, ge=1, description="Upper-bracket doublings before giving up")


@dataclass(frozen=True)
class Scenario1Solution:
    policy: Policy
    lambda_star: float
    ergodic_s: float
    ergodic_r: float
    r_bar: float
    dual_value: float
    bisections: int

    @property
    def decisions(self) -> List[PolicyDecision]:
        return self.policy.decisions

    @property
    def duality_gap(self) -> float:
        return self.dual_value - self.ergodic_s


def _values(
    states: FadingStates, cfg: Scenario1Config, params: SystemParams, modes: ModePolicy
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-state (semantic rate, rho, N-user rate loss) of transmitting at P0 in the best allowed mode."""
    loss = interference_free_rate(states, params) - n_user_active_rate(cfg.p0, states, params)
    s_sem = semcom_rate(cfg.p0, states, params)
    s_bit = bitcom_rate(cfg.p0, states, params)
    if modes is ModePolicy.SEMCOM_ONLY:
        return s_sem, np.ones(len(states), dtype=np.int8), loss
    if modes is ModePolicy.BITCOM_ONLY:
        return s_bit, np.zeros(len(states), dtype=np.int8), loss
    # ties fall to BitCom
    use_sem = s_sem > s_bit
    return np.where(use_sem, s_sem, s_bit), use_sem.astype(np.int8), loss


def _on_policy(on: np.ndarray, rho: np.ndarray, cfg: Scenario1Config) -> Policy:
    # silent states are reported as BitCom with zero power
    return Policy(
        rho=np.where(on, rho, 0).astype(np.int8),
        alpha=on.astype(float),
        p=np.where(on, cfg.p0, 0.0),
    )


def _policy(states: FadingStates, lam: float, cfg: Scenario1Config, params: SystemParams, modes: ModePolicy) -> Policy:
    """Lagrangian-maximising policy: a state transmits iff its rate beats lambda times its loss."""
    value, rho, loss = _values(states, cfg, params, modes)
    return _on_policy(value > lam * loss, rho, cfg)


def _fill_slack(on: np.ndarray, value: np.ndarray, loss: np.ndarray, slack: float) -> np.ndarray:
    """Switch further states on, best rate per unit loss first, while they fit in the rate slack."""
    on = on.copy()
    idx = np.flatnonzero(~on & (value > 0.0))
    if idx.size == 0 or slack <= 0.0:
        return on
    ratio = value[idx] / np.maximum(loss[idx], np.finfo(float).tiny)
    for v in idx[np.argsort(-ratio, kind="stable")]:
        if loss[v] <= slack:
            on[v] = True
            slack -= loss[v]
    return on


def _completed(
    states: FadingStates, on: np.ndarray, cfg: Scenario1Config, params: SystemParams, modes: ModePolicy
) -> Policy:
    """Feasible on-set with every state in its best mode, topped up to the rate target."""
    value, rho, loss = _values(states, cfg, params, modes)
    n = len(states)
    slack = (
        float(np.sum(interference_free_rate(states, params)))
        - float(np.sum(loss[on]))
        - n * cfg.r_bar
        - FILL_GUARD * n * max(1.0, cfg.r_bar)
    )
    return _on_policy(_fill_slack(on, value, loss, slack), rho, cfg)


def _ergodic(policy: Policy, states: FadingStates, params: SystemParams) -> Tuple[float, float]:
    r, s = policy_rates(policy, states, params)
    return float(np.mean(s)), float(np.mean(r))


def subproblem_s1(
    st: FadingState,
    lam: float,
    cfg: Scenario1Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
) -> PolicyDecision:
    """Lagrangian-maximising on-off decision for one fading state."""
    policy = _policy(as_states(st), lam, cfg, params, modes)
    return policy.decisions[0]


def dual_value_s1(
    states: StatesLike,
    lam: float,
    cfg: Scenario1Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
) -> float:
    """Dual function g1(lambda) = max over on-off policies of the Lagrangian."""
    states = as_states(states)
    s, r = _ergodic(_policy(states, lam, cfg, params, modes), states, params)
    return s + lam * (r - cfg.r_bar)


def ergodic_rate_at(
    states: StatesLike,
    lam: float,
    cfg: Scenario1Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
) -> float:
    """Ergodic N-user rate of the Lagrangian-maximising policy at lambda."""
    states = as_states(states)
    return _ergodic(_policy(states, lam, cfg, params, modes), states, params)[1]


def _solution(
    states: FadingStates,
    policy: Policy,
    lam: float,
    cfg: Scenario1Config,
    params: SystemParams,
    modes: ModePolicy,
    bisections: int,
) -> Scenario1Solution:
    s, r = _ergodic(policy, states, params)
    return Scenario1Solution(
        policy=policy,
        lambda_star=lam,
        ergodic_s=s,
        ergodic_r=r,
        r_bar=cfg.r_bar,
        dual_value=dual_value_s1(states, lam, cfg, params, modes),
        bisections=bisections,
    )


def _bisect(rate: Callable[[float], float], cfg: Scenario1Config) -> Tuple[float, int]:
    """Smallest lambda (to relative precision) whose policy meets the rate target."""
    lo, hi = 0.0, 1.0
    for _ in range(cfg.lambda_max_doublings):
        if rate(hi) >= cfg.r_bar:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise InfeasibleError(
            "No lambda bracket found for the rate target",
            details={"r_bar": cfg.r_bar, "lambda_hi": hi},
        )

    # hi always satisfies the rate target
    eq_tol = cfg.lambda_tol * cfg.r_bar
    n = 0
    for n in range(1, MAX_BISECTIONS + 1):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        r_mid = rate(mid)
        if r_mid >= cfg.r_bar:
            hi = mid
            if r_mid - cfg.r_bar <= eq_tol:
                break
        else:
            lo = mid
        if hi - lo <= LAMBDA_REL_TOL * hi:
            break
    return hi, n


def solve_s1(
    states: StatesLike,
    cfg: Scenario1Config,
    params: SystemParams,
    modes: ModePolicy = ModePolicy.OPPORTUNISTIC,
) -> Scenario1Solution:
    """
    Optimal on-off policy for the ergodic semantic rate.

    The Lagrangian policy at the bisected lambda is topped up with the states
    that still fit in the rate slack. The opportunistic policy also starts from
    the single-mode on-sets and keeps whichever candidate delivers the most, so
    it never falls below SemCom-only or BitCom-only.

    Raises:
        InfeasibleError: If r_bar exceeds the all-off ergodic ceiling, or no
            bracket for lambda is found within the allowed doublings.
    """
    states = as_states(states)
    ceiling = all_off_ceiling(states, params)
    if cfg.r_bar > ceiling:
        raise InfeasibleError(
            "Ergodic rate target exceeds the all-off ceiling",
            details={"r_bar": cfg.r_bar, "ceiling": ceiling},
        )

    def rate(lam: float) -> float:
        return ergodic_rate_at(states, lam, cfg, params, modes)

    if rate(0.0) >= cfg.r_bar:
        logger.info("Rate constraint inactive at lambda=0")
        return _solution(states, _policy(states, 0.0, cfg, params, modes), 0.0, cfg, params, modes, 0)

    lam, n = _bisect(rate, cfg)
    value, _, loss = _values(states, cfg, params, modes)
    on_sets = [value > lam * loss]
    if modes is ModePolicy.OPPORTUNISTIC:
        for single in (ModePolicy.SEMCOM_ONLY, ModePolicy.BITCOM_ONLY):
            on_sets.append(solve_s1(states, cfg, params, single).policy.alpha > 0.0)

    best, best_s = None, -np.inf
    for i, on in enumerate(on_sets):
        policy = _completed(states, on, cfg, params, modes)
        s = _ergodic(policy, states, params)[0]
        if s > best_s:
            if i > 0:
                logger.debug(f"Single-mode on-set #{i} improves E[S] to {s:.6g}")
            best, best_s = policy, s

    solution = _solution(states, best, lam, cfg, params, modes, n)
    logger.info(
        f"Scenario I ({modes.value}): lambda*={lam:.6g}, E[S]={solution.ergodic_s:.6g}, "
        f"E[R]={solution.ergodic_r:.6g} after {n} bisections"
    )
    return solution
