"""
Path loss, fading-state sampling and the instantaneous NOMA rates.

The access point decodes the N-user first, treating the F-user as
interference, then decodes the F-user interference-free after SIC.
Rate helpers are vectorised: `st` may be a single FadingState or a
FadingStates batch, and power/time-share arguments broadcast against it.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, List, Literal, NamedTuple, Sequence, Tuple, Union, overload

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from semnoma.core.errors import ArgumentError
from semnoma.core.semantic_model import (
    LN2,
    BitComProfile,
    SemComProfile,
    effective_semantic_rate,
    equivalent_semantic_rate,
)

logger = logging.getLogger(__name__)


class ModePolicy(str, Enum):
    """Which communication methods the F-user may pick."""

    OPPORTUNISTIC = "opportunistic"
    SEMCOM_ONLY = "semcom_only"
    BITCOM_ONLY = "bitcom_only"


class PowerPolicy(str, Enum):
    CONTINUOUS = "continuous"
    ON_OFF = "on_off"


class TimePolicy(str, Enum):
    CONTINUOUS = "continuous"
    ON_OFF = "on_off"


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


class LinkGeometry(BaseModel):
    """Distance-dependent path loss of one user-to-AP link."""

    model_config = ConfigDict(frozen=True)

    distance_m: float = Field(..., gt=0.0, description="Link distance in meters")
    rho0_db: float = Field(-30.0, description="Reference path loss at 1 m (dB)")
    path_exp: float = Field(4.0, gt=0.0, description="Path-loss exponent")


class SystemParams(BaseModel):
    """Everything the rate formulas need besides the per-state channel."""

    model_config = ConfigDict(frozen=True)

    p_n: float = Field(1.0, gt=0.0, description="N-user transmit power (W)")
    sigma2: float = Field(1e-11, gt=0.0, description="Noise power (W)")
    n_geom: LinkGeometry
    f_geom: LinkGeometry
    sem: SemComProfile
    bit: BitComProfile = BitComProfile()


class FadingState(BaseModel):
    """One channel realization: power gains of the N-user and F-user links."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(..., ge=0)
    hn2: float = Field(..., ge=0.0, description="N-user power gain |h_n|^2")
    hf2: float = Field(..., ge=0.0, description="F-user power gain |h_f|^2")


class PolicyDecision(BaseModel):
    """Per-state choice of method, time share and power."""

    model_config = ConfigDict(frozen=True)

    rho: Literal[0, 1] = Field(..., description="1 = SemCom, 0 = BitCom")
    alpha: float = Field(..., ge=0.0, le=1.0, description="Time share")
    p: float = Field(..., ge=0.0, description="Transmit power (W)")


def _readonly(values: ArrayLike, dtype: type) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class FadingStates(Sequence[FadingState]):
    """Immutable batch of fading states backed by numpy arrays."""

    def __init__(self, index: ArrayLike, hn2: ArrayLike, hf2: ArrayLike):
        self.index = _readonly(index, np.int64)
        self.hn2 = _readonly(hn2, float)
        self.hf2 = _readonly(hf2, float)
        if not (self.index.shape == self.hn2.shape == self.hf2.shape) or self.hn2.ndim != 1:
            raise ArgumentError("Fading-state arrays must be 1-D and of equal length")
        if np.any(self.hn2 < 0.0) or np.any(self.hf2 < 0.0):
            raise ArgumentError("Channel power gains must be non-negative")

    @classmethod
    def from_states(cls, states: Iterable[FadingState]) -> "FadingStates":
        states = list(states)
        return cls(
            [s.index for s in states], [s.hn2 for s in states], [s.hf2 for s in states]
        )

    def __len__(self) -> int:
        return int(self.hn2.shape[0])

    @overload
    def __getitem__(self, i: int) -> FadingState: ...

    @overload
    def __getitem__(self, i: slice) -> "FadingStates": ...

    def __getitem__(self, i: Union[int, slice]) -> Union[FadingState, "FadingStates"]:
        if isinstance(i, slice):
            return FadingStates(self.index[i], self.hn2[i], self.hf2[i])
        return FadingState(index=int(self.index[i]), hn2=float(self.hn2[i]), hf2=float(self.hf2[i]))

    def __iter__(self) -> Iterator[FadingState]:
        for i in range(len(self)):
            yield self[i]

    def __repr__(self) -> str:
        return f"FadingStates(n={len(self)})"


class Gains(NamedTuple):
    """Channel power gains as broadcastable arrays (e.g. one column per state)."""

    hn2: np.ndarray
    hf2: np.ndarray


def gain_columns(states: FadingStates) -> Gains:
    """Gains shaped (n, 1) so per-state quantities broadcast against candidate rows."""
    return Gains(states.hn2[:, None], states.hf2[:, None])


Channel = Union[FadingState, FadingStates, Gains]


def as_states(states: Union[FadingStates, Sequence[FadingState], FadingState]) -> FadingStates:
    """Coerce a single state or any sequence of states into a FadingStates batch."""
    if isinstance(states, FadingStates):
        batch = states
    elif isinstance(states, FadingState):
        batch = FadingStates.from_states([states])
    else:
        batch = FadingStates.from_states(states)
    if len(batch) == 0:
        raise ArgumentError("At least one fading state is required")
    return batch


@dataclass(frozen=True)
class Policy:
    """Per-state decisions stored column-wise."""

    rho: np.ndarray
    alpha: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def decisions(self) -> List[PolicyDecision]:
        return [
            PolicyDecision(rho=int(r), alpha=float(a), p=float(p))
            for r, a, p in zip(self.rho, self.alpha, self.p)
        ]

    @classmethod
    def from_decisions(cls, decisions: Iterable[PolicyDecision]) -> "Policy":
        decisions = list(decisions)
        return cls(
            rho=np.array([d.rho for d in decisions], dtype=np.int8),
            alpha=np.array([d.alpha for d in decisions], dtype=float),
            p=np.array([d.p for d in decisions], dtype=float),
        )


def path_loss(geom: LinkGeometry) -> float:
    """Linear power gain rho0 · (1/d)^beta."""
    return db_to_linear(geom.rho0_db) * (1.0 / geom.distance_m) ** geom.path_exp


def static_state(params: SystemParams) -> FadingState:
    """The fading-free channel at the configured distances."""
    return FadingState(index=0, hn2=path_loss(params.n_geom), hf2=path_loss(params.f_geom))


def sample_states(seed: int, count: int, params: SystemParams) -> FadingStates:
    """
    Draw `count` i.i.d. Rayleigh states (unit-mean exponential power gains).

    Raises:
        ArgumentError: If count is not positive.
    """
    if count < 1:
        raise ArgumentError("State count must be positive", details={"count": count})
    rng = np.random.default_rng(seed)
    e_n = rng.exponential(1.0, size=count)
    e_f = rng.exponential(1.0, size=count)
    logger.debug(f"Sampled {count} fading states with seed {seed}")
    return FadingStates(
        np.arange(count), path_loss(params.n_geom) * e_n, path_loss(params.f_geom) * e_f
    )


def snr(p: ArrayLike, h2: ArrayLike, sigma2: float) -> np.ndarray:
    """Received linear SNR p·h2/sigma2."""
    if sigma2 <= 0.0:
        raise ArgumentError("Noise power must be positive", details={"sigma2": sigma2})
    return np.asarray(p, dtype=float) * np.asarray(h2, dtype=float) / sigma2


def interference_free_rate(st: Channel, params: SystemParams) -> np.ndarray:
    """N-user rate with the F-user silent: log2(1 + P_n·hn2/sigma2)."""
    return np.log1p(snr(params.p_n, st.hn2, params.sigma2)) / LN2


def n_user_active_rate(
    p_f: ArrayLike, st: Channel, params: SystemParams
) -> np.ndarray:
    """N-user rate while the F-user transmits at p_f: log2(1 + P_n·hn2/(p_f·hf2 + sigma2))."""
    interference = np.asarray(p_f, dtype=float) * st.hf2 + params.sigma2
    return np.log1p(params.p_n * st.hn2 / interference) / LN2


def n_user_bit_rate(
    alpha: ArrayLike, p_f: ArrayLike, st: Channel, params: SystemParams
) -> np.ndarray:
    """Time-shared N-user rate over a block (bits/s/Hz)."""
    alpha = np.asarray(alpha, dtype=float)
    return alpha * n_user_active_rate(p_f, st, params) + (1.0 - alpha) * interference_free_rate(st, params)


def rate_loss(p_f: ArrayLike, st: Channel, params: SystemParams) -> np.ndarray:
    """N-user rate lost while the F-user transmits at p_f (bits/s/Hz, >= 0)."""
    return interference_free_rate(st, params) - n_user_active_rate(p_f, st, params)


def semcom_rate(p: ArrayLike, st: Channel, params: SystemParams) -> np.ndarray:
    """F-user SemCom rate per unit time share at power p."""
    return effective_semantic_rate(params.sem, 1.0, snr(p, st.hf2, params.sigma2))


def bitcom_rate(p: ArrayLike, st: Channel, params: SystemParams) -> np.ndarray:
    """F-user BitCom equivalent semantic rate per unit time share at power p."""
    return equivalent_semantic_rate(params.bit, params.sem, 1.0, snr(p, st.hf2, params.sigma2))


def f_user_rates(
    rho: ArrayLike,
    alpha: ArrayLike,
    p: ArrayLike,
    st: Channel,
    params: SystemParams,
) -> np.ndarray:
    """Vectorised F-user semantic rate alpha·{rho·S_s + (1-rho)·S_b}."""
    rho = np.asarray(rho)
    per_unit = np.where(rho == 1, semcom_rate(p, st, params), bitcom_rate(p, st, params))
    return np.asarray(alpha, dtype=float) * per_unit


def f_user_semantic_rate(dec: PolicyDecision, st: FadingState, params: SystemParams) -> float:
    """Instantaneous F-user semantic rate (suts/s/Hz) for one decision."""
    return float(f_user_rates(dec.rho, dec.alpha, dec.p, st, params))


def all_off_ceiling(states: FadingStates, params: SystemParams) -> float:
    """Largest achievable ergodic N-user rate (the F-user never transmits)."""
    return float(np.mean(interference_free_rate(states, params)))


def policy_rates(
    policy: Policy, states: FadingStates, params: SystemParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-state (R(v), S(v)) arrays for a policy."""
    r = n_user_bit_rate(policy.alpha, policy.p, states, params)
    s = f_user_rates(policy.rho, policy.alpha, policy.p, states, params)
    return r, s

