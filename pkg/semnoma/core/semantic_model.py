"""
Semantic-similarity surrogate and the semantic/bit rate conversions.

The similarity of the semantic decoder is modelled per K (semantic symbols
per word) by a generalized logistic curve in the received SNR. Rates are in
suts/s/Hz; every function accepts scalars or numpy arrays.
"""

import logging
import math
from typing import Dict, Iterable, Mapping

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from semnoma.core.errors import CalibrationError, ParameterError

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


class LogisticParams(BaseModel):
    """Generalized-logistic similarity fit for one value of K."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(..., ge=1, description="Semantic symbols per word")
    a1: float = Field(..., description="Lower asymptote")
    a2: float = Field(..., description="Upper asymptote")
    c1: float = Field(..., description="Logistic growth rate")
    c2: float = Field(..., description="Logistic midpoint offset")

    @model_validator(mode="after")
    def check_shape(self) -> "LogisticParams":
        if not 0.0 < self.a1 < self.a2 <= 1.0:
            raise ParameterError(
                "Asymptotes must satisfy 0 < a1 < a2 <= 1",
                details={"a1": self.a1, "a2": self.a2},
            )
        if self.c1 <= 0.0:
            raise ParameterError("Growth rate c1 must be positive", details={"c1": self.c1})
        return self


class SemComProfile(BaseModel):
    """Sentence statistics and similarity requirement of the semantic link."""

    model_config = ConfigDict(frozen=True)

    i_suts: float = Field(1.0, gt=0.0, description="Semantic units per sentence (I)")
    l_words: float = Field(1.0, gt=0.0, description="Words per sentence (L)")
    k: int = Field(5, ge=1, description="Semantic symbols per word (K)")
    eps_bar: float = Field(0.9, gt=0.0, le=1.0, description="Minimum required similarity")
    logistic: LogisticParams

    @model_validator(mode="after")
    def check_k(self) -> "SemComProfile":
        if self.logistic.k != self.k:
            raise ParameterError(
                "Logistic parameters were fitted for a different K",
                details={"k": self.k, "logistic.k": self.logistic.k},
            )
        return self

    @property
    def scale(self) -> float:
        """I/(K·L): the semantic rate per unit similarity."""
        return self.i_suts / (self.k * self.l_words)


class BitComProfile(BaseModel):
    """Conversion of a bit rate into an equivalent semantic rate."""

    model_config = ConfigDict(frozen=True)

    mu: float = Field(40.0, gt=0.0, description="Bits per word")
    eps_c: float = Field(1.0, gt=0.0, le=1.0, description="Similarity achieved by BitCom")


class LogisticTable:
    """Per-K lookup of logistic fits."""

    def __init__(self, entries: Iterable[LogisticParams]):
        self._entries: Dict[int, LogisticParams] = {p.k: p for p in entries}

    def __getitem__(self, k: int) -> LogisticParams:
        try:
            return self._entries[k]
        except KeyError:
            raise ParameterError(
                f"No logistic parameters for K={k}",
                details={"available": sorted(self._entries)},
            )

    def __contains__(self, k: object) -> bool:
        return k in self._entries

    def as_mapping(self) -> Mapping[int, LogisticParams]:
        return dict(self._entries)


def similarity(params: LogisticParams, gamma: ArrayLike) -> np.ndarray:
    """
    Approximate semantic similarity at linear SNR `gamma`.

    Args:
        params: Logistic fit for the configured K.
        gamma: Received linear SNR (>= 0), scalar or array.

    Returns:
        Similarity strictly between a1 and a2.
    """
    gamma = np.asarray(gamma, dtype=float)
    return params.a1 + (params.a2 - params.a1) * expit(params.c1 * gamma + params.c2)


def effective_semantic_rate(
    profile: SemComProfile, alpha: ArrayLike, gamma: ArrayLike
) -> np.ndarray:
    """
    Semantic rate gated by the minimum-similarity indicator.

    The rate is exactly 0 when the similarity falls below eps_bar, when
    alpha is 0, or when nothing is received (gamma == 0).
    """
    gamma = np.asarray(gamma, dtype=float)
    eps = similarity(profile.logistic, gamma)
    valid = (eps >= profile.eps_bar) & (gamma > 0.0)
    return np.asarray(alpha, dtype=float) * profile.scale * np.where(valid, eps, 0.0)


def equivalent_semantic_rate(
    bp: BitComProfile, profile: SemComProfile, alpha: ArrayLike, gamma: ArrayLike
) -> np.ndarray:
    """BitCom rate expressed in suts/s/Hz: alpha·log2(1+gamma)·I/(mu·L)·eps_c."""
    gamma = np.asarray(gamma, dtype=float)
    bits = np.log1p(gamma) / LN2
    return np.asarray(alpha, dtype=float) * bits * (profile.i_suts / (bp.mu * profile.l_words)) * bp.eps_c


def semcom_bitcom_gap(bp: BitComProfile, profile: SemComProfile, gamma: ArrayLike) -> np.ndarray:
    """
    Per-unit gap s^B - s between BitCom and SemCom (indicator dropped).

    Negative values mean SemCom delivers more semantic information.
    """
    gamma = np.asarray(gamma, dtype=float)
    return bp.eps_c * np.log1p(gamma) / LN2 / bp.mu - similarity(profile.logistic, gamma) / profile.k


def calibrate_midpoint(
    params: LogisticParams, gamma_anchor: float, eps_anchor: float
) -> LogisticParams:
    """
    Refit c2 so that the curve passes through (gamma_anchor, eps_anchor).

    Raises:
        CalibrationError: If eps_anchor is not strictly between the asymptotes.
    """
    if not params.a1 < eps_anchor < params.a2:
        raise CalibrationError(
            "Anchor similarity must lie strictly between the asymptotes",
            details={"eps_anchor": eps_anchor, "a1": params.a1, "a2": params.a2},
        )
    c2 = -math.log((params.a2 - params.a1) / (eps_anchor - params.a1) - 1.0) - params.c1 * gamma_anchor
    logger.debug(f"Calibrated K={params.k} midpoint: c2={c2:.6g}")
    return params.model_copy(update={"c2": c2})


def threshold_snr(profile: SemComProfile) -> float:
    """Linear SNR at which the similarity reaches eps_bar (0 or inf outside the curve's range)."""
    p = profile.logistic
    if profile.eps_bar <= p.a1:
        return 0.0
    if profile.eps_bar >= p.a2:
        return math.inf
    logit = -math.log((p.a2 - p.a1) / (profile.eps_bar - p.a1) - 1.0)
    return max((logit - p.c2) / p.c1, 0.0)


def default_logistic_table() -> LogisticTable:
    """
    Placeholder fits for K=4 and K=5.

    K=4 is pinned to similarity 0.5 at 0 dB; K=5 keeps a2 above the default
    eps_bar of 0.9 so SemCom is feasible at high SNR.
    """
    k4 = calibrate_midpoint(LogisticParams(k=4, a1=0.1, a2=0.95, c1=0.3, c2=0.0), 1.0, 0.5)
    k5 = LogisticParams(k=5, a1=0.1, a2=0.98, c1=0.25, c2=-0.25)
    return LogisticTable([k4, k5])
