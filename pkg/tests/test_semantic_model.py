"""Tests for the similarity surrogate and the semantic/bit rate conversions."""

import math

import numpy as np
import pytest

from semnoma.core.errors import CalibrationError, ParameterError
from semnoma.core.semantic_model import (
    BitComProfile,
    LogisticParams,
    LogisticTable,
    SemComProfile,
    calibrate_midpoint,
    default_logistic_table,
    effective_semantic_rate,
    equivalent_semantic_rate,
    semcom_bitcom_gap,
    similarity,
    threshold_snr,
)

K5 = LogisticParams(k=5, a1=0.1, a2=0.98, c1=0.25, c2=-0.25)


def test_similarity_bounded_and_increasing():
    """Similarity stays between the asymptotes and grows with SNR."""
    gamma = np.linspace(0.0, 60.0, 200)
    eps = similarity(K5, gamma)
    assert np.all(eps > K5.a1)
    assert np.all(eps <= K5.a2)
    assert np.all(np.diff(eps) >= 0.0)


def test_calibrate_midpoint_hits_anchor():
    """Refitting c2 puts the curve through the 0 dB anchor."""
    base = LogisticParams(k=4, a1=0.1, a2=0.95, c1=0.3, c2=0.0)
    fitted = calibrate_midpoint(base, 1.0, 0.5)
    assert fitted.c2 == pytest.approx(-math.log(1.125) - 0.3, rel=1e-12)
    assert fitted.c2 == pytest.approx(-0.41778, abs=1e-4)
    assert float(similarity(fitted, 1.0)) == pytest.approx(0.5, abs=1e-12)
    assert fitted.a1 == base.a1 and fitted.c1 == base.c1


@pytest.mark.parametrize("eps", [0.1, 0.95, 0.05, 0.99])
def test_calibrate_rejects_anchor_outside_asymptotes(eps):
    """Anchors on or beyond an asymptote cannot be reached."""
    base = LogisticParams(k=4, a1=0.1, a2=0.95, c1=0.3, c2=0.0)
    with pytest.raises(CalibrationError):
        calibrate_midpoint(base, 1.0, eps)


def test_logistic_params_validation():
    """Asymptotes must be ordered and inside (0, 1]; growth must be positive."""
    with pytest.raises(ValueError):
        LogisticParams(k=5, a1=0.9, a2=0.5, c1=0.2, c2=0.0)
    with pytest.raises(ValueError):
        LogisticParams(k=5, a1=0.1, a2=0.9, c1=0.0, c2=0.0)


def test_profile_rejects_mismatched_k():
    """A fit for K=4 cannot serve a K=5 profile."""
    with pytest.raises(ValueError):
        SemComProfile(k=5, logistic=default_logistic_table()[4])


def test_logistic_table_lookup():
    """Lookup by K; a missing K raises with the available keys."""
    table = default_logistic_table()
    assert 4 in table and 5 in table
    assert table[5] == K5
    with pytest.raises(ParameterError) as exc_info:
        table[3]
    assert exc_info.value.details == {"available": [4, 5]}
    assert "K=3" in str(exc_info.value)


def test_logistic_table_last_entry_wins():
    table = LogisticTable([K5, K5.model_copy(update={"c1": 0.5})])
    assert table[5].c1 == 0.5


def test_threshold_snr_default_k5():
    """K=5 fit reaches eps_bar=0.9 at gamma = (ln 10 + 0.25) / 0.25."""
    profile = SemComProfile(logistic=K5)
    gamma_c = threshold_snr(profile)
    assert gamma_c == pytest.approx((math.log(10.0) + 0.25) / 0.25, rel=1e-12)
    assert gamma_c == pytest.approx(10.21, abs=0.01)
    assert float(similarity(K5, gamma_c)) == pytest.approx(0.9, abs=1e-12)


def test_threshold_snr_limits():
    """Floors outside the curve's range give 0 or infinity."""
    assert threshold_snr(SemComProfile(logistic=K5, eps_bar=0.05)) == 0.0
    assert threshold_snr(SemComProfile(logistic=K5, eps_bar=0.99)) == math.inf


def test_effective_rate_gating():
    """Rate is zero below the floor, at zero SNR and for alpha=0; scale·eps otherwise."""
    profile = SemComProfile(logistic=K5)
    gamma = np.array([0.0, 5.0, 100.0])
    rate = effective_semantic_rate(profile, 1.0, gamma)
    assert rate[0] == 0.0
    assert rate[1] == 0.0
    assert rate[2] == pytest.approx(0.2 * float(similarity(K5, 100.0)))
    assert float(effective_semantic_rate(profile, 0.0, 100.0)) == 0.0
    assert float(effective_semantic_rate(profile, 0.5, 100.0)) == pytest.approx(rate[2] / 2)


def test_effective_rate_zero_snr_even_without_floor():
    """Nothing is received at gamma=0 even if the floor is below a1."""
    profile = SemComProfile(logistic=K5, eps_bar=0.05)
    assert float(effective_semantic_rate(profile, 1.0, 0.0)) == 0.0


def test_equivalent_rate_at_0db():
    """log2(2)·I/(mu·L)·eps_c = 1/40 at gamma = 1."""
    profile = SemComProfile(logistic=K5)
    assert float(equivalent_semantic_rate(BitComProfile(), profile, 1.0, 1.0)) == pytest.approx(0.025)
    assert float(equivalent_semantic_rate(BitComProfile(), profile, 1.0, 0.0)) == 0.0
    half = equivalent_semantic_rate(BitComProfile(eps_c=0.5), profile, 1.0, 1.0)
    assert float(half) == pytest.approx(0.0125)


def test_gap_at_anchor_k4():
    """At the K=4 anchor SemCom delivers 1/8 against BitCom's 1/40."""
    profile = SemComProfile(k=4, eps_bar=0.4, logistic=default_logistic_table()[4])
    gap = semcom_bitcom_gap(BitComProfile(), profile, 1.0)
    assert float(gap) == pytest.approx(-0.1, abs=1e-9)


def test_gap_changes_sign_with_snr():
    """SemCom wins at low SNR, BitCom at very high SNR."""
    profile = SemComProfile(logistic=K5)
    gap = semcom_bitcom_gap(BitComProfile(), profile, np.array([12.346, 1234.6]))
    assert gap[0] < 0.0
    assert gap[1] > 0.0


def test_similarity_strictly_increasing_for_random_fits():
    """Any valid fit is strictly increasing away from saturation and bounded by its asymptotes."""
    rng = np.random.default_rng(23)
    for _ in range(200):
        a1 = rng.uniform(0.01, 0.5)
        fit = LogisticParams(
            k=5, a1=a1, a2=rng.uniform(a1 + 0.05, 1.0), c1=rng.uniform(0.05, 1.0), c2=rng.uniform(-5.0, 5.0)
        )
        # logistic argument kept inside [-20, 19] so one unit of argument is always resolvable
        x = rng.uniform(max(-20.0, fit.c2), 19.0, 50)
        gamma = (x - fit.c2) / fit.c1
        lower = similarity(fit, gamma)
        upper = similarity(fit, gamma + 1.0 / fit.c1)
        assert np.all(upper > lower)
        assert np.all((lower >= fit.a1) & (upper <= fit.a2 + 1e-15))


def test_semantic_rate_never_exceeds_ceiling():
    """alpha·I·eps/(K·L) stays below I·a2/(K·L) for every SNR and time share."""
    rng = np.random.default_rng(29)
    profile = SemComProfile(i_suts=2.0, l_words=3.0, k=4, eps_bar=0.4, logistic=default_logistic_table()[4])
    gamma = rng.exponential(50.0, 10_000)
    alpha = rng.uniform(0.0, 1.0, 10_000)
    rate = effective_semantic_rate(profile, alpha, gamma)
    ceiling = profile.i_suts * profile.logistic.a2 / (profile.k * profile.l_words)
    assert np.all(rate >= 0.0)
    assert np.all(rate <= ceiling * (1.0 + 1e-12))
