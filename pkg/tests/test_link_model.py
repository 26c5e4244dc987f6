"""Tests for path loss, fading-state sampling and the instantaneous NOMA rates."""

import math

import numpy as np
import pytest

from semnoma.core.errors import ArgumentError
from semnoma.core.link_model import (
    FadingState,
    FadingStates,
    Gains,
    LinkGeometry,
    Policy,
    PolicyDecision,
    all_off_ceiling,
    as_states,
    bitcom_rate,
    dbm_to_watts,
    f_user_rates,
    f_user_semantic_rate,
    interference_free_rate,
    n_user_active_rate,
    n_user_bit_rate,
    path_loss,
    policy_rates,
    rate_loss,
    sample_states,
    semcom_rate,
    snr,
    static_state,
)
from semnoma.core.semantic_model import SemComProfile, default_logistic_table


def test_path_loss_and_noise():
    """-30 dB at 1 m with exponent 4."""
    assert path_loss(LinkGeometry(distance_m=10.0)) == pytest.approx(1e-7)
    assert path_loss(LinkGeometry(distance_m=30.0)) == pytest.approx(1e-3 / 30.0**4)
    assert dbm_to_watts(-80.0) == pytest.approx(1e-11)


def test_static_rates(params):
    """Interference-free N-user rate is log2(1 + 1e4) on the static channel."""
    st = static_state(params)
    assert float(interference_free_rate(st, params)) == pytest.approx(math.log2(1.0 + 1e4))
    assert float(snr(0.1, st.hf2, params.sigma2)) == pytest.approx(12.3457, rel=1e-4)


def test_static_method_rates(params):
    """SemCom beats BitCom at 0.1 W; BitCom wins at 10 W."""
    st = static_state(params)
    assert float(semcom_rate(0.1, st, params)) == pytest.approx(0.18625, abs=1e-4)
    assert float(bitcom_rate(0.1, st, params)) == pytest.approx(0.0935, abs=1e-4)
    assert float(bitcom_rate(10.0, st, params)) > float(semcom_rate(10.0, st, params))


def test_n_user_rate_decreasing_in_f_power(params):
    """Interference from the F-user only lowers the N-user rate."""
    st = static_state(params)
    p = np.linspace(0.0, 10.0, 50)
    r = n_user_active_rate(p, st, params)
    assert r[0] == pytest.approx(float(interference_free_rate(st, params)))
    assert np.all(np.diff(r) < 0.0)
    assert np.all(rate_loss(p, st, params) >= 0.0)


def test_time_shared_rate_interpolates(params):
    """alpha=0 gives the interference-free rate, alpha=1 the active rate."""
    st = static_state(params)
    r0 = float(interference_free_rate(st, params))
    r_on = float(n_user_active_rate(2.0, st, params))
    assert float(n_user_bit_rate(0.0, 2.0, st, params)) == pytest.approx(r0)
    assert float(n_user_bit_rate(1.0, 2.0, st, params)) == pytest.approx(r_on)
    assert float(n_user_bit_rate(0.25, 2.0, st, params)) == pytest.approx(0.25 * r_on + 0.75 * r0)


def test_snr_rejects_zero_noise():
    with pytest.raises(ArgumentError):
        snr(1.0, 1e-7, 0.0)


def test_sample_states_reproducible(params):
    """Same seed, same states; gains have the configured mean."""
    a = sample_states(5, 20000, params)
    b = sample_states(5, 20000, params)
    np.testing.assert_array_equal(a.hn2, b.hn2)
    np.testing.assert_array_equal(a.hf2, b.hf2)
    assert list(a.index[:3]) == [0, 1, 2]
    assert np.mean(a.hn2) == pytest.approx(1e-7, rel=0.05)
    assert np.mean(a.hf2) == pytest.approx(path_loss(params.f_geom), rel=0.05)


def test_sample_states_rejects_empty(params):
    with pytest.raises(ArgumentError):
        sample_states(1, 0, params)


def test_fading_states_is_read_only(states):
    """Batches are immutable and index like a sequence of FadingState."""
    with pytest.raises(ValueError):
        states.hn2[0] = 1.0
    first = states[0]
    assert isinstance(first, FadingState)
    assert first.hn2 == float(states.hn2[0])
    assert len(states[2:5]) == 3
    assert [s.index for s in list(states)[:2]] == [0, 1]


def test_fading_states_validation():
    with pytest.raises(ArgumentError):
        FadingStates([0, 1], [1e-7], [1e-9, 1e-9])
    with pytest.raises(ArgumentError):
        FadingStates([0], [-1e-7], [1e-9])


def test_as_states_coercion(params):
    """A single state and a list both become batches; empty input is rejected."""
    st = static_state(params)
    assert len(as_states(st)) == 1
    assert len(as_states([st, st])) == 2
    with pytest.raises(ArgumentError):
        as_states([])


def test_f_user_rates_select_method(params, small_states):
    """rho picks SemCom or BitCom per state; alpha scales linearly."""
    rho = np.array([1, 0] * 6)
    rates = f_user_rates(rho, 0.5, 2.0, small_states, params)
    sem = semcom_rate(2.0, small_states, params)
    bit = bitcom_rate(2.0, small_states, params)
    np.testing.assert_allclose(rates, 0.5 * np.where(rho == 1, sem, bit))


def test_single_decision_rate(params):
    st = static_state(params)
    dec = PolicyDecision(rho=1, alpha=0.5, p=0.1)
    assert f_user_semantic_rate(dec, st, params) == pytest.approx(0.5 * float(semcom_rate(0.1, st, params)))


def test_policy_round_trip_and_rates(params, small_states):
    """Column-wise policies expose per-state decisions and rates."""
    decisions = [PolicyDecision(rho=i % 2, alpha=0.5, p=1.0) for i in range(len(small_states))]
    policy = Policy.from_decisions(decisions)
    assert len(policy) == len(small_states)
    assert policy.decisions == decisions
    r, s = policy_rates(policy, small_states, params)
    np.testing.assert_allclose(r, n_user_bit_rate(0.5, 1.0, small_states, params))
    assert r.shape == s.shape == (len(small_states),)


def test_all_off_ceiling(params, states):
    assert all_off_ceiling(states, params) == pytest.approx(float(np.mean(interference_free_rate(states, params))))


def test_decision_validation():
    with pytest.raises(ValueError):
        PolicyDecision(rho=2, alpha=0.5, p=1.0)
    with pytest.raises(ValueError):
        PolicyDecision(rho=0, alpha=1.5, p=1.0)


def test_n_user_rate_non_increasing_over_random_states(params):
    """For any gains and time share, more F-user power never helps the N-user."""
    rng = np.random.default_rng(17)
    n = 10_000
    gains = Gains(rng.exponential(1e-7, n)[:, None], rng.exponential(1e-9, n)[:, None])
    alpha = rng.uniform(0.0, 1.0, n)[:, None]
    p = np.sort(rng.uniform(0.0, 10.0, (n, 8)), axis=1)
    r = n_user_bit_rate(alpha, p, gains, params)
    assert np.all(np.diff(r, axis=1) <= 0.0)
    assert np.all(r <= interference_free_rate(gains, params) + 1e-12)


def test_semcom_rate_zero_at_zero_power(params):
    """p = 0 carries nothing even when the similarity floor sits below the curve's lower asymptote."""
    low_floor = params.model_copy(
        update={"sem": SemComProfile(eps_bar=0.05, logistic=default_logistic_table()[5])}
    )
    st = static_state(low_floor)
    assert float(semcom_rate(0.0, st, low_floor)) == 0.0
    assert float(f_user_semantic_rate(PolicyDecision(rho=1, alpha=1.0, p=0.0), st, low_floor)) == 0.0
    assert float(semcom_rate(1e-6, st, low_floor)) > 0.0
