"""Tests for the SvB rate-region boundary on the static channel."""

import numpy as np
import pytest

from semnoma.core.errors import InfeasibleError
from semnoma.core.link_model import interference_free_rate, n_user_bit_rate, static_state
from semnoma.core.rate_region import (
    REGION_COLUMNS,
    RegionObjective,
    RegionSpec,
    boundary_point,
    region_frame,
    sweep_boundary,
)


def _spec(p_f_max, objective=RegionObjective.SEMCOM):
    return RegionSpec(p_f_max=p_f_max, p_grid=81, alpha_grid=81, r_sweep=11, objective=objective)


def test_endpoints(params):
    """R_bar=0 uses full power and time; R_bar at the ceiling leaves nothing."""
    st = static_state(params)
    spec = _spec(0.1)
    points = sweep_boundary(spec, st, params)
    assert len(points) == 11
    assert points[0].r_bar == 0.0
    assert points[0].p_f == pytest.approx(0.1)
    assert points[0].alpha_f == 1.0
    assert points[0].s == pytest.approx(0.18625, abs=1e-4)
    assert points[-1].r_bar == pytest.approx(float(interference_free_rate(st, params)))
    assert points[-1].s == 0.0


def test_boundary_monotone_and_feasible(params):
    """The boundary is non-increasing and every reported point meets its target."""
    st = static_state(params)
    for objective in RegionObjective:
        points = sweep_boundary(_spec(10.0, objective), st, params)
        s = np.array([pt.s for pt in points])
        assert np.all(np.diff(s) <= 1e-12)
        for pt in points:
            r = float(n_user_bit_rate(pt.alpha_f, pt.p_f, st, params))
            assert r >= pt.r_bar - 1e-9


def test_semcom_dominates_at_low_budget(params):
    """With 0.1 W the SemCom region contains the BitCom region."""
    st = static_state(params)
    sem = sweep_boundary(_spec(0.1), st, params)
    bit = sweep_boundary(_spec(0.1, RegionObjective.BITCOM_EQUIVALENT), st, params)
    assert all(a.s >= b.s - 1e-12 for a, b in zip(sem, bit))
    assert sem[0].s > bit[0].s


def test_bitcom_wins_at_high_budget(params):
    """With 10 W BitCom reaches a higher F-user rate at R_bar=0."""
    st = static_state(params)
    sem = boundary_point(0.0, _spec(10.0), st, params)
    bit = boundary_point(0.0, _spec(10.0, RegionObjective.BITCOM_EQUIVALENT), st, params)
    assert bit.s > sem.s


def test_target_above_ceiling(params):
    st = static_state(params)
    with pytest.raises(InfeasibleError):
        boundary_point(20.0, _spec(1.0), st, params)


def test_region_frame_columns(params):
    st = static_state(params)
    df = region_frame(sweep_boundary(_spec(1.0), st, params), RegionObjective.SEMCOM)
    assert list(df.columns) == REGION_COLUMNS
    assert len(df) == 11
    assert set(df["objective"]) == {"semcom"}


def test_semcom_dominates_at_full_resolution(params):
    """On the default 401 x 401 grid with 41 targets the 0.1 W SemCom boundary lies above BitCom's."""
    st = static_state(params)
    sem = sweep_boundary(RegionSpec(p_f_max=0.1), st, params)
    bit = sweep_boundary(RegionSpec(p_f_max=0.1, objective=RegionObjective.BITCOM_EQUIVALENT), st, params)
    assert len(sem) == len(bit) == 41
    assert all(a.s >= b.s for a, b in zip(sem, bit))
    assert all(a.s > b.s for a, b in zip(sem[:-1], bit[:-1]))
