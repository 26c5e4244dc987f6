"""Shared fixtures: default system parameters, small fading instances and CLI configs."""

import numpy as np
import pytest
import yaml

from semnoma.core.link_model import (
    LinkGeometry,
    SystemParams,
    bitcom_rate,
    sample_states,
    semcom_rate,
)
from semnoma.core.semantic_model import SemComProfile, default_logistic_table


@pytest.fixture
def params() -> SystemParams:
    """Published defaults: K=5, eps_bar=0.9, 10 m / 30 m, -80 dBm noise."""
    return SystemParams(
        n_geom=LinkGeometry(distance_m=10.0),
        f_geom=LinkGeometry(distance_m=30.0),
        sem=SemComProfile(logistic=default_logistic_table()[5]),
    )


@pytest.fixture
def k4_params() -> SystemParams:
    """K=4 profile with a similarity floor below the 0 dB anchor."""
    return SystemParams(
        n_geom=LinkGeometry(distance_m=10.0),
        f_geom=LinkGeometry(distance_m=30.0),
        sem=SemComProfile(k=4, eps_bar=0.4, logistic=default_logistic_table()[4]),
    )


@pytest.fixture
def states(params):
    return sample_states(7, 200, params)


@pytest.fixture
def small_states(params):
    return sample_states(11, 12, params)


@pytest.fixture
def max_rate():
    """Largest single-state F-user rate at power p (either method)."""

    def _max(states, p, params) -> float:
        return float(np.max(np.maximum(semcom_rate(p, states, params), bitcom_rate(p, states, params))))

    return _max


@pytest.fixture
def config_file(tmp_path):
    """Small but complete run configuration for CLI tests."""
    data = {
        "monte_carlo": {"seed": 3, "state_count": 40},
        "region": {"p_f_max": [0.1, 10.0], "p_grid": 41, "alpha_grid": 41, "r_sweep": 5},
        "scenario1": {"p0": 2.0, "r_bar": 0.0},
        "scenario2": {
            "r_bar": 4.0,
            "p_avg": 1.0,
            "p_peak": 2.0,
            "power_grid": 101,
            "golden_iters": 20,
        },
        "figure": {"fig7_cases": [[4.0, 2.0], [8.0, 10.0]]},
        "oracle": {"states": 8, "power_levels": 11, "alpha_levels": 6},
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path
