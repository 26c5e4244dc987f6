"""
Run configuration: one YAML file validated into a pydantic tree.

Values are in human units (W, dBm, dB, m); every default is the published
parameter set. A key that is missing, misspelt or out of range raises
ConfigError naming the dotted key path.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from semnoma.core.errors import ParameterError, SemNomaError
from semnoma.core.experiments import FigureConfig, QuantGrid
from semnoma.core.link_model import LinkGeometry, SystemParams, dbm_to_watts
from semnoma.core.rate_region import RegionObjective, RegionSpec
from semnoma.core.scenario1 import Scenario1Config
from semnoma.core.scenario2 import Scenario2Config
from semnoma.core.semantic_model import (
    BitComProfile,
    LogisticParams,
    LogisticTable,
    SemComProfile,
    default_logistic_table,
)

logger = logging.getLogger(__name__)

MANIFEST_VERSION_KEY = "semnoma_version"


class ConfigError(SemNomaError):
    """Raised for unreadable or invalid run configuration."""

    def __init__(self, message: str, key: str, details: Optional[Dict[str, Any]] = None):
        self.key = key
        super().__init__(message, details)


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class SystemSection(_Section):
    p_n_w: float = Field(1.0, gt=0.0, description="N-user transmit power (W)")
    noise_dbm: float = Field(-80.0, description="Noise power (dBm)")
    n_distance_m: float = Field(10.0, gt=0.0, description="N-user to AP distance (m)")
    f_distance_m: float = Field(30.0, gt=0.0, description="F-user to AP distance (m)")
    rho0_db: float = Field(-30.0, description="Path loss at the 1 m reference (dB)")
    path_exp: float = Field(4.0, gt=0.0, description="Path-loss exponent")


def _default_logistic() -> List[LogisticParams]:
    return list(default_logistic_table().as_mapping().values())


class SemanticSection(_Section):
    i_suts: float = Field(1.0, gt=0.0, description="Semantic units per sentence")
    l_words: float = Field(1.0, gt=0.0, description="Words per sentence")
    k: int = Field(5, ge=1, description="Semantic symbols per word")
    eps_bar: float = Field(0.9, gt=0.0, le=1.0, description="Minimum required similarity")
    logistic: List[LogisticParams] = Field(default_factory=_default_logistic)


class MonteCarloSection(_Section):
    seed: int = Field(2024, ge=0)
    state_count: int = Field(10000, ge=1)


class RegionSection(_Section):
    p_f_max: List[float] = Field(default_factory=lambda: [0.1, 10.0])
    p_grid: int = Field(401, ge=2)
    alpha_grid: int = Field(401, ge=2)
    r_sweep: int = Field(41, ge=2)

    def specs(self) -> List[RegionSpec]:
        return [
            RegionSpec(
                p_f_max=p,
                p_grid=self.p_grid,
                alpha_grid=self.alpha_grid,
                r_sweep=self.r_sweep,
                objective=objective,
            )
            for objective in RegionObjective
            for p in self.p_f_max
        ]


class OracleSection(_Section):
    states: int = Field(16, ge=1, le=32, description="Fading states in the certified instance")
    power_levels: int = Field(21, ge=2)
    alpha_levels: int = Field(11, ge=2)
    tolerance: float = Field(0.02, ge=0.0, description="Allowed relative shortfall of the solver")

    @property
    def quant(self) -> QuantGrid:
        return QuantGrid(power_levels=self.power_levels, alpha_levels=self.alpha_levels)


class RunConfig(_Section):
    """Everything one command run needs, in human units."""

    system: SystemSection = SystemSection()
    semantic: SemanticSection = SemanticSection()
    bitcom: BitComProfile = BitComProfile()
    monte_carlo: MonteCarloSection = MonteCarloSection()
    region: RegionSection = RegionSection()
    scenario1: Scenario1Config = Scenario1Config()
    scenario2: Scenario2Config = Scenario2Config()
    figure: FigureConfig = FigureConfig()
    oracle: OracleSection = OracleSection()

    def system_params(self) -> SystemParams:
        """
        Model parameters in SI units.

        Raises:
            ConfigError: If the logistic table has no entry for the configured K.
        """
        sem = self.semantic
        try:
            logistic = LogisticTable(sem.logistic)[sem.k]
        except ParameterError as e:
            raise ConfigError(e.message, key="semantic.logistic", details=e.details)
        sys_ = self.system
        return SystemParams(
            p_n=sys_.p_n_w,
            sigma2=dbm_to_watts(sys_.noise_dbm),
            n_geom=LinkGeometry(distance_m=sys_.n_distance_m, rho0_db=sys_.rho0_db, path_exp=sys_.path_exp),
            f_geom=LinkGeometry(distance_m=sys_.f_distance_m, rho0_db=sys_.rho0_db, path_exp=sys_.path_exp),
            sem=SemComProfile(
                i_suts=sem.i_suts, l_words=sem.l_words, k=sem.k, eps_bar=sem.eps_bar, logistic=logistic
            ),
            bit=self.bitcom,
        )

    def with_overrides(self, seed: Optional[int] = None, state_count: Optional[int] = None) -> "RunConfig":
        """Copy with command-line / environment Monte Carlo overrides applied."""
        update = {}
        if seed is not None:
            update["seed"] = seed
        if state_count is not None:
            update["state_count"] = state_count
        if not update:
            return self
        data = self.model_dump()
        data["monte_carlo"].update(update)
        return _validate(data)

    def resolved(self) -> Dict[str, Any]:
        """Plain-data form for manifests; loads back to the same config."""
        return self.model_dump(mode="json")


def _validate(data: Dict[str, Any]) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(part) for part in err["loc"]) or "<root>"
        raise ConfigError(
            f"Invalid configuration at '{key}': {err['msg']}",
            key=key,
            details={"errors": e.error_count()},
        )
    cfg.system_params()
    return cfg


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Load and validate a run configuration (or a manifest written by a run).

    Raises:
        ConfigError: If the file is not valid YAML or a key is invalid.
        OSError: If the file cannot be read.
    """
    if path is None:
        logger.debug("No config file given; using built-in defaults")
        return _validate({})

    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed YAML in {path}: {e}", key="<root>")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"Top level of {path} must be a mapping", key="<root>")
    if MANIFEST_VERSION_KEY in data and "config" in data:
        data = data["config"]
    logger.info(f"Loaded run configuration from {path}")
    return _validate(data)
