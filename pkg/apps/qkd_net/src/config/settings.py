import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.domain.entanglement import LinkModel
from src.domain.postprocess import DistillationOptions, LambdaMode
from src.domain.routing.balancing import BalancerParams
from src.domain.topology import PlacementPreset, Topology, build_topology
from src.exceptions import ConfigError, PlacementError

logger = logging.getLogger(__name__)


class LinkOverride(BaseModel):
    a: Tuple[int, int]
    b: Tuple[int, int]
    length_km: float = Field(gt=0)


class SimConfig(BaseSettings):
    """
    Effective configuration of one simulation run.

    Sources, highest first: CLI flags, config file, QKDNET_* environment, defaults.
    """
    model_config = SettingsConfigDict(env_prefix="QKDNET_", env_file=".env", extra="forbid")

    lattice_size: int = Field(7, ge=2)
    preset: PlacementPreset = PlacementPreset.ONE_TN_IDEAL
    custom_positions: List[Tuple[int, int]] = Field(default_factory=list)
    link_length_km: float = Field(1.0, gt=0)
    link_overrides: List[LinkOverride] = Field(default_factory=list)
    alpha: float = Field(0.15, ge=0)
    success_prob: Optional[float] = Field(None, ge=0, le=1)
    decoherence: float = Field(0.0, ge=0, le=1)
    bsm_success: float = Field(0.85, ge=0, le=1)
    rounds: int = Field(1_000_000, ge=1)

    policy: Literal["static", "dynamic"] = "static"
    balancer: Literal["surplus", "bottleneck"] = "surplus"
    sigma: float = Field(0.15, ge=0)
    delta: float = Field(0.05, ge=0)
    theta: float = Field(0.75, gt=0, lt=1)
    priority_cadence: int = Field(1, ge=1)

    segmenting: bool = False
    segment_width: int = Field(1, ge=1)
    cad: bool = False
    cad_max: int = Field(8, ge=1)
    cad_lambda: Literal["worst-case", "werner"] = "worst-case"
    lambda_grid: int = Field(1000, ge=1)

    seed: int = Field(0, ge=0)
    bit_sampling: bool = False
    check_paths: bool = False

    @field_validator("preset", mode="before")
    @classmethod
    def parse_preset(cls, v):
        if isinstance(v, PlacementPreset):
            return v
        try:
            return PlacementPreset.parse(str(v))
        except PlacementError as e:
            raise ValueError(str(e))

    @field_validator("policy", "balancer", "cad_lambda", mode="before")
    @classmethod
    def lowercase(cls, v):
        return v.strip().lower() if isinstance(v, str) else v

    def link_model(self) -> LinkModel:
        return LinkModel(
            alpha=self.alpha,
            length_km=self.link_length_km,
            success_prob=self.success_prob,
            decoherence=self.decoherence,
        )

    def balancer_params(self) -> BalancerParams:
        return BalancerParams(sigma=self.sigma, delta=self.delta, theta=self.theta)

    def distillation_options(self) -> DistillationOptions:
        return DistillationOptions(
            segmenting=self.segmenting,
            cad=self.cad,
            C_max=self.cad_max,
            segment_width=self.segment_width,
            lambda_grid=self.lambda_grid,
            lambda_mode=LambdaMode(self.cad_lambda),
        )

    def topology(self) -> Topology:
        overrides = {(o.a, o.b): o.length_km for o in self.link_overrides}
        return build_topology(
            self.lattice_size,
            self.preset,
            self.link_length_km,
            custom_positions=self.custom_positions,
            link_lengths=overrides,
        )

    def with_overrides(self, **values: Any) -> "SimConfig":
        """Validated copy; environment and config file are not consulted again"""
        try:
            return type(self).model_validate({**self.model_dump(), **values})
        except ValidationError as e:
            raise _config_error(e) from None

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def _config_error(e: ValidationError) -> ConfigError:
    first = e.errors()[0]
    field = ".".join(str(part) for part in first.get("loc", ())) or "config"
    return ConfigError(field, first.get("msg", str(e)))


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except yaml.YAMLError as e:
        raise ConfigError("config", f"malformed YAML in {path}: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a mapping of field names to values")
    return data


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> SimConfig:
    """Merge config file and flag overrides on top of environment and defaults"""
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
        logger.info(f"Loaded config file {path}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return SimConfig(**values)
    except ValidationError as e:
        raise _config_error(e) from None
