"""
Configuration Module

This module loads experiment configurations from YAML (or JSON) files,
with environment defaults read through python-dotenv.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, model_validator

from ness_dmrg.core.dmrg import SweepSchedule
from ness_dmrg.core.liouvillian import ModelParams, normalize_param_keys
from ness_dmrg.core.superspace import OrderingKind, OrderingScheme

logger = logging.getLogger("ness_dmrg.config")

ENV_LOG_LEVEL = "NESS_DMRG_LOG_LEVEL"
ENV_WORKERS = "NESS_DMRG_WORKERS"
ENV_OUTPUT_DIR = "NESS_DMRG_OUTPUT_DIR"

ExperimentKind = Literal["single", "gamma_scan", "size_scan", "ordering_compare"]


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


def _env_workers() -> int:
    value = os.getenv(ENV_WORKERS, "1")
    try:
        return max(int(value), 1)
    except ValueError:
        raise ConfigError(f"{ENV_WORKERS} must be an integer, got '{value}'")


class ScanConfig(BaseModel):
    """Values swept by the scan experiments."""

    gamma_values: List[float] = Field(default_factory=list, description="Bath rates for gamma_scan")
    drives: List[Tuple[float, float]] = Field(
        default_factory=list, description="(f1, fN) pairs for gamma_scan; defaults to the model's"
    )
    sizes: List[int] = Field(default_factory=list, description="Chain lengths for size_scan")


class ExperimentConfig(BaseModel):
    """A complete experiment description."""

    model: Dict[str, Any] = Field(..., description="ModelParams fields (scalars or arrays)")
    scheme: OrderingKind = Field(OrderingKind.RLN, description="Superspace ordering")
    schedule: SweepSchedule = Field(default_factory=SweepSchedule, description="Sweep schedule")
    experiment: ExperimentKind = Field("single", description="Experiment to run")
    scan: ScanConfig = Field(default_factory=ScanConfig, description="Scan values")
    output_dir: str = Field(
        default_factory=lambda: os.getenv(ENV_OUTPUT_DIR, "results"), description="Output directory"
    )
    seed: int = Field(0, description="Seed for randomized start states")
    workers: int = Field(default_factory=_env_workers, ge=1, description="Parallel scan workers")
    allow_unconverged: bool = Field(False, description="Exit 0 even when a run did not converge")

    @model_validator(mode="before")
    @classmethod
    def _scheme_case(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("scheme"), str):
            data = dict(data, scheme=data["scheme"].upper())
        return data

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.experiment == "gamma_scan" and not self.scan.gamma_values:
            raise ValueError("gamma_scan needs scan.gamma_values")
        if self.experiment == "size_scan" and not self.scan.sizes:
            raise ValueError("size_scan needs scan.sizes")
        if self.experiment == "size_scan":
            for n in self.scan.sizes:
                self.model_params(n_sites=n)
        else:
            self.model_params()
        return self

    def model_params(self, **overrides) -> ModelParams:
        """ModelParams from the model section with overrides applied."""
        data = normalize_param_keys(self.model)
        data.update(normalize_param_keys(overrides))
        return ModelParams.model_validate(data)

    def ordering(self, n_sites: int, kind: Optional[OrderingKind] = None) -> OrderingScheme:
        return OrderingScheme(kind=kind or self.scheme, n_phys=n_sites)


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load and validate an experiment configuration.

    Args:
        path: YAML or JSON file
        overrides: Top-level keys that replace file values (CLI flags)

    Returns:
        The validated configuration
    """
    load_dotenv()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}")

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark is not None else str(path)
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"{where}: {problem}")

    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping, got {type(data).__name__}")
    if overrides:
        data.update({key: value for key, value in overrides.items() if value is not None})

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{path}: {_format_validation_error(e)}")
    logger.debug("Loaded %s experiment from %s", config.experiment, path)
    return config
