import os
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from loguru import logger
from pydantic import BaseModel, field_validator, model_validator

from .process import ProcessSpec, builtin_process, make_process

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "config.yaml"
PRESET_DIR = Path(__file__).resolve().parent.parent / "configs" / "presets"
OUTPUT_DIR_ENV = "UPX_OUTPUT_DIR"


def read_config(config_path) -> dict:
    """
    Read and parse a YAML configuration file.

    Args:
        config_path (str): Path to the YAML configuration file

    Returns:
        dict: Parsed configuration data (empty for an empty file)

    Raises:
        FileNotFoundError: If the file does not exist
        yaml.YAMLError: If the file is not valid YAML
    """
    try:
        with open(config_path, "r") as file:
            config = yaml.safe_load(file)
    except yaml.YAMLError as e:
        logger.error(f"Error parsing YAML file {config_path}: {e}")
        raise
    except FileNotFoundError:
        logger.error(f"Configuration file not found: {config_path}")
        raise
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ValueError(f"{config_path}: expected a key-value mapping at top level")
    return config


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    process: str = "iid"
    d: int = 1
    lags: Optional[list[list[int]]] = None
    n: int = 10_000
    replicates: int = 2000
    tau_prime: list[float] = [1.0]
    blocks: Union[int, Literal["sqrt"]] = "sqrt"
    scale: Optional[float] = None
    epsilon_grid: Optional[list[float]] = None
    n_grid: Optional[list[int]] = None
    shift: Optional[int] = None
    seed: int = 0
    output_dir: str = "results"
    formats: list[Literal["json", "csv"]] = ["json", "csv"]
    num_workers: int = 4

    @field_validator("n")
    @classmethod
    def _check_n(cls, v):
        if v < 2:
            raise ValueError(f"n must be >= 2, got {v}")
        return v

    @field_validator("replicates")
    @classmethod
    def _check_replicates(cls, v):
        if v < 1:
            raise ValueError(f"replicates must be >= 1, got {v}")
        return v

    @field_validator("num_workers")
    @classmethod
    def _check_workers(cls, v):
        if v < 1:
            raise ValueError(f"num_workers must be >= 1, got {v}")
        return v

    @field_validator("scale")
    @classmethod
    def _check_scale(cls, v):
        if v is not None and v <= 0:
            raise ValueError(f"scale must be positive, got {v}")
        return v

    @field_validator("epsilon_grid")
    @classmethod
    def _check_epsilon_grid(cls, v):
        if v is not None:
            if not v or any(e <= 0 for e in v) or any(b >= a for a, b in zip(v, v[1:])):
                raise ValueError(f"epsilon_grid must be positive and strictly decreasing, got {v}")
        return v

    @field_validator("n_grid")
    @classmethod
    def _check_n_grid(cls, v):
        if v is not None:
            if not v or v[0] < 2 or any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError(f"n_grid must be strictly increasing with entries >= 2, got {v}")
        return v

    @model_validator(mode="after")
    def _check_consistency(self):
        spec = self.process_spec()
        if len(self.tau_prime) != spec.d:
            raise ValueError(f"tau_prime must have {spec.d} entries for process '{spec.name}', got {len(self.tau_prime)}")
        for j, rate in enumerate(self.tau_prime):
            if not 0 < rate < self.n:
                raise ValueError(f"tau_prime[{j}] must lie in (0, n={self.n}), got {rate}")
        if self.blocks != "sqrt" and not 1 <= self.blocks <= self.n:
            raise ValueError(f"blocks must be 'sqrt' or lie in [1, n={self.n}], got {self.blocks}")
        if self.shift is not None and not 1 <= self.shift <= self.n - 2:
            raise ValueError(f"shift must lie in [1, n-2={self.n - 2}], got {self.shift}")
        return self

    def process_spec(self) -> ProcessSpec:
        if self.process == "custom":
            if not self.lags:
                raise ValueError("lags must be given when process is 'custom'")
            return make_process(self.lags, name=self.name)
        return builtin_process(self.process, d=self.d)


def load_experiment_configs(config_path=None, overrides: Optional[dict] = None) -> list[ExperimentConfig]:
    """Defaults < config file < overrides; a file with `experiments:` yields one config per entry."""
    defaults = read_config(DEFAULT_CONFIG) if DEFAULT_CONFIG.exists() else {}
    if os.environ.get(OUTPUT_DIR_ENV):
        defaults["output_dir"] = os.environ[OUTPUT_DIR_ENV]
    data = read_config(config_path) if config_path else {}
    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}

    entries = data.pop("experiments", None) or [{}]
    configs = []
    for index, entry in enumerate(entries):
        merged = {**defaults, **data, **entry, **overrides}
        if len(entries) > 1:
            merged["name"] = entry.get("name", f"experiment-{index + 1}")
            merged["output_dir"] = str(Path(merged.get("output_dir", "results")) / merged["name"])
        configs.append(ExperimentConfig(**merged))
    return configs


def preset_path(name: str) -> Path:
    path = PRESET_DIR / f"{name}.yaml"
    if not path.exists():
        available = sorted(p.stem for p in PRESET_DIR.glob("*.yaml"))
        raise ValueError(f"preset: unknown preset '{name}', expected one of {available}")
    return path
