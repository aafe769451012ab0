from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from services.errors import ContractError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ClusteringConfig(_Section):
    restarts: int = 10
    seed: int = 42
    improvement_eps: float = 1e-12
    max_passes: int = 1000
    threads: int = 0  # 0 = all cores

    @field_validator("restarts", "max_passes")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v


class RetrievalConfig(_Section):
    seq_len: int = 3

    @field_validator("seq_len")
    @classmethod
    def _seq_len(cls, v: int) -> int:
        if v < 1:
            raise ValueError("sequence length must be at least 1")
        return v


class ToleranceConfig(_Section):
    mode: Literal["frame", "gps"] = "frame"
    frame_tol: int = 2  # frames
    gps_tol: float = 0.0002  # degrees, Manhattan

    @property
    def tol(self) -> float:
        return self.frame_tol if self.mode == "frame" else self.gps_tol


class BenchmarkConfig(_Section):
    ratios: List[float] = [0.1, 0.2, 0.3, 0.4, 0.5]
    tasks: List[Literal["im2im", "seq2seq"]] = ["im2im", "seq2seq"]
    strategies: List[Literal["medoid", "similarity", "distance", "fixed_rate"]] = [
        "medoid",
        "similarity",
        "distance",
        "fixed_rate",
    ]
    inits: List[Literal["random_restart", "fixed_rate"]] = ["fixed_rate"]
    seq_len: int = 3
    threads: int = 1
    warmup: bool = True
    similarity_search_steps: int = 40

    @field_validator("ratios")
    @classmethod
    def _ratios(cls, v: List[float]) -> List[float]:
        if not v or any(not 0 < r <= 1 for r in v):
            raise ValueError("ratios must be non-empty and inside (0, 1]")
        return sorted(v)


class IngestConfig(_Section):
    renorm_tol: float = 1e-3
    unit_tol: float = 1e-5


class AppConfig(_Section):
    clustering: ClusteringConfig = ClusteringConfig()
    retrieval: RetrievalConfig = RetrievalConfig()
    tolerance: ToleranceConfig = ToleranceConfig()
    benchmark: BenchmarkConfig = BenchmarkConfig()
    ingest: IngestConfig = IngestConfig()


# default configs per section
DEFAULT_CONFIGS: Dict[str, _Section] = {
    "clustering": ClusteringConfig(),
    "retrieval": RetrievalConfig(),
    "tolerance": ToleranceConfig(),
    "benchmark": BenchmarkConfig(),
    "ingest": IngestConfig(),
}


def load_config(path: Optional[Union[str, Path]] = None) -> AppConfig:
    """
    Read a YAML config file; missing sections fall back to DEFAULT_CONFIGS.

    Raises:
        ContractError: unreadable YAML, unknown keys or invalid values
    """
    if path is None:
        return AppConfig()
    try:
        raw: Any = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ContractError(f"cannot read config file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ContractError(f"config file {path} must hold a mapping of sections")
    try:
        return AppConfig.model_validate(raw)
    except ValidationError as e:
        raise ContractError(f"invalid config file {path}: {e}") from e
