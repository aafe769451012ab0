from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Literal, Optional, Sequence, Tuple

from services.errors import KeyframeSetError

StrategyName = Literal["medoid", "similarity", "distance", "fixed_rate"]
STRATEGY_NAMES: Tuple[str, ...] = ("medoid", "similarity", "distance", "fixed_rate")


@dataclass(frozen=True)
class KeyframeSet:
    """Selected keyframe indices of one database plus selection metadata"""
    indices: Tuple[int, ...]
    strategy: StrategyName
    db_size: int
    ams: Optional[float] = None
    params: Dict[str, Any] = field(default_factory=dict)
    db_label: str = ""

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", indices)
        if self.strategy not in STRATEGY_NAMES:
            raise KeyframeSetError(f"unknown keyframe strategy '{self.strategy}'")
        if len(indices) < 2:
            raise KeyframeSetError(f"a keyframe set needs at least 2 indices, got {len(indices)}")
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise KeyframeSetError("keyframe indices must be strictly increasing")
        if indices[0] < 0 or indices[-1] >= self.db_size:
            raise KeyframeSetError(f"keyframe index outside [0, {self.db_size})")
        if (self.ams is not None) != (self.strategy == "medoid"):
            raise KeyframeSetError("ams is present exactly for the medoid strategy")

    @property
    def ratio(self) -> float:
        return len(self.indices) / self.db_size

    def __len__(self) -> int:
        return len(self.indices)


def padded(indices: Sequence[int], db_size: int) -> Tuple[int, ...]:
    """Scan-based selections always hold frame 0; add the last frame when only it was kept."""
    kept = tuple(sorted(set(int(i) for i in indices)))
    if len(kept) == 1:
        if db_size < 2:
            raise KeyframeSetError("cannot build a keyframe set from a single-frame database")
        kept = (kept[0], db_size - 1) if kept[0] != db_size - 1 else (0, db_size - 1)
    return kept


@dataclass
class KeyframeStrategy:
    """Keyframe selection method definition"""
    id: StrategyName
    name: str
    description: str
    trajectory_free: bool
    specified_number: bool
    quality_criterion: bool
    select_for_ratio: Callable[..., KeyframeSet]
