from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from models import KeyframeSet, StrategyName


class KeyframeSetSchema(BaseModel):
    """KeyframeSet JSON handed from `select` to `query`, `bench` and `inspect`"""

    strategy: StrategyName
    ratio: float
    ams: Optional[float] = None  # medoid strategy only
    indices: List[int]
    params: Dict[str, Any] = Field(default_factory=dict)
    db_label: str = ""
    db_size: int

    @classmethod
    def from_domain(cls, keyframes: KeyframeSet) -> "KeyframeSetSchema":
        return cls(
            strategy=keyframes.strategy,
            ratio=keyframes.ratio,
            ams=keyframes.ams,
            indices=list(keyframes.indices),
            params=dict(keyframes.params),
            db_label=keyframes.db_label,
            db_size=keyframes.db_size,
        )

    def to_domain(self) -> KeyframeSet:
        return KeyframeSet(
            indices=tuple(self.indices),
            strategy=self.strategy,
            db_size=self.db_size,
            ams=self.ams,
            params=dict(self.params),
            db_label=self.db_label,
        )
