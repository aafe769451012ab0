from __future__ import annotations

import math

from models import KeyframeSet, KeyframeStrategy
from services.clustering import lattice_indices
from services.errors import KeyframeSetError
from services.featurestore import FrameDatabase


def select_fixed_rate(db: FrameDatabase, count: int) -> KeyframeSet:
    """Keyframes on the centered lattice floor((j + 0.5) * N / count)."""
    n = len(db)
    if not 2 <= count <= n:
        raise KeyframeSetError(f"fixed-rate keyframe count {count} outside [2, {n}]")
    indices = lattice_indices(n, count)
    return KeyframeSet(
        indices=tuple(indices),
        strategy="fixed_rate",
        db_size=n,
        params={"count": count},
        db_label=db.source_label,
    )


def count_for_ratio(n: int, ratio: float) -> int:
    return min(n, max(2, int(math.floor(ratio * n + 0.5 + 1e-9))))


def select_fixed_rate_for_ratio(db: FrameDatabase, ratio: float, **options) -> KeyframeSet:
    return select_fixed_rate(db, count_for_ratio(len(db), ratio))


FIXED_RATE_STRATEGY = KeyframeStrategy(
    id="fixed_rate",
    name="Fixed frame rate",
    description="Keyframes sampled at a constant frame rate set by the keyframe count",
    trajectory_free=True,
    specified_number=True,
    quality_criterion=False,
    select_for_ratio=select_fixed_rate_for_ratio,
)

MODULE_STRATEGIES = [FIXED_RATE_STRATEGY]
