from __future__ import annotations

import numpy as np

from models import KeyframeSet, KeyframeStrategy, padded
from services.errors import KeyframeSetError, StrategyNotApplicableError
from services.featurestore import FrameDatabase, manhattan_degrees, manhattan_scan
from strategies.fixed_rate import count_for_ratio
from strategies.threshold_search import DEFAULT_SEARCH_STEPS, search_threshold


def _require_geotags(db: FrameDatabase) -> np.ndarray:
    if db.geotags is None:
        raise StrategyNotApplicableError(
            f"distance keyframes need geotags but '{db.source_label}' has none; "
            "use the medoid, similarity or fixed_rate strategy"
        )
    return db.geotags


def select_distance(db: FrameDatabase, threshold_deg: float) -> KeyframeSet:
    """
    Keyframes along the trajectory: a frame is selected when its Manhattan GPS
    distance (raw degrees) from the last keyframe exceeds threshold_deg.

    Raises:
        StrategyNotApplicableError: database carries no geotags
    """
    geotags = _require_geotags(db)
    if threshold_deg <= 0:
        raise KeyframeSetError(f"distance threshold must be positive, got {threshold_deg}")
    indices = manhattan_scan(geotags, threshold_deg)
    return KeyframeSet(
        indices=padded(indices, len(db)),
        strategy="distance",
        db_size=len(db),
        params={"threshold_deg": float(threshold_deg)},
        db_label=db.source_label,
    )


def select_distance_for_count(db: FrameDatabase, count: int, steps: int = DEFAULT_SEARCH_STEPS) -> KeyframeSet:
    """Bisect the GPS threshold toward `count` keyframes; the realized count may differ."""
    geotags = _require_geotags(db)
    path_length = float(manhattan_degrees(geotags[1:], geotags[:-1]).sum()) if len(db) > 1 else 0.0
    threshold, indices = search_threshold(
        lambda t: manhattan_scan(geotags, t), count, 0.0, max(path_length, 1e-12), increasing=False, steps=steps
    )
    return KeyframeSet(
        indices=padded(indices, len(db)),
        strategy="distance",
        db_size=len(db),
        params={"threshold_deg": float(threshold), "target_count": int(count)},
        db_label=db.source_label,
    )


def select_distance_for_ratio(
    db: FrameDatabase, ratio: float, search_steps: int = DEFAULT_SEARCH_STEPS, **options
) -> KeyframeSet:
    return select_distance_for_count(db, count_for_ratio(len(db), ratio), steps=search_steps)


DISTANCE_STRATEGY = KeyframeStrategy(
    id="distance",
    name="Distance",
    description="New keyframe when the GPS Manhattan distance from the last keyframe exceeds a threshold",
    trajectory_free=False,
    specified_number=True,
    quality_criterion=False,
    select_for_ratio=select_distance_for_ratio,
)

MODULE_STRATEGIES = [DISTANCE_STRATEGY]
