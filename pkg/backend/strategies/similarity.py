from __future__ import annotations

import logging

import numpy as np

from models import KeyframeSet, KeyframeStrategy, padded
from services.errors import KeyframeSetError
from services.featurestore import FrameDatabase
from strategies.fixed_rate import count_for_ratio
from strategies.threshold_search import DEFAULT_SEARCH_STEPS, search_threshold

logger = logging.getLogger(__name__)


def similarity_scan(features: np.ndarray, threshold: float) -> np.ndarray:
    """Frame 0, then every frame whose cosine similarity to the last keyframe falls below threshold."""
    kept = [0]
    last = features[0]
    for i in range(1, features.shape[0]):
        if float(np.dot(features[i], last)) < threshold:
            kept.append(i)
            last = features[i]
    return np.asarray(kept, dtype=np.int64)


def select_similarity(db: FrameDatabase, threshold: float) -> KeyframeSet:
    """
    Keyframes where the scene changes: a frame is selected when its cosine
    similarity to the last selected keyframe drops below threshold.
    """
    if len(db) == 0:
        raise KeyframeSetError("cannot select keyframes from an empty database")
    indices = similarity_scan(db.features, threshold)
    return KeyframeSet(
        indices=padded(indices, len(db)),
        strategy="similarity",
        db_size=len(db),
        params={"threshold": float(threshold)},
        db_label=db.source_label,
    )


def select_similarity_for_count(db: FrameDatabase, count: int, steps: int = DEFAULT_SEARCH_STEPS) -> KeyframeSet:
    """Bisect the similarity threshold toward `count` keyframes; the realized count may differ."""
    if len(db) == 0:
        raise KeyframeSetError("cannot select keyframes from an empty database")
    threshold, indices = search_threshold(
        lambda t: similarity_scan(db.features, t), count, -1.0, 1.0, increasing=True, steps=steps
    )
    return KeyframeSet(
        indices=padded(indices, len(db)),
        strategy="similarity",
        db_size=len(db),
        params={"threshold": float(threshold), "target_count": int(count)},
        db_label=db.source_label,
    )


def select_similarity_for_ratio(
    db: FrameDatabase, ratio: float, search_steps: int = DEFAULT_SEARCH_STEPS, **options
) -> KeyframeSet:
    return select_similarity_for_count(db, count_for_ratio(len(db), ratio), steps=search_steps)


SIMILARITY_STRATEGY = KeyframeStrategy(
    id="similarity",
    name="Cosine Similarity",
    description="New keyframe when cosine similarity to the last keyframe drops below a threshold",
    trajectory_free=True,
    specified_number=True,
    quality_criterion=False,
    select_for_ratio=select_similarity_for_ratio,
)

MODULE_STRATEGIES = [SIMILARITY_STRATEGY]
