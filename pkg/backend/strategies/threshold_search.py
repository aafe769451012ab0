"""
Threshold bisection for scan-based strategies.

Scan strategies select keyframes by a similarity or distance threshold, so they
cannot be asked for a count directly; bisection approaches the requested count
and keeps the closest realized count seen.
"""

from __future__ import annotations

import logging
from typing import Callable, Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_SEARCH_STEPS = 40

Scan = Callable[[float], np.ndarray]


def search_threshold(
    scan: Scan,
    target: int,
    lo: float,
    hi: float,
    *,
    increasing: bool,
    steps: int = DEFAULT_SEARCH_STEPS,
) -> Tuple[float, np.ndarray]:
    """
    Bisect a threshold in [lo, hi] so that len(scan(threshold)) approaches target.

    Args:
        scan: threshold -> selected indices
        target: requested keyframe count
        increasing: True when a larger threshold selects more frames
        steps: bisection iterations

    Returns:
        (threshold, indices) with the realized count closest to target; ties keep the earlier probe
    """
    best_threshold = hi if increasing else lo
    best = scan(best_threshold)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        selected = scan(mid)
        if abs(len(selected) - target) < abs(len(best) - target):
            best_threshold, best = mid, selected
        if len(selected) == target:
            break
        too_few = len(selected) < target
        if too_few == increasing:
            lo = mid
        else:
            hi = mid
    if len(best) != target:
        logger.debug("Threshold search reached %d keyframes for a target of %d", len(best), target)
    return best_threshold, best
