"""
Two-stage keyframe search.

Stage 1 compares the query with every keyframe; stage 2 searches the adjacent
region of the winning keyframe, i.e. the closed frame interval from the
preceding keyframe to the succeeding keyframe (clamped to the database ends).
Every cosine similarity evaluated between a query feature and a database
feature is counted, so a report's `comparisons` is exact.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from models import KeyframeSet
from services.errors import ContractError, DimensionMismatchError, KeyframeSetError
from services.featurestore import FrameDatabase

logger = logging.getLogger(__name__)

DEFAULT_SEQ_LEN = 3


class SimilarityCounter:
    """Counts feature-pair similarity evaluations."""

    def __init__(self) -> None:
        self.count = 0

    def add(self, evaluations: int) -> None:
        self.count += int(evaluations)

    def reset(self) -> None:
        self.count = 0


def _scores(rows: np.ndarray, q: np.ndarray, counter: SimilarityCounter) -> np.ndarray:
    """Cosine similarity of q against each row (unit vectors)."""
    counter.add(rows.shape[0])
    return np.einsum("ij,j->i", rows, q)


def _window_scores(frames: np.ndarray, qseq: np.ndarray, counter: SimilarityCounter) -> np.ndarray:
    """Summed similarity of qseq aligned at every start p with frames[p : p + L]."""
    length = qseq.shape[0]
    windows = frames.shape[0] - length + 1
    total = np.zeros(windows, dtype=np.float64)
    for j in range(length):
        total += _scores(frames[j : j + windows], qseq[j], counter)
    return total


@dataclass(frozen=True)
class QueryReport:
    best_index: int
    best_similarity: float
    stage1_keyframe: int
    comparisons: int
    elapsed_ns: int
    task: str = "im2im"
    region: Tuple[int, int] = (0, 0)


@dataclass(frozen=True, eq=False)
class SearchIndex:
    db: FrameDatabase
    keyframes: KeyframeSet
    keyframe_indices: np.ndarray
    keyframe_features: np.ndarray
    regions: Dict[int, Tuple[int, int]] = field(default_factory=dict)

    @property
    def region_lengths(self) -> np.ndarray:
        return np.array([end - start + 1 for start, end in self.regions.values()], dtype=np.int64)

    def region_of(self, keyframe: int) -> Tuple[int, int]:
        return self.regions[keyframe]


def build_index(db: FrameDatabase, keyframes: KeyframeSet) -> SearchIndex:
    """
    Attach adjacent regions to keyframes: keyframe i spans
    [keyframe i-1, keyframe i+1], with frame 0 / N-1 at the ends.

    Raises:
        KeyframeSetError: keyframes do not belong to a database of this size
    """
    n = len(db)
    indices = np.asarray(keyframes.indices, dtype=np.int64)
    if keyframes.db_size != n or indices[-1] >= n:
        raise KeyframeSetError(
            f"keyframe set for a {keyframes.db_size}-frame database does not fit '{db.source_label}' ({n} frames)"
        )
    regions: Dict[int, Tuple[int, int]] = {}
    last = len(indices) - 1
    for i, kf in enumerate(indices):
        start = int(indices[i - 1]) if i > 0 else 0
        end = int(indices[i + 1]) if i < last else n - 1
        regions[int(kf)] = (start, end)
    kf_features = np.ascontiguousarray(db.features[indices])
    logger.debug("Built index over %d keyframes of '%s'", len(indices), db.source_label)
    return SearchIndex(db, keyframes, indices, kf_features, regions)


def _as_query(db: FrameDatabase, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != db.dim:
        raise DimensionMismatchError(f"query dimension {q.shape[-1]} does not match database dimension {db.dim}")
    return q


def query_im2im(index: SearchIndex, q: np.ndarray, counter: Optional[SimilarityCounter] = None) -> QueryReport:
    """
    Match one query feature: best keyframe first, then the best frame inside its
    region. Ties go to the lowest frame index in both stages.
    """
    counter = counter if counter is not None else SimilarityCounter()
    q = _as_query(index.db, q)
    if q.ndim != 1:
        raise DimensionMismatchError(f"im2im query must be a single vector, got shape {q.shape}")
    started = counter.count
    t0 = time.perf_counter_ns()

    stage1 = _scores(index.keyframe_features, q, counter)
    keyframe = int(index.keyframe_indices[int(np.argmax(stage1))])
    start, end = index.regions[keyframe]
    stage2 = _scores(index.db.features[start : end + 1], q, counter)
    offset = int(np.argmax(stage2))

    elapsed = time.perf_counter_ns() - t0
    return QueryReport(
        best_index=start + offset,
        best_similarity=float(stage2[offset]),
        stage1_keyframe=keyframe,
        comparisons=counter.count - started,
        elapsed_ns=elapsed,
        task="im2im",
        region=(start, end),
    )


def _fit_window(start: int, end: int, keyframe: int, length: int, n: int) -> Tuple[int, int]:
    """Grow a region shorter than `length` symmetrically around the keyframe, clamped to [0, n-1]."""
    if end - start + 1 >= length:
        return start, end
    lo = keyframe - (length - 1) // 2
    lo = max(0, min(lo, n - length))
    hi = lo + length - 1
    return min(start, lo), max(end, hi)


def query_seq2seq(
    index: SearchIndex, qseq: np.ndarray, counter: Optional[SimilarityCounter] = None
) -> QueryReport:
    """
    Match a query sequence of length L. Each keyframe scores the sum of its
    similarities to all L query frames; inside the winning region every
    L-window is scored by aligned summed similarity and the center frame
    (offset L // 2) of the best window is reported.

    Raises:
        ContractError: empty sequence or L longer than the database
    """
    counter = counter if counter is not None else SimilarityCounter()
    qseq = _as_query(index.db, qseq)
    if qseq.ndim != 2 or qseq.shape[0] == 0:
        raise ContractError("seq2seq needs a non-empty (L, dim) query sequence")
    length = qseq.shape[0]
    n = len(index.db)
    if length > n:
        raise ContractError(f"query sequence length {length} exceeds database length {n}")
    started = counter.count
    t0 = time.perf_counter_ns()

    stage1 = np.zeros(len(index.keyframe_indices), dtype=np.float64)
    for j in range(length):
        stage1 += _scores(index.keyframe_features, qseq[j], counter)
    keyframe = int(index.keyframe_indices[int(np.argmax(stage1))])
    start, end = index.regions[keyframe]
    fitted = _fit_window(start, end, keyframe, length, n)
    if fitted != (start, end):
        logger.warning(
            "Region [%d, %d] of keyframe %d is shorter than L=%d; searching [%d, %d]",
            start,
            end,
            keyframe,
            length,
            *fitted,
        )
        start, end = fitted

    scores = _window_scores(index.db.features[start : end + 1], qseq, counter)
    p = int(np.argmax(scores))

    elapsed = time.perf_counter_ns() - t0
    return QueryReport(
        best_index=start + p + length // 2,
        best_similarity=float(scores[p]),
        stage1_keyframe=keyframe,
        comparisons=counter.count - started,
        elapsed_ns=elapsed,
        task="seq2seq",
        region=(start, end),
    )


def query_exhaustive(
    db: FrameDatabase, query: np.ndarray, counter: Optional[SimilarityCounter] = None
) -> QueryReport:
    """
    Baseline without keyframes: a 1-D query is matched against all N frames, a
    2-D (L, dim) query against all N - L + 1 windows.
    """
    counter = counter if counter is not None else SimilarityCounter()
    query = _as_query(db, query)
    started = counter.count
    n = len(db)
    t0 = time.perf_counter_ns()

    if query.ndim == 1:
        scores = _scores(db.features, query, counter)
        best = int(np.argmax(scores))
        report_index, task, similarity = best, "im2im", float(scores[best])
    else:
        length = query.shape[0]
        if length == 0 or length > n:
            raise ContractError(f"query sequence length {length} outside [1, {n}]")
        scores = _window_scores(db.features, query, counter)
        best = int(np.argmax(scores))
        report_index, task, similarity = best + length // 2, "seq2seq", float(scores[best])

    elapsed = time.perf_counter_ns() - t0
    return QueryReport(
        best_index=report_index,
        best_similarity=similarity,
        stage1_keyframe=-1,
        comparisons=counter.count - started,
        elapsed_ns=elapsed,
        task=task,
        region=(0, n - 1),
    )


def region_stats(index: SearchIndex) -> Dict[str, float]:
    """Region length statistics and a coverage check of [0, N-1]."""
    lengths = index.region_lengths
    covered = np.zeros(len(index.db), dtype=bool)
    for start, end in index.regions.values():
        covered[start : end + 1] = True
    return {
        "keyframes": int(len(index.keyframe_indices)),
        "frames": int(len(index.db)),
        "ratio": float(index.keyframes.ratio),
        "region_min": int(lengths.min()),
        "region_mean": float(lengths.mean()),
        "region_max": int(lengths.max()),
        "covers_all_frames": bool(covered.all()),
    }
