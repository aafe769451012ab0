"""
Feature store: frame databases, geotags, ground truth and the cosine distance.

Every feature is a unit-normalized embedding of one frame. The distance used
throughout clustering and retrieval is d(a, b) = 1 - cos(a, b), which for unit
vectors is 1 - dot(a, b), clamped to [0, 2].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from services.errors import (
    CountMismatchError,
    DimensionMismatchError,
    GeotagError,
    GroundTruthError,
    NormToleranceError,
    ZeroVectorError,
)

logger = logging.getLogger(__name__)

FeatureVector = npt.NDArray[np.float64]
Geotag = Tuple[float, float]
TruthMode = Literal["frame", "gps"]

UNIT_TOLERANCE = 1e-5
RENORM_TOLERANCE = 1e-3
# Absorbs binary representation error of decimal degree coordinates (~0.1 mm).
GPS_EPSILON = 1e-9


def normalize_rows(
    matrix: npt.ArrayLike,
    *,
    renorm_tol: Optional[float] = RENORM_TOLERANCE,
    path: Optional[str] = None,
) -> np.ndarray:
    """
    Validate and unit-normalize a (count, dim) matrix of feature rows.

    Rows within UNIT_TOLERANCE of unit norm are kept bit-for-bit, rows within
    renorm_tol are renormalized, anything further off is rejected. Passing
    renorm_tol=None renormalizes every non-zero row.

    Raises:
        ZeroVectorError: a row has zero norm
        NormToleranceError: a row deviates from unit norm by more than renorm_tol
    """
    rows = np.array(matrix, dtype=np.float64, copy=True, ndmin=2)
    if rows.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D feature matrix, got shape {rows.shape}", path=path)
    if rows.shape[0] == 0:
        return rows

    norms = np.linalg.norm(rows, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroVectorError("zero feature vector cannot be normalized", path=path, frame=int(zero[0]))

    deviation = np.abs(norms - 1.0)
    if renorm_tol is not None:
        too_far = np.flatnonzero(deviation > renorm_tol)
        if too_far.size:
            frame = int(too_far[0])
            raise NormToleranceError(
                f"feature norm {norms[frame]:.6g} deviates from 1 by more than {renorm_tol:g}",
                path=path,
                frame=frame,
            )

    fix = deviation > UNIT_TOLERANCE
    if fix.any():
        logger.debug("Renormalizing %d of %d feature rows", int(fix.sum()), rows.shape[0])
        rows[fix] /= norms[fix, None]
    return rows


def as_feature_vector(values: npt.ArrayLike) -> FeatureVector:
    """Coerce values to a unit-normalized 1-D float64 vector."""
    return normalize_rows(np.asarray(values, dtype=np.float64).reshape(1, -1), renorm_tol=None)[0]


def distance(a: FeatureVector, b: FeatureVector) -> float:
    """
    Cosine distance 1 - cos(a, b) of two unit vectors, clamped to [0, 2].

    Raises:
        DimensionMismatchError: vectors have different dimensionality
    """
    if a.shape != b.shape:
        raise DimensionMismatchError(f"incompatible feature dimensions {a.shape[-1]} and {b.shape[-1]}")
    return min(2.0, max(0.0, 1.0 - float(np.dot(a, b))))


def cosine_similarity(a: FeatureVector, b: FeatureVector) -> float:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"incompatible feature dimensions {a.shape[-1]} and {b.shape[-1]}")
    return float(np.dot(a, b))


def pairwise_distances(features: np.ndarray) -> np.ndarray:
    """Symmetric (N, N) cosine distance matrix with an exact zero diagonal."""
    gram = features @ features.T
    upper = np.triu(gram)
    gram = upper + np.triu(upper, 1).T
    dist = np.clip(1.0 - gram, 0.0, 2.0)
    np.fill_diagonal(dist, 0.0)
    return dist


def manhattan_degrees(a: npt.ArrayLike, b: npt.ArrayLike) -> np.ndarray:
    """|dlat| + |dlon| in raw degrees, broadcast over leading axes."""
    diff = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    return diff[..., 0] + diff[..., 1]


def manhattan_scan(geotags: np.ndarray, threshold_deg: float) -> np.ndarray:
    """
    Greedy trajectory scan: frame 0 is kept, then every frame whose Manhattan
    degree distance from the last kept frame exceeds threshold_deg.
    """
    kept = [0]
    last = geotags[0]
    for i in range(1, len(geotags)):
        if manhattan_degrees(geotags[i], last) > threshold_deg + GPS_EPSILON:
            kept.append(i)
            last = geotags[i]
    return np.asarray(kept, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FrameDatabase:
    """Temporally ordered frames (row i = capture order i) with optional geotags."""

    features: np.ndarray
    geotags: Optional[np.ndarray] = None
    source_label: str = ""

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-D feature matrix, got shape {features.shape}")
        features = np.ascontiguousarray(features)
        features.setflags(write=False)
        object.__setattr__(self, "features", features)

        if self.geotags is not None:
            geotags = np.ascontiguousarray(np.asarray(self.geotags, dtype=np.float64))
            if geotags.ndim != 2 or geotags.shape[1] != 2:
                raise GeotagError(f"geotags must be (lat, lon) pairs, got shape {geotags.shape}")
            if geotags.shape[0] != features.shape[0]:
                raise CountMismatchError(
                    f"{geotags.shape[0]} geotags for {features.shape[0]} frames in '{self.source_label}'"
                )
            geotags.setflags(write=False)
            object.__setattr__(self, "geotags", geotags)

    @classmethod
    def from_vectors(
        cls,
        vectors: Union[npt.ArrayLike, Sequence[Sequence[float]]],
        geotags: Optional[npt.ArrayLike] = None,
        source_label: str = "",
        renorm_tol: Optional[float] = None,
    ) -> "FrameDatabase":
        """Build a database from raw vectors, normalizing every row."""
        return cls(normalize_rows(vectors, renorm_tol=renorm_tol), geotags, source_label)

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def size(self) -> int:
        return len(self)

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def has_geotags(self) -> bool:
        return self.geotags is not None

    def frame(self, index: int) -> FeatureVector:
        return self.features[index]

    def geotag(self, index: int) -> Geotag:
        if self.geotags is None:
            raise GeotagError(f"database '{self.source_label}' carries no geotags")
        lat, lon = self.geotags[index]
        return float(lat), float(lon)

    def with_geotags(self, geotags: Optional[npt.ArrayLike]) -> "FrameDatabase":
        """Return a copy bound to geotags; the count must match the frame count."""
        return FrameDatabase(self.features, geotags, self.source_label)

    def check_compatible(self, vector_or_matrix: np.ndarray) -> None:
        if vector_or_matrix.shape[-1] != self.dim:
            raise DimensionMismatchError(
                f"query dimension {vector_or_matrix.shape[-1]} does not match database dimension {self.dim}"
            )

    @cached_property
    def distances(self) -> np.ndarray:
        """Cached (N, N) distance matrix; built on first use."""
        logger.debug("Building %dx%d distance matrix for '%s'", len(self), len(self), self.source_label)
        matrix = pairwise_distances(self.features)
        matrix.setflags(write=False)
        return matrix


def subsample_by_gps(db: FrameDatabase, threshold_deg: float = 0.0001) -> Tuple[FrameDatabase, np.ndarray]:
    """
    Thin a dense geotagged sequence: keep a frame when its Manhattan distance
    from the last kept frame exceeds threshold_deg.

    Returns:
        (reduced database, kept source indices)
    """
    if db.geotags is None:
        raise GeotagError(f"database '{db.source_label}' carries no geotags to subsample by")
    if threshold_deg <= 0:
        raise ValueError("threshold_deg must be positive")
    if len(db) == 0:
        return db, np.empty(0, dtype=np.int64)
    kept = manhattan_scan(db.geotags, threshold_deg)
    logger.info("GPS subsampling kept %d of %d frames (threshold %g deg)", kept.size, len(db), threshold_deg)
    reduced = FrameDatabase(db.features[kept], db.geotags[kept], f"{db.source_label}[gps>{threshold_deg:g}]")
    return reduced, kept


@dataclass(frozen=True)
class GroundTruth:
    """Correct answer per query index: a database frame (frame mode) or a coordinate (gps mode)."""

    mode: TruthMode
    pairs: Dict[int, Union[int, Geotag]] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("frame", "gps"):
            raise GroundTruthError(f"unknown ground-truth mode '{self.mode}'")

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, query: int) -> bool:
        return query in self.pairs

    def truth_for(self, query: int) -> Union[int, Geotag]:
        try:
            return self.pairs[query]
        except KeyError:
            raise GroundTruthError("no ground truth for query", frame=query) from None

    def validate(self, db_size: int, query_count: Optional[int] = None) -> None:
        """Check every referenced index lies inside its database."""
        for query, truth in self.pairs.items():
            if query < 0 or (query_count is not None and query >= query_count):
                raise GroundTruthError(f"query index outside [0, {query_count})", frame=query)
            if self.mode == "frame" and not 0 <= int(truth) < db_size:
                raise GroundTruthError(f"true database index {truth} outside [0, {db_size})", frame=query)
