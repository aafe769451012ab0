"""
Synthetic datasets for desk-scale reproduction.

`generate` builds a clustered trajectory: the frame sequence visits cluster
centers in order, every frame is its cluster center moved along the cluster's
drift direction and perturbed by angular noise. `generate_route` builds a
smooth random walk on the unit sphere with no cluster structure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from services.errors import ContractError, SeparationInfeasibleError
from services.featurestore import FrameDatabase, GroundTruth

logger = logging.getLogger(__name__)

GPS_ORIGIN: Tuple[float, float] = (51.75, -1.26)
DEFAULT_GPS_STEP = 0.00005
PLACEMENT_ATTEMPTS = 2000


@dataclass(frozen=True)
class SynthSpec:
    n_frames: int = 200
    dim: int = 32
    n_clusters: int = 10
    intra_noise: float = 0.05
    inter_gap: float = 0.5
    query_noise: float = 0.0
    seed: int = 42
    drift: float = 0.0
    gps_step: float = DEFAULT_GPS_STEP

    def __post_init__(self):
        if self.n_clusters < 2 or self.n_frames < self.n_clusters:
            raise ContractError(f"need n_frames >= n_clusters >= 2, got {self.n_frames} and {self.n_clusters}")
        if self.dim < 2:
            raise ContractError(f"dim must be at least 2, got {self.dim}")
        for name in ("intra_noise", "inter_gap", "query_noise", "drift"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")
        if self.gps_step <= 0:
            raise ContractError("gps_step must be positive")


@dataclass(frozen=True, eq=False)
class SynthDataset:
    db: FrameDatabase
    queries: FrameDatabase
    truth: GroundTruth
    gps_truth: GroundTruth
    labels: np.ndarray

    @property
    def geotags(self) -> Optional[np.ndarray]:
        return self.db.geotags


def _normalize(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _random_unit(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    return _normalize(rng.standard_normal((count, dim)))


def _tangent(rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
    """Random unit directions orthogonal to each row of x."""
    t = rng.standard_normal(x.shape)
    t -= np.sum(t * x, axis=-1, keepdims=True) * x
    return _normalize(t)


def _rotate(x: np.ndarray, direction: np.ndarray, angle) -> np.ndarray:
    angle = np.asarray(angle, dtype=np.float64)[..., None] if np.ndim(angle) else angle
    return np.cos(angle) * x + np.sin(angle) * direction


def perturb(rng: np.random.Generator, x: np.ndarray, sigma: float) -> np.ndarray:
    """Rotate every row by sigma * |z| radians toward a uniformly random tangent direction."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if sigma == 0:
        return x.copy()
    angles = sigma * np.abs(rng.standard_normal(x.shape[0]))
    return _normalize(_rotate(x, _tangent(rng, x), angles))


def place_centers(rng: np.random.Generator, count: int, dim: int, min_angle: float) -> np.ndarray:
    """
    Rejection-sample `count` unit vectors pairwise separated by at least
    min_angle radians.

    Raises:
        SeparationInfeasibleError: the bounded number of draws was exhausted
    """
    limit = np.cos(min_angle)
    centers = []
    for _ in range(PLACEMENT_ATTEMPTS * count):
        candidate = _random_unit(rng, 1, dim)[0]
        if all(float(candidate @ c) <= limit for c in centers):
            centers.append(candidate)
            if len(centers) == count:
                return np.array(centers)
    raise SeparationInfeasibleError(
        f"could not place {count} centers {min_angle:g} rad apart in {dim} dimensions "
        f"(placed {len(centers)})"
    )


def linear_geotags(segments: np.ndarray, step: float = DEFAULT_GPS_STEP) -> np.ndarray:
    """Piecewise-linear path: even segments head north, odd segments head east, one step per frame."""
    moves = np.zeros((len(segments), 2))
    moves[1:, 0] = np.where(segments[1:] % 2 == 0, step, 0.0)
    moves[1:, 1] = np.where(segments[1:] % 2 == 1, step, 0.0)
    return np.array(GPS_ORIGIN) + np.cumsum(moves, axis=0)


def _queries_for(
    rng: np.random.Generator, db: FrameDatabase, query_noise: float, label: str
) -> Tuple[FrameDatabase, GroundTruth, GroundTruth]:
    queries = FrameDatabase.from_vectors(perturb(rng, db.features, query_noise), source_label=label)
    truth = GroundTruth("frame", {i: i for i in range(len(db))})
    gps_truth = GroundTruth("gps", {i: (float(lat), float(lon)) for i, (lat, lon) in enumerate(db.geotags)})
    return queries, truth, gps_truth


def generate(spec: SynthSpec) -> SynthDataset:
    """
    Clustered trajectory dataset. Queries are the database frames perturbed by
    query_noise, with ground truth the source frame (and its geotag in gps mode).
    Deterministic given spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    centers = place_centers(rng, spec.n_clusters, spec.dim, spec.inter_gap)
    directions = _tangent(rng, centers)

    sizes = [len(part) for part in np.array_split(np.arange(spec.n_frames), spec.n_clusters)]
    labels = np.repeat(np.arange(spec.n_clusters), sizes)
    frames = np.empty((spec.n_frames, spec.dim))
    for c in range(spec.n_clusters):
        members = np.flatnonzero(labels == c)
        offsets = (np.arange(len(members)) - (len(members) - 1) / 2.0) * spec.drift
        along = _rotate(np.tile(centers[c], (len(members), 1)), np.tile(directions[c], (len(members), 1)), offsets)
        frames[members] = perturb(rng, along, spec.intra_noise)

    label = f"synth-{spec.seed}"
    db = FrameDatabase.from_vectors(_normalize(frames), linear_geotags(labels, spec.gps_step), source_label=label)
    queries, truth, gps_truth = _queries_for(rng, db, spec.query_noise, f"{label}-queries")
    logger.info(
        "Generated %d frames in %d clusters (dim %d, seed %d)", spec.n_frames, spec.n_clusters, spec.dim, spec.seed
    )
    return SynthDataset(db, queries, truth, gps_truth, labels)


def generate_route(
    n_frames: int,
    dim: int = 32,
    step: float = 0.05,
    query_noise: float = 0.0,
    seed: int = 42,
    turn: float = 0.3,
    gps_step: float = DEFAULT_GPS_STEP,
) -> SynthDataset:
    """
    Smooth random walk: each frame is the previous one rotated by `step`
    radians along a heading that turns slowly (`turn` scales the heading
    noise relative to the step).
    """
    if n_frames < 2 or dim < 3:
        raise ContractError("a route needs at least 2 frames in at least 3 dimensions")
    if step <= 0 or query_noise < 0 or turn < 0:
        raise ContractError("step must be positive and noise parameters non-negative")
    rng = np.random.default_rng(seed)
    x = _random_unit(rng, 1, dim)[0]
    heading = _tangent(rng, x[None, :])[0]
    frames = np.empty((n_frames, dim))
    for i in range(n_frames):
        frames[i] = x
        nudge = rng.standard_normal(dim) * turn
        nudge -= (nudge @ x) * x
        heading = heading + nudge / np.sqrt(dim)
        heading -= (heading @ x) * x
        heading /= np.linalg.norm(heading)
        x, heading = np.cos(step) * x + np.sin(step) * heading, -np.sin(step) * x + np.cos(step) * heading
        x /= np.linalg.norm(x)

    label = f"route-{seed}"
    segments = np.zeros(n_frames, dtype=np.int64)
    db = FrameDatabase.from_vectors(frames, linear_geotags(segments, gps_step), source_label=label)
    queries, truth, gps_truth = _queries_for(rng, db, query_noise, f"{label}-queries")
    logger.info("Generated %d-frame route (dim %d, step %g, seed %d)", n_frames, dim, step, seed)
    return SynthDataset(db, queries, truth, gps_truth, segments)
