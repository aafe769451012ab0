"""
Faster Medoid Silhouette Clustering.

The clustering objective is the Average Medoid Silhouette (AMS): for every
non-medoid x_i with nearest-medoid distance a_i and second-nearest-medoid
distance b_i, s_i = 1 - a_i / b_i, and AMS is the mean of s_i over the
non-medoids. Medoids are improved by eager swapping: candidates are scanned in
ascending frame order and the first swap with a positive AMS gain is executed
immediately. Swap gains are evaluated in O(N + k) per candidate from cached
nearest, second and third medoid distances.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from services.errors import MedoidCountError, SilhouetteContractError, SwapArgumentError
from services.featurestore import FrameDatabase
from services.system_logger import system_logger

logger = logging.getLogger(__name__)

InitScheme = Literal["random_restart", "fixed_rate"]
INIT_SCHEMES: Tuple[str, ...] = ("random_restart", "fixed_rate")

IMPROVEMENT_EPS = 1e-12
DEFAULT_RESTARTS = 10
DEFAULT_MAX_PASSES = 1000
EXHAUSTIVE_LIMIT = 250_000


def silhouette_score(a: float, b: float) -> float:
    """
    Medoid silhouette 1 - a/b of one point; 0 when a == b == 0.

    Raises:
        SilhouetteContractError: a < 0 or b < a
    """
    if a < 0 or b < a:
        raise SilhouetteContractError(f"silhouette needs b >= a >= 0, got a={a!r}, b={b!r}")
    if b == 0:
        return 0.0
    return 1.0 - a / b


def silhouette_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized silhouette_score without contract checks."""
    out = np.zeros(np.broadcast(a, b).shape, dtype=np.float64)
    np.divide(a, b, out=out, where=b > 0)
    return np.where(b > 0, 1.0 - out, 0.0)


def average_medoid_silhouette(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Mean silhouette over paired (a, b) distances of the non-medoids."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        raise MedoidCountError("average medoid silhouette needs at least one non-medoid")
    if np.any(a < 0) or np.any(b < a):
        raise SilhouetteContractError("silhouette needs b >= a >= 0 for every point")
    return float(silhouette_array(a, b).mean())


def lattice_indices(n: int, count: int) -> np.ndarray:
    """Centered uniform lattice floor((j + 0.5) * n / count), j = 0..count-1, de-duplicated."""
    j = np.arange(count, dtype=np.float64)
    return np.unique(np.floor((j + 0.5) * n / count).astype(np.int64))


def medoid_count_for_ratio(n: int, ratio: float) -> int:
    """k = round(ratio * n), halves rounded up; raises unless 2 <= k <= n - 1."""
    k = int(math.floor(ratio * n + 0.5 + 1e-9))
    check_medoid_count(n, k, context=f"ratio {ratio:g}")
    return k


def check_medoid_count(n: int, k: int, context: str = "") -> None:
    if n == 0:
        raise MedoidCountError("cannot cluster an empty database")
    if not 2 <= k <= n - 1:
        suffix = f" ({context})" if context else ""
        raise MedoidCountError(f"medoid count k={k} outside [2, {n - 1}] for N={n}{suffix}")


def _check_medoids(n: int, medoids: Iterable[int]) -> np.ndarray:
    array = np.asarray(sorted(int(m) for m in medoids), dtype=np.int64)
    if array.size and (array[0] < 0 or array[-1] >= n):
        raise MedoidCountError(f"medoid index outside [0, {n})")
    if np.unique(array).size != array.size:
        raise MedoidCountError("medoid indices must be distinct")
    check_medoid_count(n, int(array.size))
    return array


@dataclass(frozen=True, eq=False)
class MedoidAssignment:
    """
    Nearest, second and third medoid of every point under a fixed medoid set.

    Arrays are indexed by frame and cover medoids too (a medoid's nearest
    medoid is normally itself at distance 0). Ties resolve to the lower frame
    index. With k == 2 the third medoid is -1 at distance +inf.
    """

    distances: np.ndarray
    medoids: np.ndarray
    nearest: np.ndarray
    second: np.ndarray
    third: np.ndarray
    d_nearest: np.ndarray
    d_second: np.ndarray
    d_third: np.ndarray
    is_medoid: np.ndarray
    slot_of: np.ndarray
    ams: float

    @property
    def k(self) -> int:
        return int(self.medoids.size)

    @property
    def n(self) -> int:
        return int(self.distances.shape[0])

    @property
    def non_medoids(self) -> np.ndarray:
        return np.flatnonzero(~self.is_medoid)

    @property
    def a(self) -> np.ndarray:
        return self.d_nearest[~self.is_medoid]

    @property
    def b(self) -> np.ndarray:
        return self.d_second[~self.is_medoid]

    def nearest_medoid(self, i: int) -> int:
        return int(self.nearest[i])

    def second_medoid(self, i: int) -> int:
        return int(self.second[i])

    def silhouettes(self) -> np.ndarray:
        return silhouette_array(self.a, self.b)


def assign_medoids(distances: np.ndarray, medoids: Iterable[int]) -> MedoidAssignment:
    """Build the nearest/second/third medoid caches for a medoid set."""
    n = distances.shape[0]
    medoid_array = _check_medoids(n, medoids)
    k = medoid_array.size

    sub = distances[medoid_array]
    # stable sort over ascending medoid rows: equal distances keep the lower frame index first
    order = np.argsort(sub, axis=0, kind="stable")
    cols = np.arange(n)
    nearest = medoid_array[order[0]]
    second = medoid_array[order[1]]
    d_nearest = sub[order[0], cols]
    d_second = sub[order[1], cols]
    if k >= 3:
        third = medoid_array[order[2]]
        d_third = sub[order[2], cols]
    else:
        third = np.full(n, -1, dtype=np.int64)
        d_third = np.full(n, np.inf)

    is_medoid = np.zeros(n, dtype=bool)
    is_medoid[medoid_array] = True
    slot_of = np.full(n, -1, dtype=np.int64)
    slot_of[medoid_array] = np.arange(k)

    non = ~is_medoid
    ams = float(silhouette_array(d_nearest[non], d_second[non]).mean())
    return MedoidAssignment(
        distances=distances,
        medoids=medoid_array,
        nearest=nearest,
        second=second,
        third=third,
        d_nearest=d_nearest,
        d_second=d_second,
        d_third=d_third,
        is_medoid=is_medoid,
        slot_of=slot_of,
        ams=ams,
    )


def _ams_from_distances(distances: np.ndarray, medoids: np.ndarray) -> float:
    n = distances.shape[0]
    is_medoid = np.zeros(n, dtype=bool)
    is_medoid[medoids] = True
    to_medoids = distances[np.ix_(np.flatnonzero(~is_medoid), medoids)]
    two_smallest = np.sort(to_medoids, axis=1)[:, :2]
    return float(silhouette_array(two_smallest[:, 0], two_smallest[:, 1]).mean())


def recompute_ams(db: FrameDatabase, medoids: Iterable[int]) -> float:
    """
    From-scratch AMS of a medoid set: two nearest medoids of every non-medoid,
    silhouette averaged over the non-medoids. Reference for incremental updates.

    Raises:
        MedoidCountError: |medoids| outside [2, N - 1] or bad indices
    """
    medoid_array = _check_medoids(len(db), medoids)
    return _ams_from_distances(db.distances, medoid_array)


def _insert(r1: np.ndarray, r2: np.ndarray, dx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Two smallest of {r1, r2, dx} given r1 <= r2."""
    closer = dx < r1
    return np.where(closer, dx, r1), np.where(closer, r1, np.minimum(r2, dx))


def swap_deltas(assignment: MedoidAssignment, candidate: int) -> np.ndarray:
    """
    AMS change for replacing each medoid (in slot order) by the candidate.

    Every remaining non-medoid o falls in one of three cases: the removed
    medoid was its nearest, its second nearest, or neither. The neither-case
    score is shared by all slots; the other two are scattered per slot.
    """
    d = assignment.distances
    k = assignment.k
    n_non = assignment.n - k
    dx = d[candidate]

    keep = ~assignment.is_medoid
    keep[candidate] = False
    idx = np.flatnonzero(keep)
    d1 = assignment.d_nearest[idx]
    d2 = assignment.d_second[idx]
    d3 = assignment.d_third[idx]
    dxi = dx[idx]

    common = silhouette_array(*_insert(d1, d2, dxi))
    gain_first = silhouette_array(*_insert(d2, d3, dxi)) - common
    gain_second = silhouette_array(*_insert(d1, d3, dxi)) - common

    new_sum = np.full(k, common.sum())
    new_sum += np.bincount(assignment.slot_of[assignment.nearest[idx]], weights=gain_first, minlength=k)
    new_sum += np.bincount(assignment.slot_of[assignment.second[idx]], weights=gain_second, minlength=k)

    # the removed medoid itself becomes a non-medoid
    p = assignment.medoids
    removed_first = assignment.nearest[p] == p
    removed_second = assignment.second[p] == p
    r1 = np.where(removed_first, assignment.d_second[p], assignment.d_nearest[p])
    r2 = np.where(removed_first | removed_second, assignment.d_third[p], assignment.d_second[p])
    new_sum += silhouette_array(*_insert(r1, r2, dx[p]))

    return new_sum / n_non - assignment.ams


def swap_delta(assignment: MedoidAssignment, out_medoid: int, in_candidate: int) -> float:
    """
    AMS(M - out + in) - AMS(M).

    Raises:
        SwapArgumentError: out_medoid not a medoid or in_candidate already one
    """
    n = assignment.n
    if not 0 <= out_medoid < n or not assignment.is_medoid[out_medoid]:
        raise SwapArgumentError(f"frame {out_medoid} is not a medoid")
    if not 0 <= in_candidate < n or assignment.is_medoid[in_candidate]:
        raise SwapArgumentError(f"frame {in_candidate} is not a non-medoid candidate")
    return float(swap_deltas(assignment, in_candidate)[assignment.slot_of[out_medoid]])


@dataclass
class ClusteringResult:
    assignment: MedoidAssignment
    ams: float
    iterations: int
    init_scheme: InitScheme
    seed: int
    converged: bool = True
    ams_trace: List[float] = field(default_factory=list)
    restart_ams: List[float] = field(default_factory=list)
    best_restart: int = 0

    @property
    def medoids(self) -> List[int]:
        return [int(m) for m in self.assignment.medoids]


def eager_swap(
    distances: np.ndarray,
    medoids: Iterable[int],
    *,
    eps: float = IMPROVEMENT_EPS,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> Tuple[MedoidAssignment, int, List[float], bool]:
    """
    Run eager swapping from an initial medoid set until a full candidate pass
    finds no swap gaining more than eps.

    Returns:
        (final assignment, executed swaps, AMS trace, converged flag)
    """
    assignment = assign_medoids(distances, medoids)
    trace = [assignment.ams]
    swaps = 0
    n = assignment.n

    for pass_no in range(max_passes):
        improved = False
        for candidate in range(n):
            if assignment.is_medoid[candidate]:
                continue
            deltas = swap_deltas(assignment, candidate)
            slot = int(np.argmax(deltas))
            if deltas[slot] > eps:
                out = int(assignment.medoids[slot])
                updated = assignment.medoids.copy()
                updated[slot] = candidate
                assignment = assign_medoids(distances, updated)
                trace.append(assignment.ams)
                swaps += 1
                improved = True
                logger.debug("swap %d: medoid %d -> %d, AMS %.12f", swaps, out, candidate, assignment.ams)
        if not improved:
            return assignment, swaps, trace, True
        logger.debug("pass %d finished with AMS %.12f", pass_no + 1, assignment.ams)

    logger.warning("Eager swapping stopped after %d passes without converging", max_passes)
    return assignment, swaps, trace, False


def initial_medoids(
    n: int, k: int, init: InitScheme, *, restarts: int = DEFAULT_RESTARTS, seed: int = 42
) -> List[np.ndarray]:
    """Initial medoid sets: one centered lattice, or `restarts` uniform random k-subsets."""
    if init == "fixed_rate":
        return [lattice_indices(n, k)]
    if init == "random_restart":
        if restarts < 1:
            raise ValueError("restarts must be at least 1")
        rng = np.random.default_rng(seed)
        return [np.sort(rng.choice(n, size=k, replace=False)) for _ in range(restarts)]
    raise ValueError(f"unknown init scheme '{init}', expected one of {INIT_SCHEMES}")


def faster_msc(
    db: FrameDatabase,
    k: int,
    init: InitScheme = "random_restart",
    *,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 42,
    eps: float = IMPROVEMENT_EPS,
    max_passes: int = DEFAULT_MAX_PASSES,
    threads: int = 1,
) -> ClusteringResult:
    """
    Swap-local AMS optimum with k medoids.

    Args:
        db: frame database
        k: number of medoids, 2 <= k <= N - 1
        init: "random_restart" (best of `restarts` random starts) or "fixed_rate" (centered lattice)
        restarts: random starts for random_restart
        seed: seed for the random starts
        eps: minimum AMS gain for a swap to be executed
        max_passes: safety bound on full candidate passes
        threads: concurrent restarts; 0 uses every core

    Raises:
        MedoidCountError: k out of range or empty database
    """
    n = len(db)
    check_medoid_count(n, k)
    starts = initial_medoids(n, k, init, restarts=restarts, seed=seed)
    distances = db.distances

    def run(start: np.ndarray):
        return eager_swap(distances, start, eps=eps, max_passes=max_passes)

    workers = (os.cpu_count() or 1) if threads == 0 else max(1, threads)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(starts))) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(start) for start in starts]

    # max AMS, ties to the lowest restart ordinal
    best = max(range(len(outcomes)), key=lambda i: (outcomes[i][0].ams, -i))
    assignment, swaps, trace, converged = outcomes[best]
    result = ClusteringResult(
        assignment=assignment,
        ams=assignment.ams,
        iterations=swaps,
        init_scheme=init,
        seed=seed,
        converged=converged,
        ams_trace=trace,
        restart_ams=[o[0].ams for o in outcomes],
        best_restart=best,
    )
    logger.info(
        "FasterMSC on '%s': N=%d k=%d init=%s -> AMS %.6f after %d swaps",
        db.source_label,
        n,
        k,
        init,
        result.ams,
        swaps,
    )
    system_logger.log_clustering(db.source_label, n, k, init, result.ams, swaps)
    return result


def exhaustive_best_medoids(db: FrameDatabase, k: int, limit: int = EXHAUSTIVE_LIMIT) -> Tuple[List[int], float]:
    """
    Global AMS optimum over all C(N, k) medoid sets (first in lexicographic
    order on ties). Only for small instances.
    """
    n = len(db)
    check_medoid_count(n, k)
    total = math.comb(n, k)
    if total > limit:
        raise MedoidCountError(f"C({n},{k}) = {total} subsets exceeds the exhaustive limit {limit}")
    distances = db.distances
    best_set: Sequence[int] = ()
    best_ams = -math.inf
    for subset in itertools.combinations(range(n), k):
        ams = _ams_from_distances(distances, np.asarray(subset))
        if ams > best_ams:
            best_set, best_ams = subset, ams
    return list(best_set), best_ams


def ams_by_ratio(
    db: FrameDatabase,
    ratios: Iterable[float],
    init: InitScheme = "fixed_rate",
    **options,
) -> Dict[float, float]:
    """Realized medoid AMS per keyframe ratio."""
    curve = {}
    for ratio in ratios:
        k = medoid_count_for_ratio(len(db), ratio)
        curve[float(ratio)] = faster_msc(db, k, init, **options).ams
    return curve
