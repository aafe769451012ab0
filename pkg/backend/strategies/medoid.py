from __future__ import annotations

from models import KeyframeSet, KeyframeStrategy
from services.clustering import DEFAULT_RESTARTS, InitScheme, faster_msc, medoid_count_for_ratio
from services.featurestore import FrameDatabase


def select_medoid(
    db: FrameDatabase,
    ratio: float,
    init: InitScheme = "fixed_rate",
    seed: int = 42,
    restarts: int = DEFAULT_RESTARTS,
    threads: int = 1,
) -> KeyframeSet:
    """
    Keyframes as the medoids of a FasterMSC run with k = round(ratio * N).

    Raises:
        MedoidCountError: ratio yields k outside [2, N - 1]
    """
    k = medoid_count_for_ratio(len(db), ratio)
    result = faster_msc(db, k, init, restarts=restarts, seed=seed, threads=threads)
    params = {"k": k, "init": init, "seed": seed, "swaps": result.iterations}
    if init == "random_restart":
        params["restarts"] = restarts
    return KeyframeSet(
        indices=tuple(result.medoids),
        strategy="medoid",
        db_size=len(db),
        ams=result.ams,
        params=params,
        db_label=db.source_label,
    )


def select_medoid_for_ratio(
    db: FrameDatabase,
    ratio: float,
    init: InitScheme = "fixed_rate",
    seed: int = 42,
    restarts: int = DEFAULT_RESTARTS,
    threads: int = 1,
    **options,
) -> KeyframeSet:
    return select_medoid(db, ratio, init=init, seed=seed, restarts=restarts, threads=threads)


MEDOID_STRATEGY = KeyframeStrategy(
    id="medoid",
    name="Medoid Silhouette",
    description="Medoids of Faster Medoid Silhouette Clustering; AMS doubles as a quality criterion",
    trajectory_free=True,
    specified_number=True,
    quality_criterion=True,
    select_for_ratio=select_medoid_for_ratio,
)

MODULE_STRATEGIES = [MEDOID_STRATEGY]
