"""
Re-localization benchmark: tolerance matching, accuracy/timing grids over
keyframe ratios, area under the accuracy curve and the AMS quality gate.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from models import KeyframeSet
from services.errors import (
    ContractError,
    DimensionMismatchError,
    GeotagError,
    GroundTruthError,
    MedoidCountError,
    StrategyNotApplicableError,
    ToleranceRuleError,
)
from services.featurestore import GPS_EPSILON, FrameDatabase, Geotag, GroundTruth, manhattan_degrees
from services.retrieval import (
    DEFAULT_SEQ_LEN,
    QueryReport,
    SearchIndex,
    SimilarityCounter,
    build_index,
    query_exhaustive,
    query_im2im,
    query_seq2seq,
)
from services.system_logger import system_logger
from strategies import get_strategy

logger = logging.getLogger(__name__)

Task = Literal["im2im", "seq2seq"]
TASKS: Tuple[str, ...] = ("im2im", "seq2seq")
BASELINE = "baseline"
BASELINE_RATIO = 1.0


@dataclass(frozen=True)
class ToleranceRule:
    """Frame-index tolerance (frames) or GPS Manhattan tolerance (degrees), inclusive."""

    mode: Literal["frame", "gps"]
    tol: float

    def __post_init__(self):
        if self.mode == "frame":
            if self.tol < 0 or float(self.tol) != int(self.tol):
                raise ToleranceRuleError(f"frame tolerance must be a non-negative integer, got {self.tol}")
        elif self.mode == "gps":
            if not self.tol > 0:
                raise ToleranceRuleError(f"gps tolerance must be positive, got {self.tol}")
        else:
            raise ToleranceRuleError(f"unknown tolerance mode '{self.mode}'")

    @classmethod
    def frames(cls, tol: int = 2) -> "ToleranceRule":
        return cls("frame", tol)

    @classmethod
    def gps(cls, tol: float = 0.0002) -> "ToleranceRule":
        return cls("gps", tol)


def is_correct(
    pred: int,
    truth: Union[int, Geotag],
    rule: ToleranceRule,
    geotags: Optional[np.ndarray] = None,
) -> bool:
    """
    Frame mode: |pred - truth| <= tol. GPS mode: Manhattan degree distance
    between the predicted frame's geotag and the true coordinate <= tol.

    Raises:
        GeotagError: gps mode without geotags
    """
    if rule.mode == "frame":
        return abs(int(pred) - int(truth)) <= rule.tol
    if geotags is None:
        raise GeotagError("gps tolerance matching needs database geotags")
    return bool(manhattan_degrees(geotags[pred], truth) <= rule.tol + GPS_EPSILON)


@dataclass
class BenchmarkRecord:
    strategy: str
    task: str
    ratio: float
    accuracy: float
    mean_comparisons: float
    mean_ns: float
    ams: Optional[float] = None
    auc: Optional[float] = None
    correct: int = 0
    total: int = 0
    keyframes: int = 0

    def __post_init__(self):
        if self.total <= 0:
            raise ContractError("a benchmark record needs at least one query")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ContractError(f"accuracy {self.accuracy} outside [0, 1]")


@dataclass
class SkippedCell:
    strategy: str
    reason: str
    ratio: Optional[float] = None
    task: Optional[str] = None


@dataclass
class BenchmarkReport:
    records: List[BenchmarkRecord] = field(default_factory=list)
    skipped: List[SkippedCell] = field(default_factory=list)
    ams_by_ratio: Dict[float, float] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def rows_for(self, strategy: str, task: str) -> List[BenchmarkRecord]:
        return sorted(
            (r for r in self.records if r.strategy == strategy and r.task == task),
            key=lambda r: r.ratio,
        )

    def baseline(self, task: str) -> Optional[BenchmarkRecord]:
        rows = self.rows_for(BASELINE, task)
        return rows[0] if rows else None

    def strategies(self) -> List[str]:
        return sorted({r.strategy for r in self.records if r.strategy != BASELINE})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records])


@dataclass(frozen=True)
class QualityVerdict:
    accepted: bool
    ams: Optional[float]
    reason: str


def quality_gate(keyframes: KeyframeSet, min_ams: float) -> QualityVerdict:
    """Accept medoid keyframes whose AMS reaches min_ams; other strategies carry no quality criterion."""
    if keyframes.ams is None:
        return QualityVerdict(False, None, "no quality criterion")
    if keyframes.ams >= min_ams:
        return QualityVerdict(True, keyframes.ams, f"AMS {keyframes.ams:.4f} >= {min_ams:g}")
    return QualityVerdict(False, keyframes.ams, f"AMS {keyframes.ams:.4f} < {min_ams:g}")


def area_under_accuracy(records: Iterable[BenchmarkRecord], ratio_grid: Optional[Sequence[float]] = None) -> float:
    """
    Trapezoidal integral of accuracy over the ratio axis.

    Args:
        records: rows of one strategy and task
        ratio_grid: restrict to these ratios; all record ratios when omitted

    Raises:
        ContractError: fewer than two distinct ratios or a repeated ratio
    """
    rows = list(records)
    if ratio_grid is not None:
        grid = {round(float(r), 12) for r in ratio_grid}
        rows = [r for r in rows if round(r.ratio, 12) in grid]
    rows.sort(key=lambda r: r.ratio)
    ratios = np.array([r.ratio for r in rows], dtype=np.float64)
    if len(np.unique(ratios)) != len(ratios):
        raise ContractError("area under accuracy needs one record per ratio")
    if len(ratios) < 2:
        raise ContractError(f"area under accuracy needs at least 2 ratios, got {len(ratios)}")
    accuracy = np.array([r.accuracy for r in rows], dtype=np.float64)
    return float(np.sum(np.diff(ratios) * (accuracy[1:] + accuracy[:-1]) / 2.0))


@dataclass(frozen=True)
class QueryItem:
    query: int
    features: np.ndarray
    truth: Union[int, Geotag]


def query_windows(queries: FrameDatabase, task: str, seq_len: int = DEFAULT_SEQ_LEN) -> List[Tuple[int, np.ndarray]]:
    """
    (query index, query array) pairs for a task. seq2seq sequences are the L
    consecutive query frames centered on a query index (offset L // 2).
    """
    if task == "im2im":
        return [(q, queries.features[q]) for q in range(len(queries))]
    if task == "seq2seq":
        if seq_len < 1:
            raise ContractError("sequence length must be at least 1")
        half = seq_len // 2
        return [
            (center, queries.features[center - half : center - half + seq_len])
            for center in range(half, len(queries) - (seq_len - 1 - half))
        ]
    raise ContractError(f"unknown task '{task}'")


def build_query_items(
    queries: FrameDatabase, truth: GroundTruth, task: str, seq_len: int = DEFAULT_SEQ_LEN
) -> List[QueryItem]:
    """Query windows paired with their truth; a seq2seq window takes its center frame's truth."""
    missing = [q for q in range(len(queries)) if q not in truth]
    if missing:
        raise GroundTruthError("ground truth does not cover every query", frame=missing[0])
    return [QueryItem(q, features, truth.truth_for(q)) for q, features in query_windows(queries, task, seq_len)]


@dataclass
class _PassResult:
    reports: List[QueryReport]
    comparisons: List[int]


def _run_pass(index: Optional[SearchIndex], db: FrameDatabase, items: List[QueryItem], task: str) -> _PassResult:
    counter = SimilarityCounter()
    reports = []
    comparisons = []
    for item in items:
        before = counter.count
        if index is None:
            report = query_exhaustive(db, item.features, counter)
        elif task == "im2im":
            report = query_im2im(index, item.features, counter)
        else:
            report = query_seq2seq(index, item.features, counter)
        reports.append(report)
        comparisons.append(counter.count - before)
    return _PassResult(reports, comparisons)


def evaluate_queries(
    db: FrameDatabase,
    index: Optional[SearchIndex],
    items: List[QueryItem],
    task: str,
    rule: ToleranceRule,
    *,
    warmup: bool = True,
) -> Tuple[int, float, float]:
    """
    Run every query through the index (or exhaustively when index is None):
    an untimed warm-up pass, then a measured single-threaded pass.

    Returns:
        (correct count, mean comparisons, mean elapsed ns)
    """
    if not items:
        raise ContractError(f"no {task} queries to evaluate")
    if warmup:
        _run_pass(index, db, items, task)
    measured = _run_pass(index, db, items, task)
    correct = sum(
        is_correct(report.best_index, item.truth, rule, db.geotags) for report, item in zip(measured.reports, items)
    )
    mean_comparisons = float(np.mean(measured.comparisons))
    mean_ns = float(np.mean([r.elapsed_ns for r in measured.reports]))
    return correct, mean_comparisons, mean_ns


def run_benchmark(
    db: FrameDatabase,
    queries: FrameDatabase,
    truth: GroundTruth,
    strategies: Sequence[str],
    ratios: Sequence[float],
    tasks: Sequence[str],
    rule: ToleranceRule,
    *,
    seq_len: int = DEFAULT_SEQ_LEN,
    inits: Sequence[str] = ("fixed_rate",),
    seed: int = 42,
    restarts: int = 10,
    threads: int = 1,
    warmup: bool = True,
    search_steps: int = 40,
) -> BenchmarkReport:
    """
    Accuracy/comparison/timing grid over (strategy, ratio, task), plus one
    exhaustive baseline row per task at ratio 1.0.

    Strategies that cannot run on this database (distance without geotags)
    are recorded in `skipped`, as are medoid ratios whose k falls outside
    [2, N - 1]; other errors propagate.
    """
    if queries.dim != db.dim:
        raise DimensionMismatchError(f"query dimension {queries.dim} does not match database dimension {db.dim}")
    truth.validate(len(db), len(queries))
    if rule.mode == "gps":
        if truth.mode != "gps":
            raise GroundTruthError("gps tolerance needs gps ground truth")
        if db.geotags is None:
            raise GeotagError("gps tolerance needs database geotags")
    elif truth.mode != "frame":
        raise GroundTruthError("frame tolerance needs frame ground truth")

    items = {task: build_query_items(queries, truth, task, seq_len) for task in tasks}
    report = BenchmarkReport()

    for task in tasks:
        correct, comparisons, ns = evaluate_queries(db, None, items[task], task, rule, warmup=warmup)
        total = len(items[task])
        report.records.append(
            BenchmarkRecord(
                strategy=BASELINE,
                task=task,
                ratio=BASELINE_RATIO,
                accuracy=correct / total,
                mean_comparisons=comparisons,
                mean_ns=ns,
                correct=correct,
                total=total,
                keyframes=len(db),
            )
        )
        logger.info("Baseline %s: accuracy %.4f over %d queries", task, correct / total, total)

    for strategy_id in strategies:
        strategy = get_strategy(strategy_id)
        variants = list(inits) if strategy.id == "medoid" else [None]
        for init in variants:
            label = strategy.id if init is None or len(variants) == 1 else f"{strategy.id}:{init}"
            for ratio in ratios:
                options = {"seed": seed, "restarts": restarts, "threads": threads, "search_steps": search_steps}
                if init is not None:
                    options["init"] = init
                try:
                    keyframes = strategy.select_for_ratio(db, ratio, **options)
                except StrategyNotApplicableError as e:
                    report.skipped.append(SkippedCell(label, str(e)))
                    system_logger.log_skip(label, str(e))
                    logger.warning("Skipping strategy %s: %s", label, e)
                    break
                except MedoidCountError as e:
                    # only this ratio is unusable, the rest of the grid still runs
                    report.skipped.append(SkippedCell(label, str(e), ratio=float(ratio)))
                    system_logger.log_skip(label, str(e))
                    logger.warning("Skipping %s at ratio %g: %s", label, ratio, e)
                    continue
                if keyframes.ams is not None:
                    report.ams_by_ratio.setdefault(float(ratio), keyframes.ams)
                index = build_index(db, keyframes)
                for task in tasks:
                    correct, comparisons, ns = evaluate_queries(db, index, items[task], task, rule, warmup=warmup)
                    total = len(items[task])
                    record = BenchmarkRecord(
                        strategy=label,
                        task=task,
                        ratio=float(ratio),
                        accuracy=correct / total,
                        mean_comparisons=comparisons,
                        mean_ns=ns,
                        ams=keyframes.ams,
                        correct=correct,
                        total=total,
                        keyframes=len(keyframes),
                    )
                    report.records.append(record)
                    system_logger.log_benchmark_cell(label, task, float(ratio), record.accuracy, comparisons)
                    logger.info(
                        "%s/%s @ %g: accuracy %.4f, %.1f comparisons, %.0f ns",
                        label,
                        task,
                        ratio,
                        record.accuracy,
                        comparisons,
                        ns,
                    )

    _attach_auc(report, ratios)
    return report


def _attach_auc(report: BenchmarkReport, ratios: Sequence[float]) -> None:
    grid = sorted({float(r) for r in ratios})
    if len(grid) < 2:
        return
    for task in {r.task for r in report.records}:
        for strategy in report.strategies():
            rows = report.rows_for(strategy, task)
            if len(rows) < 2:
                continue
            auc = area_under_accuracy(rows, grid)
            for row in rows:
                row.auc = auc
        baseline = report.baseline(task)
        if baseline is not None:
            # flat baseline curve over the same grid, for side-by-side comparison
            baseline.auc = baseline.accuracy * (grid[-1] - grid[0])
