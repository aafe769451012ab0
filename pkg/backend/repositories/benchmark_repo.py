"""Benchmark report egress: the grid CSV and the JSON summary tables."""

import logging
from collections import defaultdict
from pathlib import Path
from typing import Union

import pandas as pd

from schemas.benchmark import CSV_COLUMNS, BenchmarkRow, BenchmarkSummary, SkippedOut
from services.evaluation import BenchmarkReport

logger = logging.getLogger(__name__)


def report_frame(report: BenchmarkReport) -> pd.DataFrame:
    rows = [BenchmarkRow.model_validate(record, from_attributes=True).model_dump() for record in report.records]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_benchmark_csv(report: BenchmarkReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report_frame(report).to_csv(path, index=False)
    logger.info(f"[BENCH_REPO] Wrote {len(report)} rows to {path}")
    return path


def summarize(report: BenchmarkReport) -> BenchmarkSummary:
    timing = defaultdict(lambda: defaultdict(dict))
    comparisons = defaultdict(lambda: defaultdict(dict))
    accuracy = defaultdict(lambda: defaultdict(dict))
    auc = defaultdict(dict)
    for r in report.records:
        key = f"{r.ratio:g}"
        timing[r.task][r.strategy][key] = r.mean_ns
        comparisons[r.task][r.strategy][key] = r.mean_comparisons
        accuracy[r.task][r.strategy][key] = r.accuracy
        auc[r.task][r.strategy] = r.auc
    # skipped strategies show up as null cells
    for task in list(auc):
        for skip in report.skipped:
            auc[task].setdefault(skip.strategy, None)
    ratios = sorted({r.ratio for r in report.records if r.strategy != "baseline"})
    return BenchmarkSummary(
        ratios=ratios,
        timing_ns={t: dict(v) for t, v in timing.items()},
        comparisons={t: dict(v) for t, v in comparisons.items()},
        accuracy={t: dict(v) for t, v in accuracy.items()},
        auc=dict(auc),
        ams_by_ratio={f"{k:g}": v for k, v in sorted(report.ams_by_ratio.items())},
        skipped=[SkippedOut(strategy=s.strategy, reason=s.reason, ratio=s.ratio) for s in report.skipped],
    )


def write_summary(report: BenchmarkReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summarize(report).model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"[BENCH_REPO] Wrote summary to {path}")
    return path
