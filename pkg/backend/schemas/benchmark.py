from typing import Dict, List, Optional

from pydantic import BaseModel

# column order of the bench CSV
CSV_COLUMNS = ["strategy", "task", "ratio", "accuracy", "auc", "mean_comparisons", "mean_ns", "ams"]


class BenchmarkRow(BaseModel):
    strategy: str
    task: str
    ratio: float
    accuracy: float
    auc: Optional[float] = None
    mean_comparisons: float
    mean_ns: float
    ams: Optional[float] = None


class SkippedOut(BaseModel):
    strategy: str
    reason: str
    ratio: Optional[float] = None


class BenchmarkSummary(BaseModel):
    """Timing, accuracy and AUC tables keyed task -> strategy -> ratio"""

    ratios: List[float]
    timing_ns: Dict[str, Dict[str, Dict[str, float]]]
    comparisons: Dict[str, Dict[str, Dict[str, float]]]
    accuracy: Dict[str, Dict[str, Dict[str, float]]]
    auc: Dict[str, Dict[str, Optional[float]]]
    ams_by_ratio: Dict[str, float]
    skipped: List[SkippedOut]
