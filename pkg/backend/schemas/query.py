from typing import List, Optional

from pydantic import BaseModel, Field

from services.retrieval import QueryReport


class QueryReportOut(BaseModel):
    """One JSON line per query"""

    query: int
    best: int
    sim: float
    stage1: int  # -1 for the exhaustive baseline
    comparisons: int
    ns: int

    @classmethod
    def from_report(cls, query: int, report: QueryReport) -> "QueryReportOut":
        return cls(
            query=query,
            best=report.best_index,
            sim=report.best_similarity,
            stage1=report.stage1_keyframe,
            comparisons=report.comparisons,
            ns=report.elapsed_ns,
        )


class Im2ImRequest(BaseModel):
    vector: List[float] = Field(..., min_length=1)
    query: int = 0


class Seq2SeqRequest(BaseModel):
    vectors: List[List[float]] = Field(..., min_length=1)
    query: int = 0


class IndexInfo(BaseModel):
    db_label: str
    frames: int
    dim: int
    strategy: str
    keyframes: int
    ratio: float
    ams: Optional[float] = None
    region_min: int
    region_mean: float
    region_max: int
    covers_all_frames: bool
