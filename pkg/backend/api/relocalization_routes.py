"""
Query routes over the SearchIndex loaded by `serve`
"""

import logging

import numpy as np
from fastapi import APIRouter, HTTPException, Request
from schemas.query import Im2ImRequest, IndexInfo, QueryReportOut, Seq2SeqRequest
from services.errors import ContractError, DataError
from services.retrieval import SearchIndex, query_im2im, query_seq2seq, region_stats
from services.system_logger import system_logger

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["Relocalization"])


def _index(request: Request) -> SearchIndex:
    index = getattr(request.app.state, "index", None)
    if index is None:
        raise HTTPException(status_code=503, detail="No index loaded")
    return index


def _bad_request(e: Exception, operation: str) -> HTTPException:
    system_logger.log_error(type(e).__name__, str(e), {"operation": operation})
    return HTTPException(status_code=400, detail=str(e))


@router.get("/index", response_model=IndexInfo)
async def get_index_info(request: Request):
    index = _index(request)
    stats = region_stats(index)
    return IndexInfo(
        db_label=index.db.source_label,
        frames=stats["frames"],
        dim=index.db.dim,
        strategy=index.keyframes.strategy,
        keyframes=stats["keyframes"],
        ratio=stats["ratio"],
        ams=index.keyframes.ams,
        region_min=stats["region_min"],
        region_mean=stats["region_mean"],
        region_max=stats["region_max"],
        covers_all_frames=stats["covers_all_frames"],
    )


@router.post("/query/im2im", response_model=QueryReportOut)
async def post_im2im(payload: Im2ImRequest, request: Request):
    index = _index(request)
    try:
        # unit-normalize like the ingest path does
        vector = np.asarray(payload.vector, dtype=np.float64)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise ContractError("query vector has zero norm")
        report = query_im2im(index, vector / norm)
    except (DataError, ValueError) as e:
        raise _bad_request(e, "im2im")
    except Exception as e:
        logger.error(f"im2im query failed: {e}")
        raise HTTPException(status_code=500, detail=f"Query failed: {str(e)}")
    system_logger.log_query("im2im", report.best_index, report.comparisons, report.elapsed_ns)
    return QueryReportOut.from_report(payload.query, report)


@router.post("/query/seq2seq", response_model=QueryReportOut)
async def post_seq2seq(payload: Seq2SeqRequest, request: Request):
    index = _index(request)
    try:
        vectors = np.asarray(payload.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ContractError("query sequence rows must share one dimension")
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if (norms == 0).any():
            raise ContractError("query sequence holds a zero vector")
        report = query_seq2seq(index, vectors / norms)
    except (DataError, ValueError) as e:
        raise _bad_request(e, "seq2seq")
    except Exception as e:
        logger.error(f"seq2seq query failed: {e}")
        raise HTTPException(status_code=500, detail=f"Query failed: {str(e)}")
    system_logger.log_query("seq2seq", report.best_index, report.comparisons, report.elapsed_ns)
    return QueryReportOut.from_report(payload.query, report)
