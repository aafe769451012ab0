"""
Run event log routes
"""

from typing import Any, Dict, Optional

from fastapi import APIRouter, Query
from services.system_logger import CATEGORIES, LEVELS, system_logger

router = APIRouter(prefix="/api/logs", tags=["Logs"])


@router.get("/")
async def get_logs(
    level: Optional[str] = Query(None, description="Level filter: INFO, WARNING, ERROR"),
    category: Optional[str] = Query(None, description="Category filter: clustering, benchmark, query, system_error"),
    limit: int = Query(100, ge=1, le=500, description="Maximum number of entries"),
) -> Dict[str, Any]:
    logs = system_logger.get_logs(level=level, category=category, limit=limit)
    return {"logs": logs, "total": len(logs)}


@router.get("/categories")
async def get_log_categories() -> Dict[str, Any]:
    return {"categories": list(CATEGORIES), "levels": list(LEVELS), "counts": system_logger.counts()}


@router.delete("/")
async def clear_logs() -> Dict[str, str]:
    system_logger.clear_logs()
    return {"message": "Logs cleared"}
