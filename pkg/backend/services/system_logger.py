"""
Run event collector.

Keeps a bounded in-memory record of clustering, benchmark and query events so
`inspect` and the HTTP service can report what a process has done.
"""

import logging
import threading
from collections import Counter, deque
from dataclasses import asdict, dataclass
from datetime import datetime
from typing import Callable, Deque, Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

EventListener = Callable[[Dict], None]

CATEGORIES: Tuple[str, ...] = ("clustering", "benchmark", "query", "system_error")
LEVELS: Tuple[str, ...] = ("INFO", "WARNING", "ERROR")


@dataclass
class LogEntry:
    timestamp: str
    level: str  # INFO, WARNING, ERROR
    category: str  # clustering, benchmark, query, system_error
    message: str
    details: Optional[Dict] = None

    def to_dict(self):
        return asdict(self)


class SystemLogCollector:
    """Thread-safe ring buffer of run events"""

    def __init__(self, max_logs: int = 500):
        """
        Args:
            max_logs: maximum number of entries kept in memory
        """
        self._logs: Deque[LogEntry] = deque(maxlen=max_logs)
        self._lock = threading.Lock()
        self._listeners: List[EventListener] = []

    def add_log(self, level: str, category: str, message: str, details: Optional[Dict] = None):
        if level not in LEVELS or category not in CATEGORIES:
            raise ValueError(f"unknown log level/category {level}/{category}")
        entry = LogEntry(
            timestamp=datetime.now().isoformat(),
            level=level,
            category=category,
            message=message,
            details=details or {},
        )
        with self._lock:
            self._logs.append(entry)
            listeners = list(self._listeners)

        for callback in listeners:
            try:
                callback(entry.to_dict())
            except Exception as e:
                logger.error(f"Failed to notify log listener: {e}")

    def get_logs(self, level: Optional[str] = None, category: Optional[str] = None, limit: int = 100) -> List[Dict]:
        """Newest-first entries, optionally filtered by level and category."""
        with self._lock:
            logs = list(self._logs)
        logs.reverse()
        if level:
            logs = [log for log in logs if log.level == level]
        if category:
            logs = [log for log in logs if log.category == category]
        return [log.to_dict() for log in logs[:limit]]

    def counts(self) -> Dict[str, int]:
        """Entries currently held per category."""
        with self._lock:
            held = Counter(log.category for log in self._logs)
        return {category: held.get(category, 0) for category in CATEGORIES}

    def clear_logs(self):
        with self._lock:
            self._logs.clear()

    def add_listener(self, callback: EventListener):
        with self._lock:
            self._listeners.append(callback)

    def remove_listener(self, callback: EventListener):
        with self._lock:
            if callback in self._listeners:
                self._listeners.remove(callback)

    def log_clustering(self, label: str, n: int, k: int, init: str, ams: float, swaps: int):
        self.add_log(
            level="INFO",
            category="clustering",
            message=f"[{label}] k={k}/{n} init={init}: AMS {ams:.4f} after {swaps} swaps",
            details={"db": label, "n": n, "k": k, "init": init, "ams": ams, "swaps": swaps},
        )

    def log_benchmark_cell(self, strategy: str, task: str, ratio: float, accuracy: float, mean_comparisons: float):
        self.add_log(
            level="INFO",
            category="benchmark",
            message=f"{strategy}/{task} @ {ratio:g}: accuracy {accuracy:.3f}, {mean_comparisons:.1f} comparisons",
            details={
                "strategy": strategy,
                "task": task,
                "ratio": ratio,
                "accuracy": accuracy,
                "mean_comparisons": mean_comparisons,
            },
        )

    def log_skip(self, strategy: str, reason: str):
        self.add_log(
            level="WARNING",
            category="benchmark",
            message=f"[{strategy}] skipped: {reason}",
            details={"strategy": strategy, "reason": reason},
        )

    def log_query(self, task: str, best: int, comparisons: int, elapsed_ns: int):
        self.add_log(
            level="INFO",
            category="query",
            message=f"{task} -> frame {best} ({comparisons} comparisons, {elapsed_ns / 1e6:.3f} ms)",
            details={"task": task, "best": best, "comparisons": comparisons, "ns": elapsed_ns},
        )

    def log_error(self, error_type: str, message: str, details: Optional[Dict] = None):
        self.add_log(
            level="ERROR",
            category="system_error",
            message=f"[{error_type}] {message}",
            details=details or {},
        )


system_logger = SystemLogCollector(max_logs=500)
