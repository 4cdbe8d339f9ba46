"""
Observability and logging utilities for computations.

Provides structured logging, metrics collection, and error tracking for the
laboratory's numerical operations.

Architecture:
- configure_logging() sets up structlog once per process (CLI entry point, tests)
- log_computation() is the entry point; called once per finished operation
- ComputationMetrics tracks aggregated stats in-memory (with size limits)
- timed_computation() wraps an operation and reports duration and failure
"""

import json
import logging
import sys
import time
from collections import deque
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, Optional

import structlog

logger = structlog.get_logger()


def configure_logging(level: str = "WARNING", json_output: bool = False) -> None:
    """
    Configure structlog for the process.

    Log lines always go to stderr; stdout is reserved for data.
    """
    renderer = (
        structlog.processors.JSONRenderer()
        if json_output
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            getattr(logging, level.upper(), logging.WARNING)
        ),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


class ComputationMetrics:
    """
    Track computation success/failure rates and durations.

    Uses a ring buffer (deque) to limit memory growth over long sessions.
    When the buffer is full, oldest entries are discarded.
    """

    MAX_ENTRIES = 1000

    def __init__(self):
        self.calls = deque(maxlen=self.MAX_ENTRIES)

    def record(self, entry: Dict[str, Any]):
        """Add a computation entry. Old entries auto-discard when full."""
        self.calls.append(entry)

    def get_all(self) -> list:
        return list(self.calls)

    def get_stats(self, filter_by_operation: Optional[str] = None) -> Dict[str, Any]:
        """
        Return aggregated statistics per operation.

        Format:
        {
            "fk_quadrature": {
                "total": 10,
                "success": 9,
                "failed": 1,
                "avg_duration_ms": 24.3,
                "success_rate": 0.9
            },
            ...
        }
        """
        stats: Dict[str, Dict[str, Any]] = {}

        for entry in self.calls:
            operation = entry.get("operation", "unknown")
            if filter_by_operation and operation != filter_by_operation:
                continue

            bucket = stats.setdefault(operation, {
                "total": 0,
                "success": 0,
                "failed": 0,
                "durations_ms": [],
            })
            bucket["total"] += 1
            if entry.get("success"):
                bucket["success"] += 1
            else:
                bucket["failed"] += 1
            if entry.get("duration_ms") is not None:
                bucket["durations_ms"].append(entry["duration_ms"])

        for bucket in stats.values():
            durations = bucket.pop("durations_ms", [])
            bucket["avg_duration_ms"] = round(sum(durations) / len(durations), 2) if durations else 0
            total = bucket["total"]
            bucket["success_rate"] = round(bucket["success"] / total, 3) if total > 0 else 0

        return stats

    def summary(self) -> Dict[str, Any]:
        """Return a high-level summary of all tracked computations"""
        stats = self.get_stats()
        total = sum(v["total"] for v in stats.values())
        success = sum(v["success"] for v in stats.values())
        return {
            "total_calls": total,
            "total_success": success,
            "total_failed": total - success,
            "overall_success_rate": round(success / total, 3) if total > 0 else 0,
            "by_operation": stats,
        }


# Global metrics instance
metrics = ComputationMetrics()


def log_computation(
    operation: str,
    status: str,
    params: Optional[Dict[str, Any]] = None,
    error: Optional[str] = None,
    duration_ms: Optional[float] = None,
    success: Optional[bool] = None,
    **extra: Any,
):
    """
    Log a finished computation with structured metadata.

    Every service operation worth auditing generates exactly one entry via
    this function.

    Args:
        operation: Operation name (e.g., "fk_zero", "estimate_susceptibility")
        status: One of "success", "domain_error", "precision_error",
                "quadrature_error", "budget_error", "error"
        params: Operation parameters (truncated if >500 chars)
        error: Error message, never truncated
        duration_ms: Wall time in milliseconds
        success: Inferred from status when omitted
        **extra: Additional result fields (e.g. value, error_bound)
    """
    if success is None:
        success = status == "success"

    params_str = ""
    if params:
        try:
            params_str = json.dumps(params, default=str)
            if len(params_str) > 500:
                params_str = params_str[:497] + "..."
        except (TypeError, ValueError):
            params_str = "[unserializable]"

    entry: Dict[str, Any] = {
        "operation": operation,
        "status": status,
        "success": success,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if params_str:
        entry["params_preview"] = params_str
    if error:
        entry["error"] = error
    if duration_ms is not None:
        entry["duration_ms"] = round(duration_ms, 2)
    entry.update(extra)

    metrics.record(entry)

    if success:
        logger.info("computation_success", **entry)
    else:
        logger.warning("computation_failed", **entry)


@contextmanager
def timed_computation(operation: str, **params: Any) -> Iterator[Dict[str, Any]]:
    """
    Time a block and log it through log_computation.

    The yielded dict collects result fields to attach to the log entry.
    Exceptions are logged with a status derived from their class and re-raised.
    """
    result: Dict[str, Any] = {}
    start = time.perf_counter()
    try:
        yield result
    except Exception as e:
        status = _status_for(e)
        log_computation(
            operation, status, params=params, error=str(e),
            duration_ms=(time.perf_counter() - start) * 1000.0,
        )
        raise
    log_computation(
        operation, "success", params=params,
        duration_ms=(time.perf_counter() - start) * 1000.0, **result,
    )


def _status_for(exc: Exception) -> str:
    from errors import (
        DomainError, PrecisionError, PreconditionError,
        QuadratureError, SimulationBudgetError,
    )
    if isinstance(exc, (DomainError, PreconditionError)):
        return "domain_error"
    if isinstance(exc, PrecisionError):
        return "precision_error"
    if isinstance(exc, QuadratureError):
        return "quadrature_error"
    if isinstance(exc, SimulationBudgetError):
        return "budget_error"
    return "error"


def get_computation_stats(operation: Optional[str] = None) -> Dict[str, Any]:
    """Aggregated stats: {operation: {total, success, failed, avg_duration_ms, success_rate}}"""
    return metrics.get_stats(filter_by_operation=operation)


def get_computation_summary() -> Dict[str, Any]:
    return metrics.summary()


def reset_metrics():
    """Clear all accumulated metrics."""
    metrics.calls.clear()


def get_recent_computations(limit: int = 10) -> list:
    all_calls = metrics.get_all()
    return all_calls[-limit:] if all_calls else []
