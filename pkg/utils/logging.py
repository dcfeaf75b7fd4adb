"""
Structured logging setup using loguru.
Console output for runs, optional rotating text/JSON files, and helpers for
events, metrics and trace spans emitted by experiments and ensembles.
"""

import sys
from pathlib import Path
from typing import Dict, Any, Optional
from datetime import datetime, timezone
from loguru import logger

from utils.config import get_settings


CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{module}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
    "<level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {module}:{function}:{line} - {message}"


def setup_logging(level: Optional[str] = None, to_file: Optional[bool] = None) -> None:
    """
    Configure loguru logger with console and optional file handlers.

    Args:
        level: Console level; defaults to settings.log_level
        to_file: Write rotating files under settings.log_dir; defaults to settings.log_to_file
    """
    settings = get_settings()
    level = level or settings.log_level
    to_file = settings.log_to_file if to_file is None else to_file

    # Remove default logger
    logger.remove()

    logger.add(
        sys.stderr,
        format=CONSOLE_FORMAT,
        level=level,
        colorize=True,
    )

    if to_file:
        log_dir = Path(settings.log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        logger.add(
            str(log_dir / "pnrsim_{time:YYYY-MM-DD}.log"),
            format=FILE_FORMAT,
            level="DEBUG",
            rotation="00:00",
            retention="30 days",
            compression="zip",
        )

        if settings.log_format.lower() == "json":
            logger.add(
                str(log_dir / "pnrsim_json_{time:YYYY-MM-DD}.json"),
                format="{message}",
                serialize=True,
                level="DEBUG",
                rotation="00:00",
                retention="30 days",
                compression="zip",
            )

        logger.add(
            str(log_dir / "errors_{time:YYYY-MM-DD}.log"),
            format=FILE_FORMAT,
            level="ERROR",
            rotation="00:00",
            retention="90 days",
            compression="zip",
        )

    logger.debug("Logging system initialized", log_level=level, log_format=settings.log_format)


def log_event(event_type: str, event_data: Dict[str, Any]) -> None:
    """
    Log a discrete event.

    Args:
        event_type: Type of event (e.g., 'ensemble_finished')
        event_data: Event data dictionary
    """
    log_data = {
        "event_type": event_type,
        "event_data": event_data,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }

    logger.info(f"EVENT: {event_type}", **log_data)


def log_metric(metric_name: str, metric_value: float, metric_unit: str = "", tags: Optional[Dict[str, str]] = None) -> None:
    """
    Log a metric.

    Args:
        metric_name: Name of the metric (e.g., 'trajectories_per_second')
        metric_value: Metric value
        metric_unit: Unit of measurement (e.g., 'ms')
        tags: Optional tags for categorization
    """
    log_data = {
        "metric_name": metric_name,
        "metric_value": metric_value,
        "metric_unit": metric_unit,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }

    if tags:
        log_data["tags"] = tags

    logger.debug(f"METRIC: {metric_name}={metric_value}{metric_unit}", **log_data)


def log_trace(trace_id: str, span_name: str, duration_ms: float, status: str = "success", **kwargs) -> None:
    """
    Log a trace span.

    Args:
        trace_id: Identifier shared by the spans of one run
        span_name: Name of the span (e.g., 'outcomes')
        duration_ms: Duration in milliseconds
        status: 'success' or 'error'
        **kwargs: Additional trace data
    """
    log_data = {
        "trace_id": trace_id,
        "span_name": span_name,
        "duration_ms": duration_ms,
        "status": status,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        **kwargs,
    }

    logger.debug(f"TRACE: {span_name} [{trace_id}] - {duration_ms}ms ({status})", **log_data)


def get_logger():
    """Get the configured logger instance."""
    return logger
