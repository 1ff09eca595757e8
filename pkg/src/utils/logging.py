import json
import logging
import sys
from typing import Any, Optional

from .config import config

# Run parameters a record may carry through `extra=`; they become top-level JSON keys.
CONTEXT_FIELDS = ("command", "surface", "m", "tau", "kappa", "lam", "order", "nodes")


def run_context(**fields: Any) -> dict[str, Any]:
    """`extra=` mapping for a log call, with unset and unknown fields dropped."""
    unknown = set(fields) - set(CONTEXT_FIELDS)
    if unknown:
        raise ValueError(f"unknown log context fields: {sorted(unknown)}")
    return {key: value for key, value in fields.items() if value is not None}


def _plain(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


class StructuredJSONFormatter(logging.Formatter):
    """One JSON object per record: timestamp, level, message, module and any run context."""

    def format(self, record: logging.LogRecord) -> str:
        log_entry: dict[str, Any] = {
            'timestamp': self.formatTime(record, datefmt='%Y-%m-%dT%H:%M:%S'),
            'level': record.levelname,
            'message': record.getMessage(),
            'module': record.name,
        }
        for key in CONTEXT_FIELDS:
            value = getattr(record, key, None)
            if value is not None:
                log_entry[key] = _plain(value)
        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)
        return json.dumps(log_entry, default=str)


def setup_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """Logger with JSON records on stderr, leaving stdout to command summaries.

    The level comes from LOG_LEVEL (via .env) unless given explicitly.
    """
    logger = logging.getLogger(name)
    if logger.hasHandlers():
        logger.handlers.clear()

    resolved = getattr(logging, (level or config.log_level).upper(), logging.INFO)
    logger.setLevel(resolved)

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(resolved)
    handler.setFormatter(StructuredJSONFormatter())
    logger.addHandler(handler)

    logger.propagate = False
    return logger
