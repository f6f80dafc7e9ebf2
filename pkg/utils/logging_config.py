"""
Logging Configuration

Structured logging setup for the DGDN reconstruction engine.

Every module logs through ``get_logger("<area>")``, a ``StructuredLogger`` on
the ``dgdn.<area>`` logger whose ``data=`` payload lands on the record as
``dgdn_data``. Entry points call ``setup_logging`` once to install the
formatters below.
"""

import json
import logging
import logging.handlers
import os
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Optional


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class DGDNFormatter(logging.Formatter):
    """Pipe-separated formatter with an optional trailing DATA payload."""

    def __init__(self, include_timestamp: bool = True, include_level: bool = True):
        self.include_timestamp = include_timestamp
        self.include_level = include_level

        format_parts = []
        if include_timestamp:
            format_parts.append('%(asctime)s')
        if include_level:
            format_parts.append('%(levelname)s')
        format_parts.extend(['%(name)s', '%(message)s'])

        super().__init__(fmt=' | '.join(format_parts), datefmt='%Y-%m-%d %H:%M:%S')

    def format(self, record):
        formatted = super().format(record)

        if getattr(record, 'dgdn_data', None):
            data_str = json.dumps(record.dgdn_data, default=str, sort_keys=True)
            formatted += f" | DATA: {data_str}"

        return formatted


class JSONFormatter(logging.Formatter):
    """JSON formatter for structured logging."""

    def format(self, record):
        log_entry = {
            'timestamp': _utc_now(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno
        }

        if getattr(record, 'dgdn_data', None):
            log_entry['data'] = record.dgdn_data

        if getattr(record, 'dgdn_context', None):
            log_entry['context'] = record.dgdn_context

        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)

        return json.dumps(log_entry, default=str)


class StructuredLogger:
    """Named logger whose calls take optional context and data payloads."""

    def __init__(self, name: str, config: Optional[Dict[str, Any]] = None):
        self.name = name
        self.config = config or {}
        self.logger = logging.getLogger(name)

    def log_with_context(self, level: str, message: str, context: Dict[str, Any] = None,
                         data: Dict[str, Any] = None):
        """Log message with additional context and data."""
        extra = {}
        if context:
            extra['dgdn_context'] = context
        if data:
            extra['dgdn_data'] = data

        getattr(self.logger, level.lower())(message, extra=extra)

    def info(self, message: str, context: Dict[str, Any] = None, data: Dict[str, Any] = None):
        self.log_with_context('info', message, context, data)

    def warning(self, message: str, context: Dict[str, Any] = None, data: Dict[str, Any] = None):
        self.log_with_context('warning', message, context, data)

    def error(self, message: str, context: Dict[str, Any] = None, data: Dict[str, Any] = None):
        self.log_with_context('error', message, context, data)

    def debug(self, message: str, context: Dict[str, Any] = None, data: Dict[str, Any] = None):
        self.log_with_context('debug', message, context, data)


class LoggingConfig:
    """Installs handlers on the ``dgdn`` logger tree."""

    ROOT = "dgdn"

    def __init__(self, config: Dict[str, Any]):
        self.config = config
        self.loggers: Dict[str, StructuredLogger] = {}
        self._setup_root_logger()

    def _setup_root_logger(self):
        root_logger = logging.getLogger(self.ROOT)
        root_logger.setLevel(getattr(logging, self.config.get('level', 'INFO').upper()))
        root_logger.handlers.clear()
        root_logger.propagate = False

        if self.config.get('console', True):
            console_handler = logging.StreamHandler(sys.stderr)
            if self.config.get('json_console', False):
                console_handler.setFormatter(JSONFormatter())
            else:
                console_handler.setFormatter(DGDNFormatter())
            root_logger.addHandler(console_handler)

        if self.config.get('file', False) and self.config.get('log_file'):
            self._add_file_handler(root_logger)

    def _add_file_handler(self, root_logger: logging.Logger):
        """Add rotating JSON file handler."""
        log_file = self.config['log_file']
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)

        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=self.config.get('max_log_size', 10 * 1024 * 1024),
            backupCount=self.config.get('backup_count', 5)
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(JSONFormatter())
        root_logger.addHandler(file_handler)

    def get_logger(self, name: str) -> StructuredLogger:
        """Get or create a structured logger under the ``dgdn`` tree."""
        qualified = name if name.startswith(self.ROOT) else f"{self.ROOT}.{name}"
        if qualified not in self.loggers:
            self.loggers[qualified] = StructuredLogger(qualified, self.config)
        return self.loggers[qualified]


def setup_logging(config: Dict[str, Any] = None) -> LoggingConfig:
    """Setup logging configuration for the engine."""
    default_config = {
        'level': 'INFO',
        'console': True,
        'file': False,
        'log_file': None,
        'max_log_size': 10 * 1024 * 1024,  # 10MB
        'backup_count': 5,
        'json_console': False,
    }

    if config:
        default_config.update(config)

    return LoggingConfig(default_config)


def get_logger(name: str) -> StructuredLogger:
    """Structured logger without touching handler configuration."""
    qualified = name if name.startswith(LoggingConfig.ROOT) else f"{LoggingConfig.ROOT}.{name}"
    return StructuredLogger(qualified)
