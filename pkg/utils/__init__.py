"""
DGDN Utils Package

- LoggingConfig: Structured logging configuration
"""

__version__ = "1.0.0"
