"""
DGDN Configuration Package

- Settings: process-wide numerics and logging settings read from the environment
"""

__version__ = "1.0.0"
