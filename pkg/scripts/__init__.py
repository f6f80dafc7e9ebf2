"""
DGDN Scripts Package

- dgdn_cli.py: command-line surface (mask-gen, phantoms, train, reconstruct, baseline, eval)
"""

__version__ = "1.0.0"
