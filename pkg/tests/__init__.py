"""
DGDN Tests Package
"""
