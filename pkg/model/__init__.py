"""
DGDN Model Package

- network: unrolled stages (linear reconstruction + geometric distillation)
- checkpoint: binary checkpoint format
"""
