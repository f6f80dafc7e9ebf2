"""
DGDN Core Package

Tensor engine for the reconstruction network:
- Tensor / GradTape: define-by-run reverse-mode differentiation
- ops: the differentiable operator set (conv2d, relu, concat, softplus, l1)
- optim: Adam
- gradcheck: finite-difference gradient oracle
- errors: structured error hierarchy
"""

__version__ = "1.0.0"
