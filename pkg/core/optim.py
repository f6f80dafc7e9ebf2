"""Adam optimizer over tape parameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from core.errors import ConfigurationError, ShapeError
from core.tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigurationError("Adam learning rate must be non-negative", {"lr": self.lr})
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)", {"beta1": self.beta1, "beta2": self.beta2})


def adam_step(
    params: Sequence[Tensor],
    grads: Optional[Sequence[np.ndarray]] = None,
    state: Optional[AdamState] = None,
) -> AdamState:
    """One bias-corrected Adam update; ``grads`` defaults to each ``param.grad``.

    Parameters are updated by assigning fresh arrays. Moment buffers are
    created on the first step and matched to parameters by position.
    """
    state = state or AdamState()
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros(p.shape, dtype=p.dtype) for p in params]
    if len(grads) != len(params):
        raise ShapeError("adam_step: one gradient per parameter required", {"params": len(params), "grads": len(grads)})

    if not state.m:
        state.m = [np.zeros(p.shape, dtype=p.dtype) for p in params]
        state.v = [np.zeros(p.shape, dtype=p.dtype) for p in params]
    if len(state.m) != len(params):
        raise ShapeError("adam_step: moment buffers do not match parameter list", {"params": len(params), "moments": len(state.m)})

    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t

    for i, (param, grad) in enumerate(zip(params, grads)):
        grad = np.asarray(grad)
        if grad.shape != param.shape or state.m[i].shape != param.shape:
            raise ShapeError(
                "adam_step: parameter, gradient and moments must share a shape",
                {"index": i, "param": list(param.shape), "grad": list(grad.shape), "moment": list(state.m[i].shape)},
            )
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (grad * grad)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        param.assign(param.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))

    return state
