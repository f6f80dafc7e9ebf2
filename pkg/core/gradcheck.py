"""
Finite-Difference Gradient Oracle

Central differences compared against tape gradients. Coordinates whose
perturbation moves a relu or l1 input across its kink are excluded, since
the function is not differentiable there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from core.ops import KinkMonitor
from core.tensor import GradTape, Tensor, backward
from utils.logging_config import get_logger

logger = get_logger("gradcheck")


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    checked: int
    skipped_kinks: int
    worst_param: int
    worst_index: int


def _evaluate(loss_fn: Callable[[], Tensor]) -> tuple:
    with KinkMonitor() as monitor:
        value = loss_fn().item()
    return value, monitor.signature()


def gradient_report(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> GradCheckReport:
    """Check d loss / d params for a no-argument scalar ``loss_fn``."""
    for param in params:
        param.zero_grad()
    with GradTape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    analytic = [np.array(p.grad if p.grad is not None else np.zeros(p.shape)) for p in params]

    worst, worst_param, worst_index = 0.0, -1, -1
    checked = skipped = 0
    for pi, param in enumerate(params):
        base = param.numpy()
        for idx in range(base.size):
            plus = base.copy()
            plus.flat[idx] += h
            minus = base.copy()
            minus.flat[idx] -= h

            param.assign(plus)
            f_plus, sig_plus = _evaluate(loss_fn)
            param.assign(minus)
            f_minus, sig_minus = _evaluate(loss_fn)
            param.assign(base)

            if sig_plus != sig_minus:
                skipped += 1
                continue

            numeric = (f_plus - f_minus) / (2.0 * h)
            exact = float(analytic[pi].flat[idx])
            rel = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            checked += 1
            if rel > worst:
                worst, worst_param, worst_index = rel, pi, idx

    report = GradCheckReport(worst, checked, skipped, worst_param, worst_index)
    logger.debug("gradient check", data=dict(report.__dict__))
    return report


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Worst relative error between tape and central-difference gradients of ``f`` at ``x``."""
    leaf = x if x.requires_grad and x.is_leaf else Tensor.parameter(x.data)
    return gradient_report(lambda: f(leaf), [leaf], h).max_rel_error
