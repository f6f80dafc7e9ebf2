"""
Classical Baselines

Zero-filling and ISTA on E(x) = 1/2 ||Fx - y||^2 + gamma * ||T x||_1 with T the
orthonormal 2-D DCT (or the identity). The gradient step is the same linear
reconstruction the network uses; the proximal step is soft thresholding in
the transform domain with threshold eta * gamma.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from scipy.fft import dctn, idctn

from core.errors import ConfigurationError
from core.tensor import Tensor
from evaluation.metrics import psnr
from model.network import linear_recon
from mri.fourier import KSpaceData, MeasurementOp, apply_adjoint, apply_forward
from schemas.models import IstaConfig
from utils.logging_config import get_logger

logger = get_logger("baselines")

Transform = Literal["dct2", "identity"]


def zero_filling(y: KSpaceData, op: MeasurementOp) -> np.ndarray:
    """Inverse DFT of the zero-filled k-space, as an H x W image."""
    return apply_adjoint(op, y).numpy()[0]


def soft_threshold(v: Union[np.ndarray, Tensor], theta: float) -> Union[np.ndarray, Tensor]:
    """sign(v) * max(|v| - theta, 0)."""
    if theta < 0:
        raise ConfigurationError("threshold must be non-negative", {"theta": theta})
    values = v.data if isinstance(v, Tensor) else np.asarray(v, dtype=float)
    shrunk = np.sign(values) * np.maximum(np.abs(values) - theta, 0.0)
    return Tensor.constant(shrunk) if isinstance(v, Tensor) else shrunk


def dct2(image: np.ndarray, direction: Literal["forward", "inverse"] = "forward") -> np.ndarray:
    """Orthonormal type-II 2-D DCT; the inverse is the type-III transform."""
    if direction == "forward":
        return dctn(np.asarray(image, dtype=float), type=2, norm="ortho")
    if direction == "inverse":
        return idctn(np.asarray(image, dtype=float), type=2, norm="ortho")
    raise ValueError(f"unknown direction: {direction}")


def _transform(x: np.ndarray, transform: Transform, direction: str) -> np.ndarray:
    return dct2(x, direction) if transform == "dct2" else x


def objective(x: np.ndarray, y: KSpaceData, op: MeasurementOp, gamma: float, transform: Transform = "dct2") -> float:
    fx = apply_forward(op, Tensor.constant(np.asarray(x)[None])).data[0]
    fidelity = 0.5 * float(np.sum(np.abs(fx - y.values) ** 2))
    return fidelity + gamma * float(np.sum(np.abs(_transform(x, transform, "forward"))))


@dataclass
class IstaResult:
    image: np.ndarray
    objectives: List[float] = field(default_factory=list)
    psnrs: List[Optional[float]] = field(default_factory=list)


def ista_reconstruct(
    y: KSpaceData,
    op: MeasurementOp,
    cfg: Optional[IstaConfig] = None,
    reference: Optional[np.ndarray] = None,
) -> IstaResult:
    """ISTA from the zero-filled image; entry 0 of the traces describes x0."""
    cfg = cfg or IstaConfig()
    if not 0 < cfg.eta <= 1 or cfg.steps < 1 or cfg.gamma < 0:
        raise ConfigurationError("invalid ISTA configuration", cfg.model_dump())

    y_t = y.as_tensor()
    eta = Tensor.constant(cfg.eta)
    threshold = cfg.eta * cfg.gamma
    x = zero_filling(y, op)

    result = IstaResult(image=x)

    def _track(image: np.ndarray) -> None:
        result.objectives.append(objective(image, y, op, cfg.gamma, cfg.transform))
        result.psnrs.append(psnr(image, reference) if reference is not None else None)

    _track(x)
    for _ in range(cfg.steps):
        m = linear_recon(Tensor.constant(x[None]), eta, y_t, op).numpy()[0]
        coeffs = soft_threshold(_transform(m, cfg.transform, "forward"), threshold)
        x = _transform(coeffs, cfg.transform, "inverse")
        _track(x)

    result.image = x
    logger.info(
        "ista finished",
        data={"steps": cfg.steps, "eta": cfg.eta, "gamma": cfg.gamma, "objective": result.objectives[-1]},
    )
    return result


def write_objective_csv(result: IstaResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["step", "objective", "psnr"])
        for step, (value, quality) in enumerate(zip(result.objectives, result.psnrs)):
            writer.writerow([step, repr(value), "" if quality is None else repr(quality)])
    return path
