"""
Fourier Measurement Model

Unitary 2-D DFT, the under-sampled operator F = P * DFT, and its adjoint.

Images are real 1 x H x W tensors. k-space is complex and stored densely
with zeros off the mask. ``apply_forward`` / ``apply_adjoint`` are
differentiable tape ops; they are exact transposes of each other under the
real inner product, which is what makes the gradient rules below correct.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Union

import numpy as np

from core.errors import DataFormatError, ShapeError
from core.tensor import Tensor, complex_dtype, record
from mri.masks import SamplingMask
from utils.logging_config import get_logger

logger = get_logger("fourier")

Direction = Literal["forward", "inverse"]

KSPACE_MAGIC = b"KSP1"
_KSPACE_HEADER = struct.Struct("<4sII")


def unitary_dft2(image: np.ndarray, direction: Direction = "forward") -> np.ndarray:
    """Orthonormal 2-D DFT over the last two axes."""
    image = np.asarray(image)
    if image.ndim < 2 or image.size == 0:
        raise ShapeError("unitary_dft2 needs a non-empty array with at least two axes", {"shape": list(image.shape)})
    if direction == "forward":
        return np.fft.fft2(image, norm="ortho")
    if direction == "inverse":
        return np.fft.ifft2(image, norm="ortho")
    raise ValueError(f"unknown direction: {direction}")


def _dft_1d(n: int, direction: Direction) -> np.ndarray:
    sign = -1.0 if direction == "forward" else 1.0
    k = np.arange(n)
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def naive_dft2(image: np.ndarray, direction: Direction = "forward") -> np.ndarray:
    """Dense-matrix evaluation of the unitary DFT (reference for the FFT path)."""
    image = np.asarray(image)
    if image.ndim != 2 or image.size == 0:
        raise ShapeError("naive_dft2 expects a non-empty H x W array", {"shape": list(image.shape)})
    height, width = image.shape
    return _dft_1d(height, direction) @ image @ _dft_1d(width, direction).T


def dft_matrix(height: int, width: int, mask: Union[SamplingMask, np.ndarray, None] = None) -> np.ndarray:
    """M x N matrix of the sampled unitary DFT acting on row-major vectorized images."""
    full = np.kron(_dft_1d(height, "forward"), _dft_1d(width, "forward"))
    if mask is None:
        return full
    grid = mask.grid if isinstance(mask, SamplingMask) else np.asarray(mask, dtype=bool)
    return full[grid.ravel()]


@dataclass(frozen=True)
class KSpaceData:
    values: np.ndarray
    mask: SamplingMask

    def __post_init__(self):
        values = np.array(self.values, dtype=complex_dtype())
        if values.shape != self.mask.shape:
            raise ShapeError("k-space extents differ from mask", {"values": list(values.shape), "mask": list(self.mask.shape)})
        if np.any(values[~self.mask.grid] != 0):
            raise DataFormatError("k-space has nonzero entries off the sampling mask")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def as_tensor(self) -> Tensor:
        return Tensor.constant(self.values[None])

    @classmethod
    def from_tensor(cls, tensor: Tensor, mask: SamplingMask) -> "KSpaceData":
        return cls(values=tensor.data.reshape(mask.shape), mask=mask)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


@dataclass(frozen=True)
class MeasurementOp:
    mask: SamplingMask

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def lipschitz(self) -> float:
        # Rows of P*DFT are orthonormal, so ||F^H F|| = 1.
        return 1.0

    def check_image(self, x: Tensor) -> None:
        if x.shape != (1, self.height, self.width):
            raise ShapeError(
                "image extents do not match the measurement operator",
                {"expected": [1, self.height, self.width], "got": list(x.shape)},
            )


def apply_forward(op: MeasurementOp, x: Tensor) -> Tensor:
    """Fx = P * DFT(x) as a complex 1 x H x W tensor, zero off the mask."""
    op.check_image(x)
    if x.is_complex:
        raise ShapeError("apply_forward expects a real image")
    grid = op.mask.grid

    def _backward(g):
        return (np.fft.ifft2(grid * g, norm="ortho").real,)

    return record("fourier_forward", (x,), grid * np.fft.fft2(x.data, norm="ortho"), _backward)


def apply_adjoint(op: MeasurementOp, y: Union[Tensor, KSpaceData]) -> Tensor:
    """F^H y = Re(IDFT(P y)) as a real 1 x H x W tensor."""
    if isinstance(y, KSpaceData):
        y = y.as_tensor()
    if y.shape != (1, op.height, op.width):
        raise ShapeError(
            "k-space extents do not match the measurement operator",
            {"expected": [1, op.height, op.width], "got": list(y.shape)},
        )
    grid = op.mask.grid

    def _backward(g):
        return (grid * np.fft.fft2(g, norm="ortho"),)

    image = np.fft.ifft2(grid * y.data, norm="ortho").real
    return record("fourier_adjoint", (y,), image, _backward)


def simulate_measurement(x: Union[np.ndarray, Tensor], mask: SamplingMask) -> KSpaceData:
    """Noiseless under-sampled k-space of a ground-truth image."""
    image = x.data if isinstance(x, Tensor) else np.asarray(x)
    if image.ndim == 2:
        image = image[None]
    if image.size and (image.min() < 0.0 or image.max() > 1.0):
        logger.warning("ground truth outside [0, 1]", data={"min": float(image.min()), "max": float(image.max())})
    op = MeasurementOp(mask)
    kspace = apply_forward(op, Tensor.constant(image))
    return KSpaceData.from_tensor(kspace, mask)


def write_kspace(data: KSpaceData, path: Union[str, Path]) -> Path:
    """Binary k-space: magic, u32 H, u32 W, then row-major (re, im) float64 pairs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = data.shape
    pairs = np.stack([data.values.real, data.values.imag], axis=-1).astype("<f8")
    path.write_bytes(_KSPACE_HEADER.pack(KSPACE_MAGIC, height, width) + pairs.tobytes())
    return path


def read_kspace_values(path: Union[str, Path]) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _KSPACE_HEADER.size:
        raise DataFormatError("k-space file is truncated", {"path": str(path)})
    magic, height, width = _KSPACE_HEADER.unpack_from(raw)
    if magic != KSPACE_MAGIC:
        raise DataFormatError("not a k-space file", {"path": str(path), "magic": magic.hex()})
    expected = _KSPACE_HEADER.size + height * width * 16
    if len(raw) != expected:
        raise DataFormatError("k-space payload size mismatch", {"path": str(path), "expected": expected, "got": len(raw)})
    pairs = np.frombuffer(raw, dtype="<f8", offset=_KSPACE_HEADER.size).reshape(height, width, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def read_kspace(path: Union[str, Path], mask: SamplingMask) -> KSpaceData:
    return KSpaceData(values=read_kspace_values(path), mask=mask)
