"""
Grayscale PGM (P5) image I/O.

Intensities are normalized to [0, 1] on load and rescaled on save. Writing
at 16 bits and reading back is lossless for already-quantized images.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from core.errors import DataFormatError, EmptyDatasetError, ShapeError
from utils.logging_config import get_logger

logger = get_logger("images")

BitDepth = Literal[8, 16]
_MAXVAL = {8: 255, 16: 65535}


def quantize(image: np.ndarray, bit_depth: BitDepth = 16) -> np.ndarray:
    """Integer codes for ``image`` clipped to [0, 1]."""
    maxval = _MAXVAL[bit_depth]
    return np.rint(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * maxval).astype(np.int64)


def write_pgm(image: np.ndarray, path: Union[str, Path], bit_depth: BitDepth = 16) -> Path:
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[0] == 1:
        image = image[0]
    if image.ndim != 2:
        raise ShapeError("PGM images must be 2-d", {"shape": list(image.shape)})
    if bit_depth not in _MAXVAL:
        raise DataFormatError("PGM bit depth must be 8 or 16", {"bit_depth": bit_depth})

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    codes = quantize(image, bit_depth)
    if bit_depth == 8:
        pil = Image.fromarray(codes.astype(np.uint8))
    else:
        pil = Image.fromarray(codes.astype(np.int32))
    pil.save(path, format="PPM")
    return path


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as pil:
            if pil.format != "PPM" or pil.mode not in {"L", "I", "I;16", "I;16B"}:
                raise DataFormatError("expected a grayscale PGM image", {"path": str(path), "mode": pil.mode})
            maxval = 255 if pil.mode == "L" else 65535
            codes = np.asarray(pil, dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise DataFormatError("unreadable image file", {"path": str(path)}) from exc
    return codes / maxval


def list_images(directory: Union[str, Path]) -> List[Path]:
    return sorted(Path(directory).glob("*.pgm"))


def load_image_dir(directory: Union[str, Path]) -> Tuple[List[str], List[np.ndarray]]:
    """Image ids (file stems) and arrays of every PGM in ``directory``; extents must agree."""
    paths = list_images(directory)
    if not paths:
        raise EmptyDatasetError("no PGM images found", {"directory": str(directory)})
    images = [read_pgm(p) for p in paths]
    shape = images[0].shape
    for p, img in zip(paths, images):
        if img.shape != shape:
            raise ShapeError("dataset images must share extents", {"path": str(p), "expected": list(shape), "got": list(img.shape)})
    logger.info("dataset loaded", data={"directory": str(directory), "images": len(images), "shape": list(shape)})
    return [p.stem for p in paths], images
