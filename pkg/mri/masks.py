"""
k-space Sampling Masks

Masks are stored in numpy FFT order: the k-space origin (DC) is grid[0, 0].
Pseudo-radial masks are drawn in centered coordinates and shifted.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from core.errors import ConfigurationError, DataFormatError
from utils.logging_config import get_logger

logger = get_logger("masks")

BUDGET_TOLERANCE = 0.005


class MaskScheme(str, Enum):
    PSEUDO_RADIAL = "pseudo-radial"
    RANDOM_UNIFORM = "random-uniform"
    FULL = "full"


@dataclass(frozen=True)
class SamplingMask:
    grid: np.ndarray
    ratio: float
    scheme: MaskScheme
    seed: int

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=bool)
        if grid.ndim != 2 or grid.size == 0:
            raise ConfigurationError("mask grid must be a non-empty 2-d array", {"shape": list(grid.shape)})
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigurationError("mask ratio must lie in (0, 1]", {"ratio": self.ratio})
        if not grid[0, 0]:
            raise ConfigurationError("mask must sample the DC coefficient", {"shape": list(grid.shape)})
        # Within half a percent of the grid, or one sample on tiny grids.
        slack = max(BUDGET_TOLERANCE * grid.size, 1.0)
        if abs(int(grid.sum()) - self.ratio * grid.size) > slack:
            raise ConfigurationError(
                "mask sample count does not match its ratio",
                {"ratio": self.ratio, "count": int(grid.sum()), "size": int(grid.size)},
            )
        grid = grid.copy()
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "scheme", MaskScheme(self.scheme))

    @property
    def shape(self) -> tuple:
        return self.grid.shape

    @property
    def count(self) -> int:
        return int(self.grid.sum())

    @property
    def achieved_ratio(self) -> float:
        return self.count / self.grid.size

    @property
    def is_full(self) -> bool:
        return bool(self.grid.all())

    def centered(self) -> np.ndarray:
        """Grid with the origin moved to the image center, for display."""
        return np.fft.fftshift(self.grid)


def _spoke_grid(height: int, width: int, n_spokes: int, offset: float) -> np.ndarray:
    cy, cx = height // 2, width // 2
    half = np.arange(0.0, np.hypot(height, width) / 2 + 0.5, 0.5)
    radii = np.concatenate([-half[:0:-1], half])
    angles = offset + np.pi * np.arange(n_spokes) / n_spokes
    ys = np.rint(cy + np.outer(np.sin(angles), radii)).astype(int)
    xs = np.rint(cx + np.outer(np.cos(angles), radii)).astype(int)
    inside = (ys >= 0) & (ys < height) & (xs >= 0) & (xs < width)
    grid = np.zeros((height, width), dtype=bool)
    grid[ys[inside], xs[inside]] = True
    return grid


def _pseudo_radial(height: int, width: int, target: int, rng: np.random.Generator) -> np.ndarray:
    phase = rng.random()
    max_spokes = 4 * max(height, width)
    for n_spokes in range(1, max_spokes + 1):
        grid = _spoke_grid(height, width, n_spokes, phase * np.pi / n_spokes)
        if grid.sum() >= target:
            break

    # Hit the budget exactly: fill nearest-to-center holes or drop outermost samples.
    yy, xx = np.mgrid[0:height, 0:width]
    dist = np.hypot(yy - height // 2, xx - width // 2).ravel()
    tiebreak = rng.random(height * width)
    flat = grid.ravel()
    count = int(flat.sum())
    if count < target:
        holes = np.flatnonzero(~flat)
        order = holes[np.lexsort((tiebreak[holes], dist[holes]))]
        flat[order[: target - count]] = True
    elif count > target:
        taken = np.flatnonzero(flat)
        order = taken[np.lexsort((tiebreak[taken], -dist[taken]))]
        flat[order[: count - target]] = False
    return np.fft.ifftshift(flat.reshape(height, width))


def _random_uniform(height: int, width: int, target: int, rng: np.random.Generator) -> np.ndarray:
    flat = np.zeros(height * width, dtype=bool)
    flat[0] = True
    flat[1 + rng.choice(height * width - 1, size=target - 1, replace=False)] = True
    return flat.reshape(height, width)


def generate_mask(
    height: int,
    width: int,
    ratio: float,
    scheme: Union[MaskScheme, str] = MaskScheme.PSEUDO_RADIAL,
    seed: int = 0,
) -> SamplingMask:
    """Deterministic sampling mask with the DC coefficient always sampled."""
    if height < 1 or width < 1:
        raise ConfigurationError("mask extents must be positive", {"height": height, "width": width})
    if not 0.0 < ratio <= 1.0:
        raise ConfigurationError("sampling ratio must lie in (0, 1]", {"ratio": ratio})
    try:
        scheme = MaskScheme(scheme)
    except ValueError as exc:
        raise ConfigurationError(f"unknown mask scheme: {scheme}") from exc
    if scheme is MaskScheme.FULL and ratio != 1.0:
        raise ConfigurationError("the full scheme samples every coefficient; ratio must be 1.0", {"ratio": ratio})

    total = height * width
    target = max(1, int(round(ratio * total)))
    rng = np.random.default_rng(seed)

    if target >= total:
        grid = np.ones((height, width), dtype=bool)
    elif scheme is MaskScheme.PSEUDO_RADIAL:
        grid = _pseudo_radial(height, width, target, rng)
    else:
        grid = _random_uniform(height, width, target, rng)

    mask = SamplingMask(grid=grid, ratio=float(ratio), scheme=scheme, seed=int(seed))
    logger.info(
        "mask generated",
        data={"shape": [height, width], "scheme": scheme.value, "ratio": ratio, "count": mask.count},
    )
    return mask


def write_mask(mask: SamplingMask, path: Union[str, Path]) -> Path:
    """Plain-text mask file: header line then H rows of 0/1 characters."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = mask.shape
    lines = [f"mask {height} {width} {mask.ratio!r} {mask.scheme.value} {mask.seed}"]
    lines.extend("".join("1" if v else "0" for v in row) for row in mask.grid)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_mask(path: Union[str, Path]) -> SamplingMask:
    path = Path(path)
    lines = path.read_text(encoding="ascii").splitlines()
    if not lines:
        raise DataFormatError("mask file is empty", {"path": str(path)})
    header = lines[0].split()
    if len(header) != 6 or header[0] != "mask":
        raise DataFormatError("mask header must read 'mask <H> <W> <ratio> <scheme> <seed>'", {"path": str(path)})
    try:
        height, width = int(header[1]), int(header[2])
        ratio, scheme, seed = float(header[3]), MaskScheme(header[4]), int(header[5])
    except ValueError as exc:
        raise DataFormatError(f"malformed mask header: {exc}", {"path": str(path)}) from exc

    rows = lines[1:1 + height]
    if len(rows) != height or any(len(r) != width or set(r) - {"0", "1"} for r in rows):
        raise DataFormatError("mask body does not match its header", {"path": str(path), "height": height, "width": width})
    grid = np.array([[c == "1" for c in row] for row in rows], dtype=bool)
    try:
        return SamplingMask(grid=grid, ratio=ratio, scheme=scheme, seed=seed)
    except ConfigurationError as exc:
        raise DataFormatError(f"inconsistent mask file: {exc.message}", {"path": str(path), **exc.details}) from exc
