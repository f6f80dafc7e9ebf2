"""Seeded piecewise-smooth brain-like phantoms (ellipses plus smooth texture)."""

from __future__ import annotations

from typing import List

import numpy as np


def _ellipse(yy: np.ndarray, xx: np.ndarray, cy: float, cx: float, ry: float, rx: float, angle: float) -> np.ndarray:
    cos, sin = np.cos(angle), np.sin(angle)
    u = (xx - cx) * cos + (yy - cy) * sin
    v = -(xx - cx) * sin + (yy - cy) * cos
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def generate_phantom(size: int, rng: np.random.Generator) -> np.ndarray:
    """One size x size phantom in [0, 1]."""
    coords = np.linspace(-1.0, 1.0, size)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")

    image = np.zeros((size, size))
    outer_ry, outer_rx = rng.uniform(0.78, 0.92), rng.uniform(0.62, 0.78)
    tilt = rng.uniform(-0.2, 0.2)
    image[_ellipse(yy, xx, 0.0, 0.0, outer_ry, outer_rx, tilt)] = rng.uniform(0.8, 1.0)

    inner = _ellipse(yy, xx, 0.0, 0.0, outer_ry - 0.08, outer_rx - 0.08, tilt)
    image[inner] = rng.uniform(0.25, 0.4)

    # smooth tissue texture inside the inner ellipse
    texture = np.zeros_like(image)
    for _ in range(4):
        fy, fx = rng.uniform(1.0, 4.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        texture += np.cos(np.pi * (fy * yy + fx * xx) + phase)
    image[inner] += 0.05 * texture[inner]

    for _ in range(rng.integers(3, 7)):
        cy, cx = rng.uniform(-0.45, 0.45, size=2)
        ry, rx = rng.uniform(0.05, 0.22, size=2)
        blob = _ellipse(yy, xx, cy, cx, ry, rx, rng.uniform(0, np.pi)) & inner
        image[blob] = rng.uniform(0.1, 0.9)

    return np.clip(image, 0.0, 1.0)


def generate_phantoms(count: int, size: int, seed: int = 0) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [generate_phantom(size, rng) for _ in range(count)]
