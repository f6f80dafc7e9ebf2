"""
Evaluation Reports

Per-image PSNR/SSIM for every (method, CS ratio) pair, aggregated as
mean +- sample standard deviation and rendered like a results table.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from baselines.classical import ista_reconstruct, zero_filling
from core.errors import EmptyDatasetError, MissingCheckpointError
from data.images import load_image_dir
from data.phantoms import generate_phantoms
from evaluation.metrics import psnr, ssim
from model.checkpoint import load_checkpoint
from model.network import init_model, reconstruct
from mri.fourier import KSpaceData, MeasurementOp, simulate_measurement
from mri.masks import MaskScheme, generate_mask
from schemas.models import EvalConfig, IstaConfig, MethodConfig, TrainConfig
from utils.logging_config import get_logger

logger = get_logger("evaluation")

Reconstructor = Callable[[KSpaceData, MeasurementOp], np.ndarray]


@dataclass(frozen=True)
class ImageRow:
    method: str
    cs_ratio: float
    image: str
    psnr: float
    ssim: float


@dataclass(frozen=True)
class AggregateRow:
    method: str
    cs_ratio: float
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample std; +inf entries (perfect PSNR) propagate as documented."""
    arr = np.asarray(values, dtype=np.float64)
    infinite = np.isinf(arr)
    if infinite.all():
        return math.inf, 0.0
    if infinite.any():
        return math.inf, math.inf
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


@dataclass
class EvalReport:
    rows: List[ImageRow] = field(default_factory=list)
    aggregates: List[AggregateRow] = field(default_factory=list)

    @classmethod
    def from_rows(cls, rows: Sequence[ImageRow]) -> "EvalReport":
        groups: Dict[Tuple[str, float], List[ImageRow]] = {}
        for row in rows:
            groups.setdefault((row.method, row.cs_ratio), []).append(row)
        aggregates = []
        for (method, ratio), members in groups.items():
            p_mean, p_std = mean_std([r.psnr for r in members])
            s_mean, s_std = mean_std([r.ssim for r in members])
            aggregates.append(AggregateRow(method, ratio, p_mean, p_std, s_mean, s_std))
        return cls(rows=list(rows), aggregates=aggregates)

    def aggregate(self, method: str, ratio: float) -> Optional[AggregateRow]:
        for row in self.aggregates:
            if row.method == method and abs(row.cs_ratio - ratio) < 1e-12:
                return row
        return None

    def render_table(self) -> str:
        methods = list(dict.fromkeys(a.method for a in self.aggregates))
        ratios = sorted(dict.fromkeys(a.cs_ratio for a in self.aggregates))
        header = ["Index", "Method"] + [f"{r * 100:g}%" for r in ratios]
        body = []
        for metric, fmt in (("PSNR", "{:.2f}±{:.2f}"), ("SSIM", "{:.4f}±{:.4f}")):
            for method in methods:
                cells = [metric, method]
                for ratio in ratios:
                    agg = self.aggregate(method, ratio)
                    if agg is None:
                        cells.append("-")
                        continue
                    mean, std = (agg.psnr_mean, agg.psnr_std) if metric == "PSNR" else (agg.ssim_mean, agg.ssim_std)
                    cells.append(fmt.format(mean, std))
                body.append(cells)
        widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in [header] + body]
        return "\n".join(lines) + "\n"

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["method", "ratio", "image", "psnr", "ssim"])
            for r in self.rows:
                writer.writerow([r.method, repr(r.cs_ratio), r.image, repr(r.psnr), repr(r.ssim)])
        return path

    def write_aggregate_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["method", "ratio", "psnr_mean", "psnr_std", "ssim_mean", "ssim_std"])
            for a in self.aggregates:
                writer.writerow([a.method, repr(a.cs_ratio), repr(a.psnr_mean), repr(a.psnr_std), repr(a.ssim_mean), repr(a.ssim_std)])
        return path


def build_reconstructor(method: MethodConfig, ratio: float) -> Reconstructor:
    if method.kind == "zero-filling":
        return zero_filling
    if method.kind == "ista":
        cfg = method.ista or IstaConfig()
        return lambda y, op: ista_reconstruct(y, op, cfg).image
    path = method.checkpoint_for(ratio)
    if path is None:
        raise MissingCheckpointError(f"method '{method.name}' has no checkpoint for ratio {ratio}", {"method": method.name, "ratio": ratio})
    model = load_checkpoint(path)
    return lambda y, op: reconstruct(model, y, op)


def evaluate_dataset(
    methods: Sequence[MethodConfig],
    images: Sequence[np.ndarray],
    ratios: Sequence[float],
    image_ids: Optional[Sequence[str]] = None,
    mask_scheme: MaskScheme = MaskScheme.PSEUDO_RADIAL,
    mask_seed: int = 0,
    workers: int = 1,
) -> EvalReport:
    image_ids = list(image_ids) if image_ids is not None else [f"img{i:03d}" for i in range(len(images))]
    height, width = np.asarray(images[0]).shape

    # Resolve every reconstructor first so a missing checkpoint fails before any work.
    plan = [(m, r, build_reconstructor(m, r)) for r in ratios for m in methods]

    rows: List[ImageRow] = []
    for method, ratio, recon in plan:
        mask = generate_mask(height, width, ratio, mask_scheme, mask_seed)
        op = MeasurementOp(mask)

        def _score(item: Tuple[str, np.ndarray]) -> ImageRow:
            image_id, image = item
            xhat = recon(simulate_measurement(image, mask), op)
            return ImageRow(method.name, float(ratio), image_id, psnr(xhat, image), ssim(xhat, image))

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            rows.extend(pool.map(_score, zip(image_ids, images)))
        logger.info("method evaluated", data={"method": method.name, "ratio": ratio, "images": len(images)})

    return EvalReport.from_rows(rows)


def load_test_set(cfg: EvalConfig) -> Tuple[List[str], List[np.ndarray]]:
    if cfg.test_dir is not None:
        return load_image_dir(cfg.test_dir)
    images = generate_phantoms(cfg.synthetic_test, cfg.image_size, seed=cfg.synthetic_seed)
    return [f"phantom{i:03d}" for i in range(len(images))], images


@dataclass(frozen=True)
class CapacityResult:
    p: int
    k: int
    n_stages: int
    test_psnr: float
    # Mean test PSNR after each epoch; shows how fast a variant converges.
    psnr_curve: Tuple[float, ...] = ()


def capacity_study(
    variants: Sequence[Dict[str, int]],
    train_images: Sequence[np.ndarray],
    test_images: Sequence[np.ndarray],
    base_cfg: TrainConfig,
) -> List[CapacityResult]:
    """Train each (p, k, n_stages) variant under one protocol; report test PSNR per epoch."""
    from training.trainer import train

    if not len(test_images):
        raise EmptyDatasetError("capacity study needs test images")
    results = []
    for variant in variants:
        cfg = base_cfg.model_copy(update=variant)
        model = init_model(cfg.p, cfg.k, cfg.n_stages, seed=cfg.seed, distinct_b=cfg.distinct_b)
        _, log = train(model, train_images, cfg, val_set=test_images)
        curve = tuple(summary.val_psnr for summary in log.epochs)
        test_psnr = curve[-1]
        results.append(CapacityResult(cfg.p, cfg.k, cfg.n_stages, test_psnr, curve))
        logger.info("capacity variant trained", data={"p": cfg.p, "k": cfg.k, "n_stages": cfg.n_stages, "test_psnr": test_psnr})
    return results
