"""
Training

Per-sample loss (||x_mid - x||_1 + ||x_f - x||_1) / N with the mid stage
ceil((N_l + 1) / 2); averaging over the epoch supplies the 1/N_s factor.
Batch size 1, Adam, seeded shuffling, one fixed mask per run by default.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core import ops
from core.errors import DGDNError, EmptyDatasetError, ShapeError
from core.optim import AdamState, adam_step
from core.tensor import GradTape, Tensor, backward
from data.images import load_image_dir
from data.phantoms import generate_phantoms
from evaluation.metrics import SSIM_WINDOW, psnr, ssim
from model.checkpoint import save_checkpoint
from model.network import DgdnModel, ForwardTrace, forward, reconstruct
from mri.fourier import MeasurementOp, simulate_measurement
from mri.masks import SamplingMask, generate_mask
from schemas.models import TrainConfig
from utils.logging_config import get_logger

logger = get_logger("training")


@dataclass(frozen=True)
class IterationRecord:
    epoch: int
    iteration: int
    loss: float


@dataclass
class EpochSummary:
    epoch: int
    mean_loss: float
    val_psnr: Optional[float]
    val_ssim: Optional[float]
    step_lengths: List[float]
    eta_positive: bool


@dataclass
class TrainLog:
    iterations: List[IterationRecord] = field(default_factory=list)
    epochs: List[EpochSummary] = field(default_factory=list)

    def epoch_losses(self, epoch: int) -> List[float]:
        return [r.loss for r in self.iterations if r.epoch == epoch]

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["epoch", "iter", "loss"])
            for r in self.iterations:
                writer.writerow([r.epoch, r.iteration, repr(r.loss)])
        return path

    def write_summaries(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps(_strict_json(asdict(summary)), sort_keys=True, allow_nan=False) for summary in self.epochs]
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path


def _strict_json(value):
    """Non-finite floats become null; JSON has no NaN or Infinity."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _strict_json(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_strict_json(item) for item in value]
    return value


def mid_stage_index(n_stages: int) -> int:
    """1-based index of the stage supervised mid-way; (N+1)/2 for odd N."""
    return math.ceil((n_stages + 1) / 2)


def total_loss(trace: ForwardTrace, x_true: Union[Tensor, np.ndarray], n_pixels: Optional[int] = None) -> Tensor:
    target = x_true if isinstance(x_true, Tensor) else Tensor.constant(np.asarray(x_true).reshape(trace.final.shape))
    if target.shape != trace.final.shape:
        raise ShapeError("ground truth does not match the network output", {"target": list(target.shape), "output": list(trace.final.shape)})
    n_pixels = n_pixels or target.size
    mid = trace.stage_output(mid_stage_index(len(trace)))
    summed = ops.add(ops.l1_loss(mid, target), ops.l1_loss(trace.final, target))
    return ops.mul(summed, Tensor.constant(1.0 / n_pixels))


def _per_image_seed(mask_seed: int, epoch: int, index: int) -> int:
    return int(np.random.SeedSequence([mask_seed, epoch, index]).generate_state(1)[0])


def validate_model(model: DgdnModel, images: Sequence[np.ndarray], mask: SamplingMask) -> Tuple[float, Optional[float]]:
    """Mean PSNR and SSIM of the model on ``images`` under ``mask``; SSIM is None below the window size."""
    op = MeasurementOp(mask)
    psnrs, ssims = [], []
    for image in images:
        recon = reconstruct(model, simulate_measurement(image, mask), op)
        psnrs.append(psnr(recon, image))
        if min(image.shape) >= SSIM_WINDOW:
            ssims.append(ssim(recon, image))
    return float(np.mean(psnrs)), (float(np.mean(ssims)) if ssims else None)


def load_datasets(cfg: TrainConfig) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    if cfg.train_dir is not None:
        _, train_images = load_image_dir(cfg.train_dir)
    else:
        train_images = generate_phantoms(cfg.synthetic_train, cfg.image_size, seed=cfg.seed)

    if cfg.val_dir is not None:
        _, val_images = load_image_dir(cfg.val_dir)
    elif cfg.synthetic_val:
        val_images = generate_phantoms(cfg.synthetic_val, train_images[0].shape[0], seed=cfg.seed + 1)
    else:
        val_images = []
    return train_images, val_images


def train(
    model: DgdnModel,
    dataset: Sequence[np.ndarray],
    cfg: TrainConfig,
    val_set: Sequence[np.ndarray] = (),
    out_dir: Union[str, Path, None] = None,
) -> Tuple[DgdnModel, TrainLog]:
    if len(dataset) == 0:
        raise EmptyDatasetError("training needs at least one image")
    shape = np.asarray(dataset[0]).shape
    for index, image in enumerate(list(dataset) + list(val_set)):
        if np.asarray(image).shape != shape:
            raise ShapeError("all images must share extents", {"index": index, "expected": list(shape), "got": list(np.asarray(image).shape)})
    height, width = shape

    mask = generate_mask(height, width, cfg.cs_ratio, cfg.mask_scheme, cfg.mask_seed)
    fixed_op = MeasurementOp(mask)
    fixed_measurements = [simulate_measurement(img, mask) for img in dataset]
    targets = [Tensor.constant(np.asarray(img)[None]) for img in dataset]

    out_path = Path(out_dir) if out_dir is not None else None
    params = model.parameters()
    state = AdamState(lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    log = TrainLog()

    logger.info(
        "training started",
        data={"images": len(dataset), "epochs": cfg.epochs, "lr": cfg.lr, "cs_ratio": cfg.cs_ratio,
              "p": model.p, "k": model.k, "n_stages": model.n_stages, "mask_count": mask.count},
    )

    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for iteration, index in enumerate(rng.permutation(len(dataset)), start=1):
            if cfg.per_image_masks:
                image_mask = generate_mask(height, width, cfg.cs_ratio, cfg.mask_scheme, _per_image_seed(cfg.mask_seed, epoch, int(index)))
                op, y = MeasurementOp(image_mask), simulate_measurement(dataset[index], image_mask)
            else:
                op, y = fixed_op, fixed_measurements[index]

            with GradTape() as tape:
                trace = forward(model, y, op)
                loss = total_loss(trace, targets[index])
            backward(loss, tape)
            adam_step(params, None, state)

            losses.append(loss.item())
            log.iterations.append(IterationRecord(epoch, iteration, loss.item()))

        etas = model.step_lengths()
        val_psnr = val_ssim = None
        if len(val_set):
            val_psnr, val_ssim = validate_model(model, val_set, mask)
        summary = EpochSummary(
            epoch=epoch,
            mean_loss=float(np.mean(losses)),
            val_psnr=val_psnr,
            val_ssim=val_ssim,
            step_lengths=etas,
            eta_positive=all(eta > 0 for eta in etas),
        )
        log.epochs.append(summary)
        logger.info("epoch finished", data={"epoch": epoch, "mean_loss": summary.mean_loss, "val_psnr": val_psnr,
                                            "val_ssim": val_ssim, "eta_min": min(etas), "eta_max": max(etas)})
        if not summary.eta_positive:
            raise DGDNError("step length left the positive range", {"epoch": epoch, "step_lengths": etas})

        if out_path is not None and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_checkpoint(model, out_path / "checkpoints" / f"epoch_{epoch:03d}.dgdn")

    if out_path is not None:
        log.write_csv(out_path / "train_log.csv")
        log.write_summaries(out_path / "epochs.jsonl")
        save_checkpoint(model, out_path / "final.dgdn")

    return model, log
