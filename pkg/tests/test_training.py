import json

import numpy as np
import pytest

from baselines.classical import zero_filling
from core.errors import ConfigurationError, EmptyDatasetError
from core.tensor import GradTape, Tensor, backward
from data.phantoms import generate_phantoms
from evaluation.metrics import psnr
from model.checkpoint import load_checkpoint
from model.network import ForwardTrace, forward, identity_model, init_model
from mri.fourier import MeasurementOp, simulate_measurement
from mri.masks import generate_mask
from schemas.models import TrainConfig, parse_config
from training.trainer import load_datasets, mid_stage_index, total_loss, train, validate_model


def _config(**overrides) -> TrainConfig:
    base = {"epochs": 2, "lr": 1e-3, "cs_ratio": 0.3, "p": 2, "k": 2, "n_stages": 2, "synthetic_train": 3, "image_size": 16}
    base.update(overrides)
    return TrainConfig(**base)


def _model(cfg: TrainConfig):
    return init_model(cfg.p, cfg.k, cfg.n_stages, seed=cfg.seed)


@pytest.fixture(scope="module")
def images():
    return generate_phantoms(3, 16, seed=0)


def test_mid_stage_index():
    assert mid_stage_index(11) == 6
    assert mid_stage_index(1) == 1
    assert mid_stage_index(2) == 2
    assert mid_stage_index(4) == 3


def test_total_loss_is_zero_for_exact_outputs():
    x = Tensor.constant(np.random.default_rng(0).uniform(size=(1, 4, 4)))
    trace = ForwardTrace(x0=x, outputs=[x, x, x])

    assert total_loss(trace, x).item() == 0.0


def test_total_loss_on_a_two_by_two_example():
    x = np.full((1, 2, 2), 0.5)
    trace = ForwardTrace(
        x0=Tensor.constant(x),
        outputs=[Tensor.constant(x - 0.3), Tensor.constant(x + 0.1), Tensor.constant(x)],
    )

    assert total_loss(trace, Tensor.constant(x)).item() == pytest.approx(0.1, abs=1e-12)


def test_zero_learning_rate_keeps_parameters(images):
    cfg = _config(lr=0.0)
    model = _model(cfg)
    before = [p.numpy() for p in model.parameters()]

    model, log = train(model, images, cfg)

    for a, b in zip(before, model.parameters()):
        np.testing.assert_array_equal(a, b.data)
    assert len(log.iterations) == cfg.epochs * len(images)


def test_training_is_deterministic(tmp_path, images):
    cfg = _config()
    _, log_a = train(_model(cfg), images, cfg, out_dir=tmp_path / "a")
    _, log_b = train(_model(cfg), images, cfg, out_dir=tmp_path / "b")

    assert log_a.iterations == log_b.iterations
    assert (tmp_path / "a" / "final.dgdn").read_bytes() == (tmp_path / "b" / "final.dgdn").read_bytes()
    assert (tmp_path / "a" / "train_log.csv").read_text() == (tmp_path / "b" / "train_log.csv").read_text()


def test_training_writes_artifacts(tmp_path, images):
    cfg = _config(checkpoint_every=1)
    model, log = train(_model(cfg), images, cfg, val_set=images[:1], out_dir=tmp_path)

    lines = (tmp_path / "train_log.csv").read_text().splitlines()
    assert lines[0] == "epoch,iter,loss"
    assert len(lines) == 1 + 2 * 3

    summaries = [json.loads(line) for line in (tmp_path / "epochs.jsonl").read_text().splitlines()]
    assert [s["epoch"] for s in summaries] == [1, 2]
    assert all(s["eta_positive"] for s in summaries)
    assert all(len(s["step_lengths"]) == 2 for s in summaries)
    assert summaries[0]["val_psnr"] is not None

    assert (tmp_path / "checkpoints" / "epoch_001.dgdn").exists()
    assert (tmp_path / "checkpoints" / "epoch_002.dgdn").exists()
    final = load_checkpoint(tmp_path / "final.dgdn")
    for a, b in zip(model.parameters(), final.parameters()):
        np.testing.assert_array_equal(a.data, b.data)
    assert log.epochs[-1].mean_loss == pytest.approx(np.mean(log.epoch_losses(2)))


def test_training_updates_step_lengths(images):
    cfg = _config(epochs=1)
    model = _model(cfg)
    before = model.step_lengths()

    model, _ = train(model, images, cfg)

    assert model.step_lengths() != before
    assert all(eta > 0 for eta in model.step_lengths())


def test_per_image_masks_still_train(images):
    cfg = _config(epochs=1, per_image_masks=True)

    _, log = train(_model(cfg), images, cfg)

    assert all(np.isfinite(r.loss) for r in log.iterations)


def test_empty_dataset_is_rejected():
    cfg = _config()
    with pytest.raises(EmptyDatasetError):
        train(_model(cfg), [], cfg)


def test_config_validation_is_structured():
    with pytest.raises(ConfigurationError):
        parse_config(TrainConfig, {"epochs": 0, "synthetic_train": 1})
    with pytest.raises(ConfigurationError):
        parse_config(TrainConfig, {"epochs": 1})
    with pytest.raises(ConfigurationError):
        parse_config(TrainConfig, {"synthetic_train": 1, "learning_rate": 0.1})


def test_load_datasets_uses_seeded_phantoms():
    cfg = _config(synthetic_val=2)

    train_images, val_images = load_datasets(cfg)

    assert len(train_images) == 3 and len(val_images) == 2
    assert train_images[0].shape == (16, 16)
    np.testing.assert_array_equal(load_datasets(cfg)[0][0], train_images[0])


def test_validate_model_reports_mean_metrics(images):
    model = init_model(p=2, k=2, n_stages=1, seed=0)
    mask = generate_mask(16, 16, 0.3, seed=0)

    mean_psnr, mean_ssim = validate_model(model, images, mask)

    assert np.isfinite(mean_psnr)
    assert -1.0 <= mean_ssim <= 1.0


@pytest.mark.slow
def test_toy_training_reduces_loss():
    images = generate_phantoms(8, 16, seed=3)
    cfg = _config(epochs=10, lr=1e-3, p=4, k=2, n_stages=3, synthetic_train=8)

    _, log = train(_model(cfg), images, cfg)

    assert log.epochs[-1].mean_loss < log.epochs[0].mean_loss


@pytest.mark.slow
def test_toy_acceptance_run():
    train_images = generate_phantoms(20, 32, seed=100)
    test_images = generate_phantoms(5, 32, seed=200)
    cfg = _config(epochs=50, lr=1e-3, cs_ratio=0.2, p=8, k=3, n_stages=5, synthetic_train=20, image_size=32)
    mask = generate_mask(32, 32, cfg.cs_ratio, cfg.mask_scheme, cfg.mask_seed)

    model, log = train(_model(cfg), train_images, cfg)

    op = MeasurementOp(mask)
    zf_psnr = np.mean([psnr(zero_filling(simulate_measurement(x, mask), op), x) for x in test_images])
    model_psnr, _ = validate_model(model, test_images, mask)
    assert log.epochs[-1].mean_loss < 0.5 * log.epochs[0].mean_loss
    assert model_psnr >= zf_psnr + 2.0
    assert all(summary.eta_positive for summary in log.epochs)


def _strict_loads(line):
    def reject(token):
        raise ValueError(f"non-standard JSON constant {token}")

    return json.loads(line, parse_constant=reject)


def test_small_images_skip_ssim_and_keep_summaries_valid_json(tmp_path):
    rng = np.random.default_rng(5)
    small = [rng.uniform(size=(8, 8)) for _ in range(2)]
    cfg = _config(epochs=1, image_size=11)

    _, mean_ssim = validate_model(_model(cfg), small, generate_mask(8, 8, 0.3, seed=0))
    _, log = train(_model(cfg), small, cfg, val_set=small, out_dir=tmp_path)

    assert mean_ssim is None
    assert log.epochs[0].val_ssim is None
    summary = _strict_loads((tmp_path / "epochs.jsonl").read_text().splitlines()[0])
    assert summary["val_ssim"] is None
    assert summary["val_psnr"] is not None


def test_infinite_validation_psnr_is_written_as_null(tmp_path, images):
    cfg = _config(epochs=1, lr=0.0, cs_ratio=1.0)
    model = identity_model(p=2, k=2, n_stages=2, eta=0.5)

    _, log = train(model, images, cfg, val_set=images[:1], out_dir=tmp_path)

    assert log.epochs[0].val_psnr == float("inf")
    summary = _strict_loads((tmp_path / "epochs.jsonl").read_text().splitlines()[0])
    assert summary["val_psnr"] is None


def test_every_parameter_receives_a_gradient(images):
    model = init_model(p=3, k=2, n_stages=3, seed=1)
    mask = generate_mask(16, 16, 0.3, "random-uniform", seed=2)

    with GradTape() as tape:
        trace = forward(model, simulate_measurement(images[0], mask), MeasurementOp(mask))
        loss = total_loss(trace, images[0])
    backward(loss, tape)

    for index, param in enumerate(model.parameters()):
        assert param.grad is not None, index
        assert np.any(param.grad != 0), index
    for stage in model.stages:
        assert abs(float(stage.raw_eta.grad)) > 0
