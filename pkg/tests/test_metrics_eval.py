import csv
import math

import numpy as np
import pytest

from core.errors import MissingCheckpointError, ShapeError
from data.phantoms import generate_phantoms
from evaluation.metrics import psnr, ssim
from evaluation.report import EvalReport, ImageRow, capacity_study, evaluate_dataset, mean_std
from model.checkpoint import save_checkpoint
from model.network import identity_model
from schemas.models import MethodConfig, TrainConfig


@pytest.fixture(scope="module")
def images():
    return generate_phantoms(3, 16, seed=21)


def _gaussian_window(size=11, sigma=1.5):
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    window = np.outer(g, g)
    return window / window.sum()


def _ssim_reference(a, b):
    # Direct per-window evaluation of the single-scale SSIM index.
    w = _gaussian_window()
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    values = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            pa, pb = a[i:i + 11, j:j + 11], b[i:i + 11, j:j + 11]
            mu_a, mu_b = np.sum(w * pa), np.sum(w * pb)
            var_a = np.sum(w * (pa - mu_a) ** 2)
            var_b = np.sum(w * (pb - mu_b) ** 2)
            cov = np.sum(w * (pa - mu_a) * (pb - mu_b))
            values.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return float(np.mean(values))


def test_psnr_identical_images_is_infinite():
    x = np.random.default_rng(0).uniform(size=(8, 8))

    assert psnr(x, x) == math.inf


def test_psnr_uniform_deviation():
    x = np.random.default_rng(1).uniform(0.0, 0.9, size=(16, 16))

    assert psnr(x + 0.1, x) == pytest.approx(20.0, abs=1e-9)


def test_psnr_matches_formula():
    rng = np.random.default_rng(2)
    x, xhat = rng.uniform(size=(12, 12)), rng.uniform(size=(12, 12))

    assert psnr(xhat, x) == pytest.approx(10 * np.log10(1.0 / np.mean((xhat - x) ** 2)), abs=1e-9)


def test_ssim_identity_and_non_identity(images):
    x = images[0]

    assert ssim(x, x) == 1.0
    assert ssim(1.0 - x, x) < 1.0


def test_ssim_matches_windowed_reference(images):
    a, b = images[0], images[1]

    assert ssim(a, b) == pytest.approx(_ssim_reference(a, b), abs=1e-9)
    assert ssim(a, b) == ssim(b, a)


def test_reference_window_is_normalized_and_symmetric():
    w = _gaussian_window()

    assert w.shape == (11, 11)
    assert w.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(w, w.T)


def test_ssim_rejects_small_or_mismatched_images():
    with pytest.raises(ShapeError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))
    with pytest.raises(ShapeError):
        ssim(np.zeros((16, 16)), np.zeros((16, 12)))


def test_mean_std_rules():
    assert mean_std([3.0]) == (3.0, 0.0)
    assert mean_std([math.inf, math.inf]) == (math.inf, 0.0)
    assert mean_std([math.inf, 20.0]) == (math.inf, math.inf)
    mean, std = mean_std([1.0, 2.0, 4.0])
    assert mean == pytest.approx(7 / 3)
    assert std == pytest.approx(np.std([1.0, 2.0, 4.0], ddof=1))


def test_report_aggregates_recompute_from_rows():
    rows = [
        ImageRow("zero-filling", 0.1, "a", 20.0, 0.5),
        ImageRow("zero-filling", 0.1, "b", 22.0, 0.7),
        ImageRow("ista", 0.1, "a", 25.0, 0.8),
    ]
    report = EvalReport.from_rows(rows)

    zf = report.aggregate("zero-filling", 0.1)
    assert zf.psnr_mean == pytest.approx(21.0, abs=1e-9)
    assert zf.psnr_std == pytest.approx(np.sqrt(2.0), abs=1e-9)
    assert zf.ssim_mean == pytest.approx(0.6, abs=1e-9)
    assert report.aggregate("ista", 0.1).psnr_std == 0.0

    table = report.render_table()
    assert "PSNR" in table and "SSIM" in table
    assert "21.00±1.41" in table
    assert "10%" in table


def test_zero_filling_at_full_ratio_gives_infinite_rows(images):
    report = evaluate_dataset([MethodConfig(name="zero-filling", kind="zero-filling")], images, [1.0])

    assert all(row.psnr == math.inf for row in report.rows)
    agg = report.aggregate("zero-filling", 1.0)
    assert agg.psnr_mean == math.inf and agg.psnr_std == 0.0


def test_single_image_has_zero_std(images):
    report = evaluate_dataset([MethodConfig(name="zero-filling", kind="zero-filling")], images[:1], [0.3])

    agg = report.aggregate("zero-filling", 0.3)
    assert agg.psnr_std == 0.0 and agg.ssim_std == 0.0


def test_evaluate_dataset_covers_every_method_and_ratio(tmp_path, images):
    checkpoint = tmp_path / "identity.dgdn"
    save_checkpoint(identity_model(p=2, k=2, n_stages=2), checkpoint)
    methods = [
        MethodConfig(name="zero-filling", kind="zero-filling"),
        MethodConfig(name="ista", kind="ista", ista={"steps": 5}),
        MethodConfig(name="dgdn", kind="dgdn", checkpoints={"0.2": str(checkpoint), "0.4": str(checkpoint)}),
    ]

    report = evaluate_dataset(methods, images, [0.2, 0.4], image_ids=["a", "b", "c"], workers=2)

    assert len(report.rows) == 3 * 2 * 3
    assert len(report.aggregates) == 6
    # eta = 0 with select-m fusion reproduces zero-filling exactly.
    assert report.aggregate("dgdn", 0.2).psnr_mean == pytest.approx(report.aggregate("zero-filling", 0.2).psnr_mean, abs=1e-12)

    per_image = report.write_csv(tmp_path / "per_image.csv")
    aggregate = report.write_aggregate_csv(tmp_path / "aggregate.csv")
    with per_image.open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["method", "ratio", "image", "psnr", "ssim"]
    assert len(rows) == 19
    assert aggregate.read_text().splitlines()[0] == "method,ratio,psnr_mean,psnr_std,ssim_mean,ssim_std"


def test_evaluation_is_reproducible(images):
    methods = [MethodConfig(name="zero-filling", kind="zero-filling")]
    a = evaluate_dataset(methods, images, [0.2], workers=1)
    b = evaluate_dataset(methods, images, [0.2], workers=3)

    assert a.rows == b.rows
    assert a.render_table() == b.render_table()


def test_missing_checkpoint_fails_before_work(images):
    methods = [MethodConfig(name="dgdn", kind="dgdn", checkpoints={"0.1": "unused.dgdn"})]

    with pytest.raises(MissingCheckpointError):
        evaluate_dataset(methods, images, [0.3])


@pytest.mark.slow
def test_capacity_trend():
    train_images = generate_phantoms(6, 16, seed=30)
    test_images = generate_phantoms(3, 16, seed=31)
    cfg = TrainConfig(epochs=8, lr=1e-3, cs_ratio=0.3, p=2, k=2, n_stages=2, synthetic_train=6, image_size=16)

    results = capacity_study(
        [{"n_stages": 2}, {"n_stages": 5}, {"p": 2, "n_stages": 3}, {"p": 8, "n_stages": 3}],
        train_images,
        test_images,
        cfg,
    )

    assert [r.n_stages for r in results] == [2, 5, 3, 3]
    assert results[1].test_psnr >= results[0].test_psnr - 0.1
    assert results[3].test_psnr >= results[2].test_psnr - 0.1


def test_psnr_is_symmetric_and_decreases_with_error():
    rng = np.random.default_rng(16)
    x = rng.uniform(size=(12, 12))
    noise = rng.normal(size=(12, 12))

    values = [psnr(x + scale * noise, x) for scale in (0.01, 0.05, 0.1, 0.5)]

    assert psnr(x, x + 0.05 * noise) == psnr(x + 0.05 * noise, x)
    assert all(a > b for a, b in zip(values, values[1:]))


def test_capacity_study_records_a_psnr_curve_per_variant():
    train_images = generate_phantoms(2, 16, seed=40)
    test_images = generate_phantoms(2, 16, seed=41)
    cfg = TrainConfig(epochs=3, lr=1e-3, cs_ratio=0.3, p=2, k=2, n_stages=1, synthetic_train=2, image_size=16)

    results = capacity_study([{"p": 3}, {"n_stages": 2}], train_images, test_images, cfg)

    assert [(r.p, r.n_stages) for r in results] == [(3, 1), (2, 2)]
    for result in results:
        assert len(result.psnr_curve) == 3
        assert all(np.isfinite(result.psnr_curve))
        assert result.test_psnr == result.psnr_curve[-1]
