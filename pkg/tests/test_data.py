import numpy as np
import pytest

from core.errors import DataFormatError, EmptyDatasetError, ShapeError
from data.images import load_image_dir, quantize, read_pgm, write_pgm
from data.phantoms import generate_phantoms


def test_sixteen_bit_round_trip_is_lossless_for_quantized_images(tmp_path):
    image = quantize(np.random.default_rng(0).uniform(size=(9, 7)), 16) / 65535

    loaded = read_pgm(write_pgm(image, tmp_path / "img.pgm"))

    np.testing.assert_array_equal(loaded, image)


def test_eight_bit_round_trip_within_quantization(tmp_path):
    image = np.random.default_rng(1).uniform(size=(6, 6))

    loaded = read_pgm(write_pgm(image, tmp_path / "img.pgm", bit_depth=8))

    assert loaded.shape == (6, 6)
    assert np.max(np.abs(loaded - image)) <= 0.5 / 255 + 1e-12


def test_written_file_is_binary_pgm(tmp_path):
    path = write_pgm(np.zeros((2, 3)), tmp_path / "img.pgm", bit_depth=8)

    assert path.read_bytes().startswith(b"P5")


def test_values_outside_unit_range_are_clipped(tmp_path):
    loaded = read_pgm(write_pgm(np.array([[-0.5, 1.5]]), tmp_path / "img.pgm"))

    np.testing.assert_array_equal(loaded, [[0.0, 1.0]])


def test_non_image_file_is_rejected(tmp_path):
    path = tmp_path / "junk.pgm"
    path.write_bytes(b"not an image")

    with pytest.raises(DataFormatError):
        read_pgm(path)


def test_write_rejects_bad_shapes_and_depths(tmp_path):
    with pytest.raises(ShapeError):
        write_pgm(np.zeros((2, 2, 2)), tmp_path / "img.pgm")
    with pytest.raises(DataFormatError):
        write_pgm(np.zeros((2, 2)), tmp_path / "img.pgm", bit_depth=12)


def test_load_image_dir_sorted_ids(tmp_path):
    for name in ("b", "a", "c"):
        write_pgm(np.full((4, 4), 0.5), tmp_path / f"{name}.pgm")

    ids, images = load_image_dir(tmp_path)

    assert ids == ["a", "b", "c"]
    assert all(img.shape == (4, 4) for img in images)


def test_load_image_dir_errors(tmp_path):
    with pytest.raises(EmptyDatasetError):
        load_image_dir(tmp_path)

    write_pgm(np.zeros((4, 4)), tmp_path / "a.pgm")
    write_pgm(np.zeros((4, 5)), tmp_path / "b.pgm")
    with pytest.raises(ShapeError):
        load_image_dir(tmp_path)


def test_phantoms_are_seeded_and_in_range():
    a = generate_phantoms(2, 24, seed=5)
    b = generate_phantoms(2, 24, seed=5)

    np.testing.assert_array_equal(a[0], b[0])
    assert not np.array_equal(a[0], a[1])
    assert all(img.min() >= 0.0 and img.max() <= 1.0 for img in a)
    assert all(img.std() > 0.05 for img in a)
