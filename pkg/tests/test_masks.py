import numpy as np
import pytest

from core.errors import ConfigurationError, DataFormatError
from mri.masks import MaskScheme, SamplingMask, generate_mask, read_mask, write_mask


def test_ratio_one_samples_everything():
    mask = generate_mask(8, 6, 1.0)

    assert mask.is_full
    assert mask.count == 48


def test_random_uniform_budget_and_dc():
    mask = generate_mask(64, 64, 0.10, "random-uniform", seed=0)

    assert 408 <= mask.count <= 412
    assert mask.grid[0, 0]


@pytest.mark.parametrize("ratio", [0.05, 0.1, 0.2, 0.3, 0.4, 0.5])
def test_pseudo_radial_hits_budget_exactly(ratio):
    mask = generate_mask(32, 32, ratio, seed=1)

    assert mask.count == round(ratio * 1024)
    assert mask.grid[0, 0]
    assert mask.achieved_ratio == pytest.approx(ratio, abs=1 / 1024)


def test_pseudo_radial_concentrates_samples_near_the_center():
    mask = generate_mask(32, 32, 0.2, seed=2)
    centered = mask.centered()

    inner = centered[12:20, 12:20].mean()
    outer = np.concatenate([centered[:4].ravel(), centered[-4:].ravel()]).mean()
    assert inner > outer


@pytest.mark.parametrize("scheme", list(MaskScheme))
def test_masks_are_deterministic(scheme):
    ratio = 1.0 if scheme is MaskScheme.FULL else 0.25
    a = generate_mask(20, 24, ratio, scheme, seed=7)
    b = generate_mask(20, 24, ratio, scheme, seed=7)

    np.testing.assert_array_equal(a.grid, b.grid)


def test_different_seeds_give_different_random_masks():
    a = generate_mask(16, 16, 0.3, "random-uniform", seed=1)
    b = generate_mask(16, 16, 0.3, "random-uniform", seed=2)

    assert not np.array_equal(a.grid, b.grid)


@pytest.mark.parametrize("ratio", [0.0, -0.1, 1.5])
def test_invalid_ratio_is_rejected(ratio):
    with pytest.raises(ConfigurationError):
        generate_mask(8, 8, ratio)


def test_full_scheme_requires_ratio_one_and_unknown_scheme_fails():
    with pytest.raises(ConfigurationError):
        generate_mask(8, 8, 0.5, "full")
    with pytest.raises(ConfigurationError):
        generate_mask(8, 8, 0.5, "spiral")


def test_mask_grid_is_read_only():
    mask = generate_mask(8, 8, 0.5)

    with pytest.raises(ValueError):
        mask.grid[0, 0] = False


def test_mask_file_round_trip(tmp_path):
    mask = generate_mask(12, 10, 0.3, "random-uniform", seed=3)

    loaded = read_mask(write_mask(mask, tmp_path / "mask.txt"))

    np.testing.assert_array_equal(loaded.grid, mask.grid)
    assert loaded.ratio == mask.ratio
    assert loaded.scheme is MaskScheme.RANDOM_UNIFORM
    assert loaded.seed == 3


def test_malformed_mask_file_is_rejected(tmp_path):
    path = tmp_path / "mask.txt"
    path.write_text("mask 2 2 0.5 pseudo-radial 0\n10\n1\n", encoding="ascii")

    with pytest.raises(DataFormatError):
        read_mask(path)

    path.write_text("grid 2 2\n", encoding="ascii")
    with pytest.raises(DataFormatError):
        read_mask(path)


def test_mask_without_dc_is_rejected():
    grid = np.zeros((4, 4), dtype=bool)
    grid[1:3] = True

    with pytest.raises(ConfigurationError):
        SamplingMask(grid=grid, ratio=0.5, scheme="random-uniform", seed=0)


def test_mask_count_must_match_ratio():
    grid = np.zeros((8, 8), dtype=bool)
    grid[0] = True

    assert SamplingMask(grid=grid, ratio=0.125, scheme="random-uniform", seed=0).count == 8
    with pytest.raises(ConfigurationError):
        SamplingMask(grid=grid, ratio=0.5, scheme="random-uniform", seed=0)


def test_tiny_budget_allows_one_sample_of_slack():
    mask = generate_mask(8, 8, 0.001, "random-uniform", seed=0)

    assert mask.count == 1
    assert mask.grid[0, 0]


def test_hand_edited_mask_file_is_rejected(tmp_path):
    path = tmp_path / "mask.txt"
    path.write_text("mask 4 4 0.1 random-uniform 0\n0000\n1111\n1111\n1111\n", encoding="ascii")

    with pytest.raises(DataFormatError):
        read_mask(path)

    path.write_text("mask 4 4 0.1 random-uniform 0\n1000\n1111\n1111\n1110\n", encoding="ascii")
    with pytest.raises(DataFormatError):
        read_mask(path)
