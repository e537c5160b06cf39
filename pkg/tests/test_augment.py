from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrtn.augment import AugmentConfig, AugmentConfigError, augment_batch, spec_augment

GOLDEN = Path(__file__).parent / "data" / "augment_golden_seed42.npy"


def rng(seed=0):
    return np.random.default_rng(seed)


def test_reference_scale_defaults():
    cfg = AugmentConfig()
    assert (cfg.time_drop_width, cfg.time_stripes, cfg.freq_drop_width, cfg.freq_stripes) == (64, 2, 8, 2)
    cfg.validate_for(250, 64)


def test_no_stripes_is_identity():
    x = rng().standard_normal((1, 20, 8))
    out = spec_augment(x, AugmentConfig(4, 0, 2, 0), rng(1))
    assert np.array_equal(out, x)
    assert out is not x


def test_golden_seed42():
    x = (np.arange(160, dtype=np.float64) + 1.0).reshape(1, 20, 8)
    cfg = AugmentConfig(time_drop_width=4, time_stripes=1, freq_drop_width=2, freq_stripes=1)
    out = spec_augment(x, cfg, np.random.default_rng(42))
    assert np.array_equal(out, np.load(GOLDEN))


def test_input_not_modified():
    x = np.ones((1, 10, 6))
    spec_augment(x, AugmentConfig(3, 2, 2, 2), rng(3))
    assert np.all(x == 1)


def test_width_must_be_below_extent():
    with pytest.raises(AugmentConfigError):
        spec_augment(np.ones((1, 8, 8)), AugmentConfig(8, 1, 2, 1), rng())
    with pytest.raises(AugmentConfigError):
        AugmentConfig(time_drop_width=-1)


@settings(max_examples=150, deadline=None)
@given(T=st.integers(5, 30), F=st.integers(4, 16), tw=st.integers(0, 4), ts=st.integers(0, 3),
       fw=st.integers(0, 3), fs=st.integers(0, 3), seed=st.integers(0, 2**20))
def test_mask_bounds_and_unmasked_cells(T, F, tw, ts, fw, fs, seed):
    x = np.random.default_rng(seed).uniform(1.0, 2.0, size=(1, T, F))  # never zero
    cfg = AugmentConfig(tw, ts, fw, fs)
    out = spec_augment(x, cfg, np.random.default_rng(seed + 1))
    masked = out == 0.0
    assert np.array_equal(out[~masked], x[~masked])
    rows = np.all(masked[0], axis=1)
    cols = np.all(masked[0], axis=0)
    full_frames, full_bins = rows.sum(), cols.sum()
    # a cell is masked only if its whole frame or whole bin is
    assert np.array_equal(masked[0], rows[:, None] | cols[None, :])
    assert full_frames <= ts * tw or full_bins == F
    assert full_bins <= fs * fw or full_frames == T


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**20))
def test_deterministic_and_right_identity(seed):
    x = np.random.default_rng(seed).standard_normal((1, 16, 8))
    cfg = AugmentConfig(4, 2, 2, 2)
    a = spec_augment(x, cfg, np.random.default_rng(seed))
    b = spec_augment(x, cfg, np.random.default_rng(seed))
    assert a.tobytes() == b.tobytes()
    again = spec_augment(a, AugmentConfig(4, 0, 2, 0), np.random.default_rng(seed + 5))
    assert np.array_equal(again, a)


def test_augment_batch_keys():
    x = np.random.default_rng(0).uniform(1, 2, size=(4, 1, 16, 8))
    cfg = AugmentConfig(6, 2, 3, 2)
    a = augment_batch(x, cfg, seed=1, epoch=1, ids=[10, 11, 12, 13])
    b = augment_batch(x[::-1], cfg, seed=1, epoch=1, ids=[13, 12, 11, 10])
    assert np.array_equal(a, b[::-1])  # keyed by sample id, not position
    c = augment_batch(x, cfg, seed=1, epoch=2, ids=[10, 11, 12, 13])
    assert not np.array_equal(a, c)
