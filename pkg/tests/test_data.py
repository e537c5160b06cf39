import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrtn.data import (Dataset, FeatureFormatError, SynthConfig, band_matrix, crop_pad, gen_synth,
                       load_features, save_features, split_mask)
from rrtn.losses import mean_ccc_metric


def band_energies(ds: Dataset) -> np.ndarray:
    K = ds.targets.shape[1]
    F = ds.features.shape[-1]
    bands = band_matrix(K, F)
    per_bin = ds.features[:, 0].mean(axis=1)  # [N, F]
    return per_bin @ bands.T / bands.sum(axis=1)


def test_targets_in_unit_interval_and_finite():
    ds = gen_synth(SynthConfig(n_samples=64, seed=3))
    assert ds.features.shape == (64, 1, 32, 16)
    assert np.all((ds.targets >= 0) & (ds.targets <= 1))
    assert np.all(np.isfinite(ds.features))


def test_noise_free_band_energy_monotone():
    ds = gen_synth(SynthConfig(n_samples=40, noise_sigma=0.0, seed=1))
    e = band_energies(ds)
    for k in range(ds.targets.shape[1]):
        order = np.argsort(ds.targets[:, k])
        assert np.all(np.diff(e[order, k]) > 0)


def test_same_seed_bitwise():
    a, b = gen_synth(SynthConfig(seed=9)), gen_synth(SynthConfig(seed=9))
    assert a.features.tobytes() == b.features.tobytes()
    assert a.targets.tobytes() == b.targets.tobytes()
    assert not np.array_equal(a.targets, gen_synth(SynthConfig(seed=10)).targets)


def test_least_squares_oracle_dev_ccc():
    ds = gen_synth(SynthConfig(n_samples=512, noise_sigma=0.05, seed=0))
    tr, dev = ds.split("train"), ds.split("dev")

    def design(d):
        e = band_energies(d)
        return np.hstack([e, np.ones((d.n, 1))])

    coef, *_ = np.linalg.lstsq(design(tr), tr.targets, rcond=None)
    assert mean_ccc_metric(design(dev) @ coef, dev.targets) > 0.9


def test_split_depends_only_on_n():
    m = split_mask(10)
    assert m.sum() == 8 and m[:8].all()
    a = gen_synth(SynthConfig(n_samples=20, seed=1)).is_train
    b = gen_synth(SynthConfig(n_samples=20, seed=2)).is_train
    assert np.array_equal(a, b)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(K=20, F=16)
    with pytest.raises(ValueError):
        SynthConfig(T=0)


def test_dataset_is_immutable():
    ds = gen_synth(SynthConfig(n_samples=8))
    with pytest.raises(ValueError):
        ds.features[0, 0, 0, 0] = 1.0


# crop / pad -----------------------------------------------------------------------

def test_crop_keeps_leading_frames():
    x = np.arange(2 * 1 * 10 * 3, dtype=float).reshape(2, 1, 10, 3)
    assert np.array_equal(crop_pad(x, 4), x[:, :, :4])


def test_pad_appends_zeros():
    x = np.arange(1 * 1 * 3 * 2, dtype=float).reshape(1, 1, 3, 2) + 1
    y = crop_pad(x, 5)
    assert np.array_equal(y[:, :, :3], x) and np.all(y[:, :, 3:] == 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12))
def test_crop_pad_idempotent(t_in, t_out):
    x = np.random.default_rng(t_in).standard_normal((2, 1, t_in, 3))
    once = crop_pad(x, t_out)
    assert np.array_equal(crop_pad(once, t_out), once)


# RRTN-FEAT ------------------------------------------------------------------------------

def _f32_dataset(n=10, T=6, F=4, K=3, seed=0):
    ds = gen_synth(SynthConfig(n_samples=n, T=T, F=F, K=K, seed=seed))
    return Dataset(ds.features.astype(np.float32).astype(np.float64),
                   ds.targets.astype(np.float32).astype(np.float64), ds.is_train.copy())


def test_feat_round_trip_bitwise(tmp_path):
    ds = _f32_dataset()
    p = tmp_path / "a.feat"
    save_features(ds, p)
    back = load_features(p)
    assert back.features.tobytes() == ds.features.tobytes()
    assert back.targets.tobytes() == ds.targets.tobytes()
    save_features(back, tmp_path / "b.feat")
    assert p.read_bytes() == (tmp_path / "b.feat").read_bytes()


def test_feat_header(tmp_path):
    p = tmp_path / "a.feat"
    save_features(_f32_dataset(n=5, T=6, F=4, K=3), p)
    assert p.read_bytes().split(b"\n", 1)[0] == b"RRTN-FEAT v1 5 6 4 3"
    assert len(p.read_bytes()) == len(b"RRTN-FEAT v1 5 6 4 3\n") + 5 * (6 * 4 + 3) * 4


def test_feat_crop_and_pad_on_load(tmp_path):
    ds = _f32_dataset(T=6)
    p = tmp_path / "a.feat"
    save_features(ds, p)
    short = load_features(p, T=4)
    assert np.array_equal(short.features, ds.features[:, :, :4])
    long = load_features(p, T=9)
    assert np.array_equal(long.features[:, :, :6], ds.features)
    assert np.all(long.features[:, :, 6:] == 0)


@pytest.mark.parametrize("blob, offset", [
    (b"NOPE v1 1 1 1 1\n", 0),
    (b"RRTN-FEAT v2 1 1 1 1\n", 10),
    (b"RRTN-FEAT v1 1 x 1 1\n", 13),
    (b"RRTN-FEAT v1 1 1 1 1\n\x00\x00", 23),  # data runs out here
])
def test_feat_format_errors(tmp_path, blob, offset):
    p = tmp_path / "bad.feat"
    p.write_bytes(blob)
    with pytest.raises(FeatureFormatError) as exc:
        load_features(p)
    assert exc.value.offset == offset
    assert "byte offset" in str(exc.value)
