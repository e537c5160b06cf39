"""Synthetic spectrogram-like regression data and the RRTN-FEAT file format."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

FEAT_MAGIC = "RRTN-FEAT"
FEAT_VERSION = "v1"
TRAIN_FRACTION = 0.8


class FeatureFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 512
    T: int = 32
    F: int = 16
    K: int = 10
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if min(self.n_samples, self.T, self.F, self.K) <= 0:
            raise ValueError("all extents must be positive")
        if self.K > self.F:
            raise ValueError(f"K={self.K} targets need at least as many frequency bins, got F={self.F}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # [N, 1, T, F]
    targets: np.ndarray  # [N, K]
    is_train: np.ndarray  # [N] bool

    def __post_init__(self):
        if self.features.ndim != 4 or self.features.shape[1] != 1:
            raise ValueError(f"features must be [N, 1, T, F], got {self.features.shape}")
        if self.targets.ndim != 2 or self.targets.shape[0] != self.features.shape[0]:
            raise ValueError("targets must be [N, K] with N matching features")
        for arr in (self.features, self.targets, self.is_train):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        _, _, t, f = self.features.shape
        return t, f, self.targets.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.features[idx].copy(), self.targets[idx].copy(), self.is_train[idx].copy()
        )

    def split(self, name: str) -> "Dataset":
        if name == "train":
            return self.subset(np.flatnonzero(self.is_train))
        if name == "dev":
            return self.subset(np.flatnonzero(~self.is_train))
        if name == "all":
            return self
        raise ValueError(f"unknown split {name!r}")


def split_mask(n: int) -> np.ndarray:
    """Leading 80% of indices train, the rest dev."""
    mask = np.zeros(n, dtype=bool)
    mask[: int(np.floor(TRAIN_FRACTION * n))] = True
    return mask


def band_matrix(K: int, F: int) -> np.ndarray:
    """K x F indicator of K contiguous, non-empty frequency bands."""
    edges = (np.arange(K + 1) * F) // K
    bands = np.zeros((K, F))
    for k in range(K):
        bands[k, edges[k] : edges[k + 1]] = 1.0
    return bands


def envelope(T: int) -> np.ndarray:
    """Smooth positive time envelope, 0.5 at the edges and 1 mid-way."""
    t = (np.arange(T) + 0.5) / T
    return 0.5 + 0.5 * np.sin(np.pi * t)


def gen_synth(cfg: SynthConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    u = rng.uniform(0.0, 1.0, size=(cfg.n_samples, cfg.K))
    spectrum = u @ band_matrix(cfg.K, cfg.F)  # [N, F]
    x = envelope(cfg.T)[None, :, None] * spectrum[:, None, :]
    x = x + cfg.noise_sigma * rng.standard_normal(x.shape)
    return Dataset(x[:, None, :, :], u, split_mask(cfg.n_samples))


def crop_pad(features: np.ndarray, T: int) -> np.ndarray:
    """Tail-crop or tail-zero-pad the time axis (second to last) to ``T`` frames."""
    features = np.asarray(features)
    cur = features.shape[-2]
    if cur >= T:
        return features[..., :T, :].copy()
    pad = [(0, 0)] * features.ndim
    pad[-2] = (0, T - cur)
    return np.pad(features, pad)


def save_features(ds: Dataset, path) -> None:
    """Write ``ds`` as RRTN-FEAT v1 (values stored as little-endian float32)."""
    N, _, T, F = ds.features.shape
    K = ds.targets.shape[1]
    feats = ds.features.reshape(N, T * F).astype("<f4")
    targs = ds.targets.astype("<f4")
    records = np.concatenate([feats, targs], axis=1)
    with open(path, "wb") as fh:
        fh.write(f"{FEAT_MAGIC} {FEAT_VERSION} {N} {T} {F} {K}\n".encode("ascii"))
        fh.write(records.tobytes())


def load_features(path, T: int | None = None) -> Dataset:
    """Read an RRTN-FEAT file; optionally crop/pad every sample to ``T`` frames."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FeatureFormatError("missing header line", 0)
    fields = raw[:nl].split(b" ")
    if not fields or fields[0] != FEAT_MAGIC.encode():
        raise FeatureFormatError("bad magic", 0)
    if len(fields) < 2 or fields[1] != FEAT_VERSION.encode():
        raise FeatureFormatError("unsupported version", len(FEAT_MAGIC) + 1)
    try:
        N, t_file, F, K = (int(v) for v in fields[2:6])
        if len(fields) != 6:
            raise ValueError
    except ValueError:
        raise FeatureFormatError("header needs N T F K", len(FEAT_MAGIC) + len(FEAT_VERSION) + 2) from None
    if min(N, t_file, F, K) <= 0:
        raise FeatureFormatError("non-positive extent in header", 0)
    body = raw[nl + 1 :]
    rec = t_file * F + K
    expected = N * rec * 4
    if len(body) != expected:
        off = nl + 1 + min(len(body), expected)
        raise FeatureFormatError(f"body has {len(body)} bytes, expected {expected}", off)
    records = np.frombuffer(body, dtype="<f4").reshape(N, rec).astype(np.float64)
    feats = records[:, : t_file * F].reshape(N, 1, t_file, F)
    targs = records[:, t_file * F :].copy()
    if T is not None:
        feats = crop_pad(feats, T)
    if not (np.all(np.isfinite(feats)) and np.all(np.isfinite(targs))):
        raise FeatureFormatError("non-finite values in records", nl + 1)
    return Dataset(np.ascontiguousarray(feats), targs, split_mask(N))
