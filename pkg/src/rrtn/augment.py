"""SpecAugment-style time and frequency stripe masking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AugmentConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AugmentConfig:
    time_drop_width: int = 64
    time_stripes: int = 2
    freq_drop_width: int = 8
    freq_stripes: int = 2
    mask_value: float = 0.0

    def __post_init__(self):
        for name in ("time_drop_width", "time_stripes", "freq_drop_width", "freq_stripes"):
            if getattr(self, name) < 0:
                raise AugmentConfigError(f"{name} must be >= 0")

    def validate_for(self, n_frames: int, n_bins: int) -> None:
        """Widths must be strictly smaller than the axis they mask."""
        if self.time_stripes and self.time_drop_width >= n_frames:
            raise AugmentConfigError(
                f"time_drop_width {self.time_drop_width} >= {n_frames} frames"
            )
        if self.freq_stripes and self.freq_drop_width >= n_bins:
            raise AugmentConfigError(f"freq_drop_width {self.freq_drop_width} >= {n_bins} bins")


def _mask_axis(out: np.ndarray, axis: int, stripes: int, max_width: int, value: float, rng):
    extent = out.shape[axis]
    for _ in range(stripes):
        w = int(rng.integers(0, max_width + 1))
        start = int(rng.integers(0, extent - w + 1))
        idx = [slice(None)] * out.ndim
        idx[axis] = slice(start, start + w)
        out[tuple(idx)] = value


def spec_augment(x, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Return a masked copy of a [1, T, F] (or [T, F]) feature map.

    Time stripes are drawn first, then frequency stripes. Stripe widths are
    uniform on [0, max width]; stripes may overlap.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (2, 3):
        raise ValueError(f"expected [1, T, F] or [T, F], got shape {x.shape}")
    t_axis, f_axis = x.ndim - 2, x.ndim - 1
    cfg.validate_for(x.shape[t_axis], x.shape[f_axis])
    out = x.copy()
    _mask_axis(out, t_axis, cfg.time_stripes, cfg.time_drop_width, cfg.mask_value, rng)
    _mask_axis(out, f_axis, cfg.freq_stripes, cfg.freq_drop_width, cfg.mask_value, rng)
    return out


def item_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one batch item, keyed by (seed, epoch, index, ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def augment_batch(x: np.ndarray, cfg: AugmentConfig, seed: int, epoch: int, ids=None) -> np.ndarray:
    """Mask every item of a [B, 1, T, F] batch with its own seeded stream.

    Streams are keyed by (seed, epoch, sample id), so a sample gets a fresh
    mask every epoch regardless of where shuffling puts it.
    """
    x = np.asarray(x, dtype=np.float64)
    ids = range(x.shape[0]) if ids is None else ids
    out = np.empty_like(x)
    for i, sid in enumerate(ids):
        out[i] = spec_augment(x[i], cfg, item_rng(seed, epoch, sid))
    return out
