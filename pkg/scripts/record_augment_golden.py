"""Re-record the seeded SpecAugment golden output used by the tests.

Only rerun when the RNG stream format changes on purpose.
"""
from pathlib import Path

import numpy as np

from rrtn.augment import AugmentConfig, spec_augment

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "augment_golden_seed42.npy"


def golden_input() -> np.ndarray:
    return (np.arange(20 * 8, dtype=np.float64) + 1.0).reshape(1, 20, 8)


if __name__ == "__main__":
    cfg = AugmentConfig(time_drop_width=4, time_stripes=1, freq_drop_width=2, freq_stripes=1)
    out = spec_augment(golden_input(), cfg, np.random.default_rng(42))
    np.save(OUT, out)
    print(f"wrote {OUT} ({int((out == 0).sum())} masked cells)")
