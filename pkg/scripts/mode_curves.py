"""Train all three modes on one config and print dev CCC per epoch side by side.

Extra arguments are passed through as "section.key=value" overrides, e.g.

    python3 scripts/mode_curves.py train.epochs=40 data.noise_sigma=0.3
"""
import sys
from dataclasses import replace

from rrtn.config import MODES, load_config
from rrtn.data import gen_synth
from rrtn.train import train


def main(overrides: list[str]) -> int:
    cfg = load_config(overrides=overrides)
    ds = gen_synth(cfg.synth_config())
    curves, reports = {}, {}
    for mode in MODES:
        rep = train(replace(cfg, train=replace(cfg.train, mode=mode)), ds)
        curves[mode] = [r["dev_ccc"] for r in rep.records if "dev_ccc" in r]
        reports[mode] = rep
    print(f"{'epoch':>5}  " + "  ".join(f"{m:>10}" for m in MODES))
    print(f"{0:>5}  " + "  ".join(f"{reports[m].initial_dev_ccc:>10.4f}" for m in MODES))
    for e in range(max(len(c) for c in curves.values())):
        cells = [f"{curves[m][e]:>10.4f}" if e < len(curves[m]) else f"{'-':>10}" for m in MODES]
        print(f"{e + 1:>5}  " + "  ".join(cells))
    last = reports["rrtn_ruwl"].ruwl_c
    if last is not None:
        print("final RUWL c: " + " ".join(f"{v:.4f}" for v in last))
    return 1 if any(r.halted for r in reports.values()) else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
