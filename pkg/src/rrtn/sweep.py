"""Seed x mode ablation sweep with relative local gain over the baseline."""
from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import MODES, RunConfig
from .data import Dataset
from .train import train


def relative_gain(score: float, baseline: float) -> float:
    """(score - baseline) / baseline."""
    return (score - baseline) / baseline


def summarize(rows: list[dict]) -> list[dict]:
    by_mode = {m: [r["best_dev_ccc"] for r in rows if r["mode"] == m] for m in MODES}
    base_mean = float(np.mean(by_mode["baseline"])) if by_mode["baseline"] else float("nan")
    agg = []
    for mode in MODES:
        vals = np.asarray(by_mode[mode], dtype=np.float64)
        if vals.size == 0:
            continue
        mean = float(vals.mean())
        agg.append({
            "mode": mode,
            "n": int(vals.size),
            "mean": mean,
            "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
            "relative_local_gain": None if mode == "baseline" else relative_gain(mean, base_mean),
        })
    return agg


def format_table(rows: list[dict], agg: list[dict]) -> str:
    lines = [f"{'seed':>6}  {'mode':<11}  {'best dev CCC':>12}  {'final dev CCC':>13}"]
    for r in rows:
        lines.append(f"{r['seed']:>6}  {r['mode']:<11}  {r['best_dev_ccc']:>12.4f}  {r['final_dev_ccc']:>13.4f}")
    lines.append("")
    lines.append(f"{'mode':<11}  {'n':>3}  {'mean':>8}  {'sd':>8}  {'rel. local gain':>15}")
    for a in agg:
        gain = "-" if a["relative_local_gain"] is None else f"{100 * a['relative_local_gain']:+.2f}%"
        lines.append(f"{a['mode']:<11}  {a['n']:>3}  {a['mean']:>8.4f}  {a['sd']:>8.4f}  {gain:>15}")
    return "\n".join(lines) + "\n"


def run_sweep(cfg: RunConfig, dataset: Dataset, out_dir=None) -> dict:
    """Train every (seed, mode) pair sequentially and aggregate best dev CCC."""
    out = Path(out_dir) if out_dir is not None else None
    rows = []
    for seed in cfg.train.seeds:
        for mode in MODES:
            run_cfg = replace(cfg, train=replace(cfg.train, seed=int(seed), mode=mode))
            run_dir = out / f"seed{seed}_{mode}" if out is not None else None
            rep = train(run_cfg, dataset, run_dir)
            rows.append({
                "seed": int(seed),
                "mode": mode,
                "best_dev_ccc": rep.best_dev_ccc,
                "final_dev_ccc": rep.final_dev_ccc,
                "best_epoch": rep.best_epoch,
                "halted": rep.halted,
            })
    agg = summarize(rows)
    summary = {"rows": rows, "aggregate": agg}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        (out / "summary.txt").write_text(format_table(rows, agg))
    return summary
