"""Command-line entry point: train, eval, gradcheck, sweep, gen-data.

Exit codes: 0 success, 1 failed check or halted run, 2 bad input.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, from_dict, load_config
from .data import FeatureFormatError, gen_synth, load_features, save_features
from .model import CheckpointError, load_checkpoint

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _dataset(cfg: RunConfig):
    if cfg.data.path:
        return load_features(cfg.data.path, T=cfg.data.T)
    return gen_synth(cfg.synth_config())


def _load(args) -> RunConfig:
    cfg = load_config(args.config, args.set)
    if getattr(args, "out", None):
        cfg.paths.out = args.out
    return cfg


def cmd_train(args) -> int:
    from .train import train

    cfg = _load(args)
    report = train(cfg, _dataset(cfg), cfg.paths.out)
    s = report.summary()
    print(f"initial dev CCC {s['initial_dev_ccc']:.4f}  best {s['best_dev_ccc']:.4f} "
          f"(epoch {s['best_epoch']})  final {s['final_dev_ccc']:.4f}")
    print(f"outputs written to {cfg.paths.out}")
    if report.halted:
        print(f"halted: {report.halt_reason}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_eval(args) -> int:
    from .train import evaluate

    _, _, _, echo = load_checkpoint(args.checkpoint)
    if args.data:
        T = echo.get("data", {}).get("T")
        ds = load_features(args.data, T=T)
    else:
        cfg = from_dict(echo) if echo else RunConfig()
        ds = _dataset(cfg)
    split = ds.split(args.split)
    if split.n < 2:
        print(f"split {args.split!r} has {split.n} samples; need at least 2", file=sys.stderr)
        return EXIT_INPUT
    res = evaluate(args.checkpoint, split)
    print(f"mean CCC {res['mean_ccc']:.6f}")
    print("per-dimension CCC " + " ".join(f"{v:.4f}" for v in res["per_dim"]))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import main_check

    ok, text = main_check()
    print(text)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args) -> int:
    from .sweep import run_sweep

    cfg = _load(args)
    summary = run_sweep(cfg, _dataset(cfg), cfg.paths.out)
    print((Path(cfg.paths.out) / "summary.txt").read_text(), end="")
    return EXIT_FAIL if any(r["halted"] for r in summary["rows"]) else EXIT_OK


def cmd_gen_data(args) -> int:
    cfg = _load(args)
    ds = gen_synth(cfg.synth_config())
    target = Path(args.output)
    target.parent.mkdir(parents=True, exist_ok=True)
    save_features(ds, target)
    print(f"wrote {ds.n} samples to {target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rrtn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log every epoch")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("config", nargs="?", help="JSON config file (defaults when omitted)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. train.epochs=5 (repeatable)")
        sp.add_argument("--out", help="output directory (overrides paths.out)")
        return sp

    with_config(sub.add_parser("train", help="train one model")).set_defaults(fn=cmd_train)
    with_config(sub.add_parser("sweep", help="seed x mode ablation")).set_defaults(fn=cmd_sweep)
    g = with_config(sub.add_parser("gen-data", help="write synthetic data as RRTN-FEAT"))
    g.add_argument("--output", "-O", default="data/synth.feat")
    g.set_defaults(fn=cmd_gen_data)
    sub.add_parser("gradcheck", help="finite-difference suite").set_defaults(fn=cmd_gradcheck)
    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("data", nargs="?", help="RRTN-FEAT file (default: regenerate run data)")
    e.add_argument("--split", default="dev", choices=["train", "dev", "all"])
    e.set_defaults(fn=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, FeatureFormatError, CheckpointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
