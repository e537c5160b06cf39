"""Epoch loop for the three training modes, plus corpus-level evaluation."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import losses
from . import tensor as T
from .augment import augment_batch
from .config import RunConfig
from .data import Dataset
from .model import (ModelConfig, ModelParams, init_params, load_checkpoint, predict,
                    rrtn_step_losses, save_checkpoint)
from .optim import AdamWState, NonFiniteGradientError, adamw_step
from .tensor import Tensor

log = logging.getLogger(__name__)

EVAL_CHUNK = 256


class TrainingHalted(RuntimeError):
    pass


@dataclass
class TrainReport:
    records: list[dict] = field(default_factory=list)
    initial_dev_ccc: float = float("nan")
    best_epoch: int = 0
    best_dev_ccc: float = float("nan")
    final_dev_ccc: float = float("nan")
    halted: bool = False
    halt_reason: str = ""
    params: ModelParams | None = None
    best_params: ModelParams | None = None
    ruwl_c: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "epochs_run": len([r for r in self.records if not r.get("halted")]),
            "initial_dev_ccc": self.initial_dev_ccc,
            "best_epoch": self.best_epoch,
            "best_dev_ccc": self.best_dev_ccc,
            "final_dev_ccc": self.final_dev_ccc,
            "halted": self.halted,
            "halt_reason": self.halt_reason,
        }


def detached(params: ModelParams) -> ModelParams:
    return ModelParams({n: Tensor(t.data) for n, t in params.tensors.items()})


def predict_split(params: ModelParams, cfg: ModelConfig, features: np.ndarray) -> np.ndarray:
    """View-A predictions for a whole split, without building a graph."""
    frozen = detached(params)
    outs = [
        predict(frozen, cfg, features[i : i + EVAL_CHUNK]).data
        for i in range(0, features.shape[0], EVAL_CHUNK)
    ]
    return np.concatenate(outs, axis=0)


def evaluate_params(params: ModelParams, cfg: ModelConfig, ds: Dataset) -> dict:
    if ds.n < 2:
        raise ValueError("evaluation split needs at least two samples")
    per_dim = losses.per_dimension_ccc(predict_split(params, cfg, ds.features), ds.targets)
    return {"mean_ccc": float(per_dim.mean()), "per_dim": per_dim.tolist()}


def evaluate(checkpoint, ds: Dataset) -> dict:
    """Corpus-level mean CCC and per-dimension CCC of a saved model on ``ds``."""
    cfg, params, _, _ = load_checkpoint(checkpoint)
    t, f, k = ds.dims
    if (t, f, k) != (cfg.in_frames, cfg.in_bins, cfg.n_outputs):
        raise ValueError(
            f"data geometry T={t} F={f} K={k} does not match checkpoint "
            f"T={cfg.in_frames} F={cfg.in_bins} K={cfg.n_outputs}"
        )
    return evaluate_params(params, cfg, ds)


def _batches(order: np.ndarray, size: int):
    for start in range(0, len(order), size):
        idx = order[start : start + size]
        if len(idx) >= 2:  # CCC is undefined on a single sample
            yield idx


def project_c(c: Tensor) -> None:
    """Keep every |c| >= C_FLOOR on the stored parameter."""
    mag = np.maximum(np.abs(c.data), losses.C_FLOOR)
    c.data = np.where(c.data < 0, -mag, mag)


def train(cfg: RunConfig, dataset: Dataset, out_dir=None) -> TrainReport:
    """Train one model; when ``out_dir`` is given write metrics and checkpoints there.

    Files: metrics.jsonl (one object per epoch), final.ckpt, best.ckpt,
    report.json.
    """
    cfg.validate()
    tcfg = cfg.train
    t_, f_, k_ = dataset.dims
    model_cfg = cfg.model_config(t_, f_, k_)
    aug_cfg = cfg.augment_config()
    aug_cfg.validate_for(t_, f_)
    opt_cfg = cfg.adamw_config()
    mode = tcfg.mode

    train_ds = dataset.split("train")
    dev_ds = dataset.split("dev")
    if train_ds.n < 2 or dev_ds.n < 2:
        raise ValueError("train and dev splits need at least two samples each")

    params = init_params(model_cfg, tcfg.seed)
    ruwl = cfg.ruwl_params()
    trainable = params.values() + ([ruwl.c] if mode == "rrtn_ruwl" else [])
    state = AdamWState.for_params(trainable)
    projector = set(map(id, params.group("projector.")))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([tcfg.seed, 7]))

    out = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out / "metrics.jsonl", "w")

    report = TrainReport()
    report.initial_dev_ccc = evaluate_params(params, model_cfg, dev_ds)["mean_ccc"]
    report.best_dev_ccc = report.initial_dev_ccc
    report.best_params = detached(params)

    def emit(rec: dict) -> None:
        report.records.append(rec)
        if metrics_fh is not None:
            metrics_fh.write(json.dumps(rec, sort_keys=True) + "\n")
            metrics_fh.flush()

    try:
        for epoch in range(1, tcfg.epochs + 1):
            order = shuffle_rng.permutation(train_ds.n)
            sums = np.zeros(5)
            weights_last = np.zeros(3)
            n_batches = 0
            for idx in _batches(order, tcfg.batch_size):
                xA = train_ds.features[idx]
                xB = augment_batch(xA, aug_cfg, tcfg.seed, epoch, idx)
                parts = rrtn_step_losses(
                    params, model_cfg, xA, xB, train_ds.targets[idx], tcfg.bt_lambda, tcfg.center
                )
                if mode == "baseline":
                    total, l_w, weights = parts[0], Tensor(0.0), np.array([1.0, 0.0, 0.0])
                elif mode == "rrtn_fixed":
                    weights = np.asarray(tcfg.fixed_weights, dtype=np.float64)
                    total, l_w = losses.weighted_sum_loss(parts, weights), Tensor(0.0)
                else:
                    bundle = losses.combined_loss(parts, ruwl)
                    total, l_w, weights = bundle.l_total, bundle.l_w, bundle.effective_weights
                values = np.array([parts[0].item(), parts[1].item(), parts[2].item(),
                                   l_w.item(), total.item()])
                if not np.all(np.isfinite(values)):
                    raise TrainingHalted(f"non-finite loss at epoch {epoch}: {values.tolist()}")
                grads = T.backward(total)
                if mode == "baseline":
                    leaked = [p for p in grads if id(p) in projector and np.any(grads[p] != 0)]
                    assert not leaked, "projector received gradient in baseline mode"
                g_list = [grads.get(p, np.zeros_like(p.data)) for p in trainable]
                try:
                    adamw_step(trainable, g_list, state, opt_cfg)
                except NonFiniteGradientError as exc:
                    raise TrainingHalted(f"epoch {epoch}: {exc}") from None
                if mode == "rrtn_ruwl":
                    project_c(ruwl.c)
                sums += values
                weights_last = np.asarray(weights, dtype=np.float64)
                n_batches += 1
            means = sums / max(n_batches, 1)
            dev = evaluate_params(params, model_cfg, dev_ds)["mean_ccc"]
            emit({
                "epoch": epoch,
                "l_ccc": means[0],
                "l_ccc_a": means[1],
                "l_bt": means[2],
                "l_w": means[3],
                "l_total": means[4],
                "c": ruwl.c.data.tolist(),
                "effective_weights": weights_last.tolist(),
                "dev_ccc": dev,
            })
            log.info("epoch %d mode=%s l_total=%.5f dev_ccc=%.4f", epoch, mode, means[4], dev)
            if dev > report.best_dev_ccc or report.best_epoch == 0:
                report.best_epoch, report.best_dev_ccc = epoch, dev
                report.best_params = detached(params)
            report.final_dev_ccc = dev
    except TrainingHalted as exc:
        report.halted, report.halt_reason = True, str(exc)
        emit({"epoch": epoch, "halted": True, "reason": str(exc)})
        log.error("%s", exc)
    finally:
        if metrics_fh is not None:
            metrics_fh.close()

    if tcfg.epochs == 0:
        report.final_dev_ccc = report.initial_dev_ccc
    report.params = params
    report.ruwl_c = ruwl.c.data.copy()
    if out is not None:
        echo = cfg.to_dict()
        echo.pop("paths")  # where a run lands is not part of what it is
        extra = {"ruwl.c": ruwl.c}
        save_checkpoint(out / "final.ckpt", model_cfg, params, extra, echo)
        save_checkpoint(out / "best.ckpt", model_cfg, report.best_params, extra, echo)
        (out / "report.json").write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    return report
