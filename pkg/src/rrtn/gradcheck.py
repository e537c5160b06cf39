"""Finite-difference verification of every loss and the end-to-end twin model."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import losses
from . import tensor as T
from .model import ModelConfig, ModelParams, init_params, rrtn_step_losses
from .tensor import GradientCheckError, Tensor

TOLERANCE = 1e-4
SEEDS = (0, 1, 2)


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    passed: bool
    detail: str = ""


def _rand(rng, *shape) -> Tensor:
    return Tensor(rng.standard_normal(shape))


def _probe(rng, shape) -> np.ndarray:
    # random linear functional turns a matrix output into a scalar
    return rng.standard_normal(shape)


def _check_ccc(rng):
    x, y = _rand(rng, 8), _rand(rng, 8)
    return T.finite_diff_check(lambda a, b: losses.ccc(a, b), [x, y])


def _check_ccc_loss(rng):
    pred, target = _rand(rng, 8, 10), Tensor(rng.uniform(size=(8, 10)))
    return T.finite_diff_check(lambda p: losses.ccc_loss(p, target), [pred])


def _xcorr_check(center: bool):
    def run(rng):
        zA, zB = _rand(rng, 6, 4), _rand(rng, 6, 4)
        w = _probe(rng, (4, 4))
        return T.finite_diff_check(
            lambda a, b: T.sum(losses.cross_correlation(a, b, center=center) * w), [zA, zB]
        )
    return run


def _check_bt_loss(rng):
    zA, zB = _rand(rng, 6, 4), _rand(rng, 6, 4)
    return T.finite_diff_check(
        lambda a, b: losses.bt_loss(losses.cross_correlation(a, b), losses.BT_LAMBDA), [zA, zB]
    )


def _check_weighted_sum(rng):
    ls = Tensor(rng.uniform(0.1, 2.0, size=3))
    w = rng.uniform(0.0, 1.0, size=3)
    return T.finite_diff_check(lambda v: losses.weighted_sum_loss([v[0], v[1], v[2]], w), [ls])


def _random_c(rng) -> Tensor:
    # keep away from the kinks at c = 0 and sum |c| = target
    c = rng.uniform(0.2, 1.5, size=3) * rng.choice([-1.0, 1.0], size=3)
    if abs(np.abs(c).sum() - 2.0) < 0.05:
        c *= 1.2
    return Tensor(c)


def _check_ruwl(rng):
    c = _random_c(rng)
    return T.finite_diff_check(lambda cc: losses.ruwl(losses.RuwlParams(cc)), [c])


def _combined_check(position: losses.LambdaPosition, lam):
    def run(rng):
        c = _random_c(rng)
        ls = Tensor(rng.uniform(0.1, 2.0, size=3))

        def f(cc, v):
            p = losses.RuwlParams(cc, lam, 2.0, position)
            return losses.combined_loss([v[0], v[1], v[2]], p).l_total

        return T.finite_diff_check(f, [c, ls])
    return run


def _check_matmul(rng):
    a, b = _rand(rng, 3, 4), _rand(rng, 4, 2)
    w = _probe(rng, (3, 2))
    return T.finite_diff_check(lambda x, y: T.sum(T.matmul(x, y) * w), [a, b])


def _check_conv2d(rng):
    x, k = _rand(rng, 1, 1, 5, 5), _rand(rng, 2, 1, 3, 3)
    w = _probe(rng, (1, 2, 5, 5))
    return T.finite_diff_check(lambda a, b: T.sum(T.conv2d(a, b) * w), [x, k])


def _check_avgpool(rng):
    x = _rand(rng, 2, 2, 5, 6)
    w = _probe(rng, (2, 2, 2, 3))
    return T.finite_diff_check(lambda a: T.sum(T.avgpool2d(a, (2, 2)) * w), [x])


def _check_unary_chain(rng):
    x = Tensor(rng.uniform(0.5, 2.0, size=5) * rng.choice([-1.0, 1.0], size=5))
    w = _probe(rng, (5,))

    def f(a):
        s = T.sigmoid(a) + T.sqrt(T.square(a) + 1.0) + T.log(T.abs(a)) - T.relu(a)
        return T.sum((s / (T.square(a) + 2.0)) * w)

    return T.finite_diff_check(f, [x])


TINY_MLP = ModelConfig("mlp", (8,), rep_dim=8, emb_dim=8, n_outputs=3, in_frames=6, in_bins=4)
TINY_CNN = ModelConfig("tiny_cnn", (2, 3, 2), rep_dim=8, emb_dim=8, n_outputs=3, in_frames=6, in_bins=4)


def _model_check(cfg: ModelConfig, which: int | None):
    """which: index into the three step losses, or None for their sum."""
    def run(rng):
        seed = int(rng.integers(2**31))
        params = init_params(cfg, seed)
        names = params.names()
        xA = rng.standard_normal((4, 1, cfg.in_frames, cfg.in_bins))
        xB = xA * (rng.uniform(size=xA.shape) > 0.2)
        y = rng.uniform(size=(4, cfg.n_outputs))

        def f(*ps):
            parts = rrtn_step_losses(ModelParams(dict(zip(names, ps))), cfg, xA, xB, y)
            return parts[0] + parts[1] + parts[2] if which is None else parts[which]

        return T.finite_diff_check(f, params.values())
    return run


def default_checks() -> list[tuple[str, Callable]]:
    lit = losses.LambdaPosition
    return [
        ("ccc", _check_ccc),
        ("ccc_loss", _check_ccc_loss),
        ("cross_correlation", _xcorr_check(True)),
        ("cross_correlation_uncentered", _xcorr_check(False)),
        ("bt_loss", _check_bt_loss),
        ("weighted_sum_loss", _check_weighted_sum),
        ("ruwl", _check_ruwl),
        ("combined_loss_numerator", _combined_check(lit.NUMERATOR, (1.0, 1.0, 1e-8))),
        ("combined_loss_denominator", _combined_check(lit.DENOMINATOR, (1.0, 1.0, 0.5))),
        ("matmul", _check_matmul),
        ("conv2d", _check_conv2d),
        ("avgpool2d", _check_avgpool),
        ("unary_chain", _check_unary_chain),
        ("model_mlp.l_ccc", _model_check(TINY_MLP, 0)),
        ("model_mlp.l_ccc_a", _model_check(TINY_MLP, 1)),
        ("model_mlp.l_bt", _model_check(TINY_MLP, 2)),
        ("model_tiny_cnn.all_losses", _model_check(TINY_CNN, None)),
    ]


def run_suite(checks=None, seeds=SEEDS, tol: float = TOLERANCE) -> list[CheckResult]:
    results = []
    for name, fn in checks or default_checks():
        worst, detail = 0.0, ""
        try:
            for seed in seeds:
                err = fn(np.random.default_rng(seed))
                if not np.isfinite(err):
                    raise GradientCheckError(f"non-finite error at seed {seed}")
                worst = max(worst, err)
        except (GradientCheckError, FloatingPointError) as exc:
            worst, detail = float("inf"), str(exc)
        results.append(CheckResult(name, worst, worst < tol, detail))
    return results


def format_results(results: list[CheckResult], seconds: float | None = None) -> str:
    width = max(len(r.name) for r in results)
    lines = [
        f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  max_rel_err={r.max_rel_err:.3e}"
        + (f"  ({r.detail})" if r.detail else "")
        for r in results
    ]
    n_pass = sum(r.passed for r in results)
    tail = f"{n_pass}/{len(results)} checks passed"
    if seconds is not None:
        tail += f" in {seconds:.1f}s"
    return "\n".join(lines + [tail])


def main_check() -> tuple[bool, str]:
    t0 = time.perf_counter()
    results = run_suite()
    text = format_results(results, time.perf_counter() - t0)
    return all(r.passed for r in results), text
