"""CCC regression loss, Barlow Twins objective and restrained uncertainty weighting."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import tensor as T
from .tensor import DimensionError, Tensor

CCC_EPS = 1e-8
XCORR_EPS = 1e-12
C_FLOOR = 1e-6
BT_LAMBDA = 0.001


class LambdaPosition(str, Enum):
    """Where the per-loss constant enters the uncertainty weight."""

    DENOMINATOR = "denominator"  # w = 1 / (lambda * c^2)
    NUMERATOR = "numerator"  # w = lambda / c^2


@dataclass
class CccMoments:
    mu_x: float
    mu_y: float
    var_x: float
    var_y: float
    cov_xy: float


@dataclass
class RuwlParams:
    c: Tensor
    lambda_consts: tuple[float, float, float] = (1.0, 1.0, 1e-8)
    restraint_target: float = 2.0
    lambda_position: LambdaPosition = LambdaPosition.NUMERATOR

    def __post_init__(self):
        self.c = T.as_tensor(self.c)
        if self.c.shape != (3,):
            raise DimensionError(f"c must be a 3-vector, got shape {self.c.shape}")
        if len(self.lambda_consts) != 3 or min(self.lambda_consts) <= 0:
            raise ValueError("lambda_consts must be three positive numbers")
        self.lambda_position = LambdaPosition(self.lambda_position)

    @classmethod
    def initial(cls, c=(1.0, 1.0, 0.01), **kwargs) -> "RuwlParams":
        return cls(Tensor(c, requires_grad=True), **kwargs)


@dataclass
class LossBundle:
    l_ccc: Tensor
    l_ccc_a: Tensor
    l_bt: Tensor
    l_w: Tensor
    l_total: Tensor
    effective_weights: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def as_floats(self) -> dict[str, float]:
        return {
            "l_ccc": self.l_ccc.item(),
            "l_ccc_a": self.l_ccc_a.item(),
            "l_bt": self.l_bt.item(),
            "l_w": self.l_w.item(),
            "l_total": self.l_total.item(),
        }


# ---------------------------------------------------------------------------
# concordance correlation

def moments(x, y) -> CccMoments:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mx, my = x.mean(), y.mean()
    return CccMoments(
        mu_x=float(mx),
        mu_y=float(my),
        var_x=float(((x - mx) ** 2).mean()),
        var_y=float(((y - my) ** 2).mean()),
        cov_xy=float(((x - mx) * (y - my)).mean()),
    )


def _ccc_columns(x: Tensor, y: Tensor) -> Tensor:
    """Per-column CCC of two B x K matrices, population moments."""
    B = x.shape[0]
    mx = T.mean(x, axis=0)
    my = T.mean(y, axis=0)
    dx = x - T.repeat_rows(mx, B)
    dy = y - T.repeat_rows(my, B)
    var_x = T.mean(T.square(dx), axis=0)
    var_y = T.mean(T.square(dy), axis=0)
    cov = T.mean(dx * dy, axis=0)
    # floored rather than offset, so non-degenerate columns are exact
    denom = T.clamp_min(var_x + var_y + T.square(mx - my), CCC_EPS)
    return (cov * 2.0) / denom


def _as_matrix(a) -> Tensor:
    a = T.as_tensor(a)
    return T.reshape(a, (a.shape[0], 1)) if a.ndim == 1 else a


def ccc(x, y) -> Tensor:
    """Concordance correlation coefficient of two vectors."""
    x, y = T.as_tensor(x), T.as_tensor(y)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionError(f"ccc needs two equal-length vectors, got {x.shape}, {y.shape}")
    if x.shape[0] < 2:
        raise ValueError("ccc needs at least two samples")
    return T.reshape(_ccc_columns(_as_matrix(x), _as_matrix(y)), ())


def ccc_loss(pred, target) -> Tensor:
    """1 - mean over output columns of the per-column CCC."""
    pred, target = T.as_tensor(pred), T.as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"pred {pred.shape} and target {target.shape} differ")
    pred, target = _as_matrix(pred), _as_matrix(target)
    if pred.shape[0] < 2:
        raise ValueError("ccc_loss needs a batch of at least two")
    return 1.0 - T.mean(_ccc_columns(pred, target))


def per_dimension_ccc(pred, target) -> np.ndarray:
    """Corpus-level CCC per output column (reporting path, no graph)."""
    p = np.asarray(pred.data if isinstance(pred, Tensor) else pred, dtype=np.float64)
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionError(f"pred {p.shape} and target {t.shape} differ")
    if p.ndim == 1:
        p, t = p[:, None], t[:, None]
    if p.shape[0] < 2:
        raise ValueError("metric needs at least two samples")
    return _ccc_columns(Tensor(p), Tensor(t)).data.copy()


def mean_ccc_metric(pred, target) -> float:
    """Mean CCC over output dimensions, computed over the whole split."""
    return float(per_dimension_ccc(pred, target).mean())


# ---------------------------------------------------------------------------
# Barlow Twins

def _center(z: Tensor) -> Tensor:
    return z - T.repeat_rows(T.mean(z, axis=0), z.shape[0])


def cross_correlation(zA, zB, center: bool = True) -> Tensor:
    """D x D normalised cross-correlation between two batches of embeddings.

    Column norms are taken over the batch axis; ``center`` subtracts the
    batch mean of every column first.
    """
    zA, zB = T.as_tensor(zA), T.as_tensor(zB)
    if zA.ndim != 2 or zA.shape != zB.shape:
        raise DimensionError(f"embeddings must be equal B x D matrices, got {zA.shape}, {zB.shape}")
    if zA.shape[0] < 2:
        raise ValueError("cross_correlation needs a batch of at least two")
    if center:
        zA, zB = _center(zA), _center(zB)
    D = zA.shape[1]
    num = T.matmul(T.transpose(zA), zB)
    na = T.sqrt(T.sum(T.square(zA), axis=0))
    nb = T.sqrt(T.sum(T.square(zB), axis=0))
    denom = T.matmul(T.reshape(na, (D, 1)), T.reshape(nb, (1, D))) + XCORR_EPS
    return num / denom


def bt_loss(C, lambda_offdiag: float = BT_LAMBDA) -> Tensor:
    """Invariance term on the diagonal plus weighted off-diagonal redundancy term."""
    C = T.as_tensor(C)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionError(f"bt_loss needs a square matrix, got {C.shape}")
    if lambda_offdiag < 0:
        raise ValueError("lambda_offdiag must be non-negative")
    eye = np.eye(C.shape[0])
    diag = T.sum(C * eye, axis=1)
    on = T.sum(T.square(1.0 - diag))
    off = T.sum(T.square(C * (1.0 - eye)))
    return on + off * float(lambda_offdiag)


# ---------------------------------------------------------------------------
# loss weighting

def weighted_sum_loss(losses: Sequence, weights: Sequence[float]) -> Tensor:
    if len(losses) != 3 or len(weights) != 3:
        raise DimensionError("weighted_sum_loss expects three losses and three weights")
    total = T.as_tensor(losses[0]) * float(weights[0])
    for l, w in zip(losses[1:], weights[1:]):
        total = total + T.as_tensor(l) * float(w)
    return total


def ruwl(params: RuwlParams) -> Tensor:
    """| target - |c1| - |c2| - |c3| |"""
    total = T.sum(T.abs(params.c))
    return T.abs(params.restraint_target - total)


def _c_squared(params: RuwlParams) -> Tensor:
    # |c| >= C_FLOOR  <=>  c^2 >= C_FLOOR^2
    return T.clamp_min(T.square(params.c), C_FLOOR * C_FLOOR)


def effective_weights(params: RuwlParams) -> Tensor:
    c2 = _c_squared(params)
    lam = np.asarray(params.lambda_consts, dtype=np.float64)
    if params.lambda_position is LambdaPosition.DENOMINATOR:
        return T.reciprocal(c2 * lam)
    return T.reciprocal(c2) * lam


def combined_loss(losses: Sequence, params: RuwlParams) -> LossBundle:
    """Restraint + uncertainty-weighted losses + log(1 + c^2) regulariser."""
    if len(losses) != 3:
        raise DimensionError("combined_loss expects three losses")
    ls = [T.reshape(T.as_tensor(l), ()) for l in losses]
    w = effective_weights(params)
    l_w = ruwl(params)
    weighted = T.sum(w * T.stack(ls))
    reg = T.sum(T.log(1.0 + _c_squared(params)))
    total = l_w + weighted + reg
    return LossBundle(ls[0], ls[1], ls[2], l_w, total, w.data.copy())
