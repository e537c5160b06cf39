"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable operation records a node holding its parents and a
backward closure. Nodes carry a global creation counter, so sorting the
reachable nodes by that counter gives a topological order for free.
"""
from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

SQRT_LOG_FLOOR = 1e-12

_node_ids = itertools.count()


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class Node:
    __slots__ = ("op", "parents", "backward_fn", "seq")

    def __init__(self, op: str, parents: tuple, backward_fn: Callable):
        self.op = op
        self.parents = parents
        self.backward_fn = backward_fn
        self.seq = next(_node_ids)


class Tensor:
    """A dense array that may take part in a differentiation graph.

    Leaves are tensors created directly with ``requires_grad=True``. Results
    of operations on such tensors carry a ``node`` and are never leaves.
    """

    __array_priority__ = 1000  # make ndarray <op> Tensor dispatch to Tensor

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.node: Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else _raise_item(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return mul(reciprocal(self), other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self, axis=None):
        return reduce("sum", self, axis)

    def mean(self, axis=None):
        return reduce("mean", self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _raise_item(t: Tensor):
    raise DimensionError(f"item() needs a single-element tensor, got shape {t.shape}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, op: str, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Wrap a forward result and record a node if any parent needs grad."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.node = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out.node = Node(op, tuple(parents), backward_fn)
    return out


# ---------------------------------------------------------------------------
# elementwise binary ops

def _binary_operands(a, b) -> tuple[Tensor, Tensor, bool]:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape == b.shape:
        return a, b, False
    if b.size == 1:
        return a, b, True
    raise DimensionError(f"cannot combine shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, b: Tensor, scalar: bool) -> np.ndarray:
    return np.reshape(g.sum(), b.shape) if scalar else g


def add(a, b) -> Tensor:
    a, b, sc = _binary_operands(a, b)
    bv = b.data.reshape(()) if sc else b.data

    def backward(g):
        return g, _unbroadcast(g, b, sc)

    return _make(a.data + bv, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    a, b, sc = _binary_operands(a, b)
    bv = b.data.reshape(()) if sc else b.data

    def backward(g):
        return g, _unbroadcast(-g, b, sc)

    return _make(a.data - bv, "sub", (a, b), backward)


def mul(a, b) -> Tensor:
    a, b, sc = _binary_operands(a, b)
    av = a.data
    bv = b.data.reshape(()) if sc else b.data

    def backward(g):
        return g * bv, _unbroadcast(g * av, b, sc)

    return _make(av * bv, "mul", (a, b), backward)


def div(a, b) -> Tensor:
    a, b, sc = _binary_operands(a, b)
    av = a.data
    bv = b.data.reshape(()) if sc else b.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = av / bv

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return g / bv, _unbroadcast(-g * av / (bv * bv), b, sc)

    return _make(out, "div", (a, b), backward)


def elementwise(op_kind: str, a, b) -> Tensor:
    try:
        fn = {"add": add, "sub": sub, "mul": mul, "div": div}[op_kind]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op_kind!r}") from None
    return fn(a, b)


# ---------------------------------------------------------------------------
# unary ops

def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, "neg", (a,), lambda g: (-g,))


def square(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return _make(x * x, "square", (a,), lambda g: (2.0 * x * g,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    x = np.maximum(a.data, SQRT_LOG_FLOOR)
    out = np.sqrt(x)
    live = a.data >= SQRT_LOG_FLOOR

    def backward(g):
        return (np.where(live, g * 0.5 / out, 0.0),)

    return _make(out, "sqrt", (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    x = np.maximum(a.data, SQRT_LOG_FLOOR)
    live = a.data >= SQRT_LOG_FLOOR

    def backward(g):
        return (np.where(live, g / x, 0.0),)

    return _make(np.log(x), "log", (a,), backward)


def abs(a) -> Tensor:  # noqa: A001 - mirrors numpy naming
    a = as_tensor(a)
    s = np.sign(a.data)  # sign(0) == 0 is the chosen subgradient
    return _make(np.abs(a.data), "abs", (a,), lambda g: (g * s,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(out, "sigmoid", (a,), lambda g: (g * out * (1.0 - out),))


def reciprocal(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore"):
        out = 1.0 / a.data
    return _make(out, "reciprocal", (a,), lambda g: (-g * out * out,))


def clamp_min(a, lo: float) -> Tensor:
    """max(a, lo) with zero gradient where the floor is active."""
    a = as_tensor(a)
    live = a.data >= lo
    return _make(np.where(live, a.data, lo), "clamp_min", (a,), lambda g: (g * live,))


_UNARY = {
    "square": square,
    "sqrt": sqrt,
    "log": log,
    "abs": abs,
    "relu": relu,
    "sigmoid": sigmoid,
    "neg": neg,
}


def unary(op_kind: str, a) -> Tensor:
    try:
        fn = _UNARY[op_kind]
    except KeyError:
        raise ValueError(f"unknown unary op {op_kind!r}") from None
    return fn(a)


# ---------------------------------------------------------------------------
# shape ops

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(str(exc)) from None
    src = a.shape
    return _make(out, "reshape", (a,), lambda g: (g.reshape(src),))


def flatten(a) -> Tensor:
    """Collapse all but the leading (batch) axis."""
    a = as_tensor(a)
    return reshape(a, (a.shape[0], -1) if a.ndim > 1 else (a.shape[0], 1))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {a.shape}")
    return _make(a.data.T.copy(), "transpose", (a,), lambda g: (g.T,))


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    out = np.array(a.data[index], dtype=np.float64)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _make(out, "getitem", (a,), backward)


def repeat_rows(a, n: int) -> Tensor:
    """Tile a length-D vector into an n x D matrix (explicit broadcast)."""
    a = as_tensor(a)
    if a.ndim != 1:
        raise DimensionError(f"repeat_rows expects a vector, got shape {a.shape}")
    out = np.tile(a.data, (n, 1))
    return _make(out, "repeat_rows", (a,), lambda g: (g.sum(axis=0),))


def add_rowvec(a, v) -> Tensor:
    """a[i, :] + v for a matrix a and a vector v (bias addition)."""
    a = as_tensor(a)
    v = as_tensor(v)
    if a.ndim != 2 or v.shape != (a.shape[1],):
        raise DimensionError(f"cannot add row vector {v.shape} to {a.shape}")
    return _make(a.data + v.data, "add_rowvec", (a, v), lambda g: (g, g.sum(axis=0)))


def stack(items: Sequence) -> Tensor:
    """Stack scalars or equal-shape tensors along a new leading axis."""
    ts = [as_tensor(t) for t in items]
    if not ts:
        raise DimensionError("stack of nothing")
    shape = ts[0].shape
    if any(t.shape != shape for t in ts):
        raise DimensionError("stack needs equal shapes")
    out = np.stack([t.data for t in ts])
    return _make(out, "stack", tuple(ts), lambda g: tuple(g[i] for i in range(len(ts))))


# ---------------------------------------------------------------------------
# linear algebra and reductions

def matmul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch {a.shape} x {b.shape}")
    av, bv = a.data, b.data
    return _make(av @ bv, "matmul", (a, b), lambda g: (g @ bv.T, av.T @ g))


def reduce(op_kind: str, a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    if op_kind not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {op_kind!r}")
    if axis is not None:
        if not -a.ndim <= axis < a.ndim:
            raise DimensionError(f"axis {axis} out of range for shape {a.shape}")
        axis = axis % a.ndim
    n = a.size if axis is None else a.shape[axis]
    out = a.data.sum(axis=axis)
    if op_kind == "mean":
        out = out / n
    scale = 1.0 / n if op_kind == "mean" else 1.0
    src = a.shape

    def backward(g):
        g = np.asarray(g) * scale
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, src).copy(),)

    return _make(np.asarray(out, dtype=np.float64), op_kind, (a,), backward)


def sum(a, axis=None) -> Tensor:  # noqa: A001
    return reduce("sum", a, axis)


def mean(a, axis=None) -> Tensor:
    return reduce("mean", a, axis)


# ---------------------------------------------------------------------------
# convolution and pooling

def _windows(xp: np.ndarray, kh: int, kw: int) -> np.ndarray:
    # [B, C, H, W, kh, kw] view over a padded input
    return np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))


def _conv_same(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    kh, kw = k.shape[2:]
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    return np.einsum("bchwij,ocij->bohw", _windows(xp, kh, kw), k, optimize=True)


def conv2d(x, kernel) -> Tensor:
    """Stride-1 cross-correlation with zero 'same' padding (odd kernels)."""
    x = as_tensor(x)
    kernel = as_tensor(kernel)
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError("conv2d expects [B,C,H,W] input and [O,C,kH,kW] kernel")
    if x.shape[1] != kernel.shape[1]:
        raise DimensionError(f"channel mismatch: input {x.shape[1]}, kernel {kernel.shape[1]}")
    kh, kw = kernel.shape[2:]
    if kh % 2 == 0 or kw % 2 == 0:
        raise DimensionError(f"kernel extents must be odd, got {kh}x{kw}")
    xv, kv = x.data, kernel.data
    out = _conv_same(xv, kv)

    def backward(g):
        # input grad: correlate with the spatially flipped, channel-swapped kernel
        gx = _conv_same(g, kv[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
        ph, pw = kh // 2, kw // 2
        xp = np.pad(xv, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
        gk = np.einsum("bchwij,bohw->ocij", _windows(xp, kh, kw), g, optimize=True)
        return gx, gk

    return _make(out, "conv2d", (x, kernel), backward)


def avgpool2d(x, window: tuple[int, int]) -> Tensor:
    """Non-overlapping mean pooling; trailing rows/cols that do not fill a window are dropped."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"avgpool2d expects [B,C,H,W], got {x.shape}")
    h, w = window
    B, C, H, W = x.shape
    Ho, Wo = H // h, W // w
    if Ho == 0 or Wo == 0:
        raise DimensionError(f"window {window} larger than extent {(H, W)}")
    cropped = x.data[:, :, : Ho * h, : Wo * w]
    out = cropped.reshape(B, C, Ho, h, Wo, w).mean(axis=(3, 5))

    def backward(g):
        full = np.zeros_like(x.data)
        spread = np.repeat(np.repeat(g, h, axis=2), w, axis=3) / (h * w)
        full[:, :, : Ho * h, : Wo * w] = spread
        return (full,)

    return _make(out, "avgpool2d", (x,), backward)


# ---------------------------------------------------------------------------
# backward pass

def _reachable(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    out: list[Tensor] = []
    stack_ = [root]
    while stack_:
        t = stack_.pop()
        if id(t) in seen:
            continue
        seen.add(id(t))
        out.append(t)
        if t.node is not None:
            stack_.extend(t.node.parents)
    return out


def backward(loss: Tensor, retain_graph: bool = False) -> dict[Tensor, np.ndarray]:
    """Return gradients of a scalar ``loss`` for every leaf that requires grad.

    Contributions along different paths are summed. Unless ``retain_graph``
    is set the tape is released afterwards, so interior tensors cannot be
    differentiated a second time.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward expects a Tensor")
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[Tensor, np.ndarray] = {}
    if not loss.requires_grad:
        return leaves
    nodes = sorted(
        (t for t in _reachable(loss) if t.node is not None),
        key=lambda t: t.node.seq,
        reverse=True,
    )
    for t in nodes:
        g = grads.pop(id(t), None)
        if g is None:
            continue
        parent_grads = t.node.backward_fn(g)
        for p, pg in zip(t.node.parents, parent_grads):
            if not p.requires_grad:
                continue
            pg = np.asarray(pg, dtype=np.float64).reshape(p.shape)
            if p.node is None:
                leaves[p] = leaves[p] + pg if p in leaves else pg.copy()
            else:
                key = id(p)
                grads[key] = grads[key] + pg if key in grads else pg
    if loss.node is None:  # loss is itself a leaf
        leaves[loss] = np.ones_like(loss.data)
    if not retain_graph:
        for t in nodes:
            t.node = None
            t.requires_grad = False
    return leaves


# ---------------------------------------------------------------------------
# finite differences

class GradientCheckError(RuntimeError):
    pass


def finite_diff_check(
    f: Callable[..., Tensor],
    inputs: Iterable[Tensor],
    eps: float = 1e-5,
) -> float:
    """Max over coordinates of |analytic - numeric| / max(1, |numeric|).

    ``f`` is called with the input tensors as positional arguments and must
    return a scalar tensor. Inputs are perturbed in place and restored.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    inputs = list(inputs)
    for t in inputs:
        t.requires_grad = True
    loss = f(*inputs)
    if not np.all(np.isfinite(loss.data)):
        raise GradientCheckError("f is non-finite at the base point")
    analytic = backward(loss)
    worst = 0.0
    for t in inputs:
        t.data = np.ascontiguousarray(t.data)  # perturbation below relies on a flat view
        ga = analytic.get(t, np.zeros_like(t.data))
        flat = t.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(*inputs).item()
            flat[i] = orig - eps
            fm = f(*inputs).item()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise GradientCheckError(f"non-finite evaluation at coordinate {i}")
            numeric = (fp - fm) / (2.0 * eps)
            err = np.abs(gflat[i] - numeric) / max(1.0, np.abs(numeric))
            worst = max(worst, float(err))
    return worst
