"""Shared-weight twin network: encoder -> representations -> (head, projector)."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import losses
from . import tensor as T
from .tensor import DimensionError, Tensor

ENCODER_KINDS = ("mlp", "tiny_cnn")


@dataclass(frozen=True)
class ModelConfig:
    """Network geometry.

    ``encoder_dims`` holds the hidden layer widths for ``mlp`` and
    ``[channels, kernel, pool]`` for ``tiny_cnn``.
    """

    encoder_kind: str = "mlp"
    encoder_dims: tuple[int, ...] = (128,)
    rep_dim: int = 64
    emb_dim: int = 64
    n_outputs: int = 10
    head_sigmoid: bool = False
    in_frames: int = 32
    in_bins: int = 16

    def __post_init__(self):
        object.__setattr__(self, "encoder_dims", tuple(int(d) for d in self.encoder_dims))
        if self.encoder_kind not in ENCODER_KINDS:
            raise ValueError(f"encoder_kind must be one of {ENCODER_KINDS}")
        dims = (self.rep_dim, self.emb_dim, self.n_outputs, self.in_frames, self.in_bins)
        if min(dims) <= 0 or any(d <= 0 for d in self.encoder_dims):
            raise ValueError("all model dimensions must be positive")
        if self.encoder_kind == "tiny_cnn":
            if len(self.encoder_dims) != 3:
                raise ValueError("tiny_cnn encoder_dims is [channels, kernel, pool]")
            _, k, p = self.encoder_dims
            if k % 2 == 0:
                raise ValueError("tiny_cnn kernel must be odd")
            if p > min(self.in_frames, self.in_bins):
                raise ValueError("tiny_cnn pool window exceeds the input")


@dataclass
class ModelParams:
    """Named parameter tensors, one set used by both twin passes."""

    tensors: dict[str, Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def values(self) -> list[Tensor]:
        return list(self.tensors.values())

    def group(self, prefix: str) -> list[Tensor]:
        return [t for n, t in self.tensors.items() if n.startswith(prefix)]


@dataclass
class TwinOutput:
    repA: Tensor
    repB: Tensor
    embA: Tensor
    embB: Tensor
    predA: Tensor
    predB: Tensor


def _linear_shapes(cfg: ModelConfig) -> list[tuple[str, int, int]]:
    """(name, fan_in, fan_out) for every dense layer, in forward order."""
    layers = []
    if cfg.encoder_kind == "mlp":
        widths = [cfg.in_frames * cfg.in_bins, *cfg.encoder_dims, cfg.rep_dim]
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            layers.append((f"encoder.{i}", a, b))
    else:
        ch, _, pool = cfg.encoder_dims
        flat = ch * (cfg.in_frames // pool) * (cfg.in_bins // pool)
        layers.append(("encoder.fc", flat, cfg.rep_dim))
    layers.append(("projector", cfg.rep_dim, cfg.emb_dim))
    layers.append(("head", cfg.rep_dim, cfg.n_outputs))
    return layers


def init_params(cfg: ModelConfig, seed: int) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    if cfg.encoder_kind == "tiny_cnn":
        ch, k, _ = cfg.encoder_dims
        bound = 1.0 / np.sqrt(k * k)
        tensors["encoder.conv.weight"] = Tensor(
            rng.uniform(-bound, bound, size=(ch, 1, k, k)), requires_grad=True
        )
    for name, fan_in, fan_out in _linear_shapes(cfg):
        bound = 1.0 / np.sqrt(fan_in)
        tensors[f"{name}.weight"] = Tensor(
            rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True
        )
        tensors[f"{name}.bias"] = Tensor(np.zeros(fan_out), requires_grad=True)
    return ModelParams(tensors)


def _dense(params: ModelParams, name: str, x: Tensor) -> Tensor:
    return T.add_rowvec(T.matmul(x, params[f"{name}.weight"]), params[f"{name}.bias"])


def encode(params: ModelParams, cfg: ModelConfig, x) -> Tensor:
    """[B, 1, T, F] batch -> [B, rep_dim] representations."""
    x = T.as_tensor(x)
    expected = (1, cfg.in_frames, cfg.in_bins)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise DimensionError(f"input must be [B, {', '.join(map(str, expected))}], got {x.shape}")
    if cfg.encoder_kind == "mlp":
        h = T.flatten(x)
        for i in range(len(cfg.encoder_dims) + 1):
            h = T.relu(_dense(params, f"encoder.{i}", h))
        return h
    _, _, pool = cfg.encoder_dims
    h = T.relu(T.conv2d(x, params["encoder.conv.weight"]))
    h = T.flatten(T.avgpool2d(h, (pool, pool)))
    return _dense(params, "encoder.fc", h)


def heads(params: ModelParams, cfg: ModelConfig, rep: Tensor) -> tuple[Tensor, Tensor]:
    """Representations -> (embeddings, predictions)."""
    emb = _dense(params, "projector", rep)
    pred = _dense(params, "head", rep)
    if cfg.head_sigmoid:
        pred = T.sigmoid(pred)
    return emb, pred


def predict(params: ModelParams, cfg: ModelConfig, x) -> Tensor:
    rep = encode(params, cfg, x)
    return heads(params, cfg, rep)[1]


def forward_twin(params: ModelParams, cfg: ModelConfig, xA, xB) -> TwinOutput:
    xA, xB = T.as_tensor(xA), T.as_tensor(xB)
    if xA.shape != xB.shape:
        raise DimensionError(f"views differ in shape: {xA.shape} vs {xB.shape}")
    repA = encode(params, cfg, xA)
    repB = encode(params, cfg, xB)
    embA, predA = heads(params, cfg, repA)
    embB, predB = heads(params, cfg, repB)
    return TwinOutput(repA, repB, embA, embB, predA, predB)


def rrtn_step_losses(
    params: ModelParams,
    cfg: ModelConfig,
    batchA,
    batchB,
    targets,
    bt_lambda: float = losses.BT_LAMBDA,
    center: bool = True,
) -> list[Tensor]:
    """[CCC loss on view A, CCC loss on view B, Barlow Twins loss]."""
    out = forward_twin(params, cfg, batchA, batchB)
    targets = T.as_tensor(targets)
    return [
        losses.ccc_loss(out.predA, targets),
        losses.ccc_loss(out.predB, targets),
        losses.bt_loss(losses.cross_correlation(out.embA, out.embB, center=center), bt_lambda),
    ]


# ---------------------------------------------------------------------------
# checkpoints

CKPT_MAGIC = b"RRTN-CKPT\n"
CKPT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, cfg: ModelConfig, params: ModelParams, extra: dict | None = None,
                    echo: dict | None = None) -> None:
    """Binary checkpoint: magic, version, JSON config echo, named float64 blocks.

    ``extra`` holds additional named tensors (e.g. the loss weighting
    parameters); ``echo`` is an arbitrary JSON-able run configuration.
    """
    header = json.dumps({"model": asdict(cfg), "run": echo or {}}, sort_keys=True).encode()
    blocks = dict(params.tensors)
    for name, t in (extra or {}).items():
        blocks[name] = T.as_tensor(t)
    parts = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(header)), header,
             struct.pack("<I", len(blocks))]
    for name, t in blocks.items():
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape))
        parts.append(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> tuple[ModelConfig, ModelParams, dict[str, Tensor], dict]:
    """Inverse of :func:`save_checkpoint`; returns (config, params, extra, run echo)."""
    raw = Path(path).read_bytes()
    if not raw.startswith(CKPT_MAGIC):
        raise CheckpointError(f"{path}: not an RRTN checkpoint")
    pos = len(CKPT_MAGIC)
    try:
        version, hlen = struct.unpack_from("<II", raw, pos)
        if version != CKPT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos += 8
        header = json.loads(raw[pos : pos + hlen])
        pos += hlen
        (count,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        blocks: dict[str, Tensor] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos : pos + nlen].decode()
            pos += nlen
            (ndim,) = struct.unpack_from("<B", raw, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}Q", raw, pos)
            pos += 8 * ndim
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(shape)
            pos += 8 * n
            blocks[name] = Tensor(arr.astype(np.float64), requires_grad=True)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint ({exc})") from None
    if pos != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - pos} trailing bytes")
    model_cfg = header["model"]
    cfg = ModelConfig(**model_cfg)
    expected = init_params(cfg, 0)
    params = ModelParams({n: blocks.pop(n) for n in expected.names() if n in blocks})
    for n, t in expected.tensors.items():
        if n not in params.tensors or params[n].shape != t.shape:
            raise CheckpointError(f"{path}: parameter {n} missing or mis-shaped")
    return cfg, params, blocks, header.get("run", {})
