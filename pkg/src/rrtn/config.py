"""Run configuration: a JSON tree of sections, every key with a desk-scale default."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .augment import AugmentConfig
from .data import SynthConfig
from .losses import LambdaPosition, RuwlParams
from .model import ModelConfig
from .optim import AdamWConfig
from .tensor import Tensor

MODES = ("baseline", "rrtn_fixed", "rrtn_ruwl")


class ConfigError(ValueError):
    pass


@dataclass
class ModelSection:
    encoder_kind: str = "mlp"
    encoder_dims: list[int] = field(default_factory=lambda: [128])
    rep_dim: int = 64
    emb_dim: int = 64
    head_sigmoid: bool = False


@dataclass
class TrainSection:
    epochs: int = 20
    batch_size: int = 16
    seed: int = 0
    mode: str = "rrtn_ruwl"
    fixed_weights: list[float] = field(default_factory=lambda: [1.0, 1.0, 1e-4])
    bt_lambda: float = 0.001
    center: bool = True
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])


@dataclass
class AugmentSection:
    # reference-scale values (64, 2, 8, 2) rescaled to the 32 x 16 desk feature map
    time_drop_width: int = 8
    time_stripes: int = 2
    freq_drop_width: int = 2
    freq_stripes: int = 2
    mask_value: float = 0.0


@dataclass
class RuwlSection:
    c_init: list[float] = field(default_factory=lambda: [1.0, 1.0, 0.01])
    lambda_consts: list[float] = field(default_factory=lambda: [1.0, 1.0, 1e-8])
    restraint_target: float = 2.0
    lambda_position: str = "numerator"


@dataclass
class DataSection:
    path: str | None = None  # RRTN-FEAT file; synthetic data when null
    n_samples: int = 512
    T: int = 32
    F: int = 16
    K: int = 10
    noise_sigma: float = 0.05
    seed: int = 0


@dataclass
class PathsSection:
    out: str = "runs/default"


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    augment: AugmentSection = field(default_factory=AugmentSection)
    ruwl: RuwlSection = field(default_factory=RuwlSection)
    data: DataSection = field(default_factory=DataSection)
    paths: PathsSection = field(default_factory=PathsSection)

    # derived configs ------------------------------------------------------
    def model_config(self, T: int | None = None, F: int | None = None, K: int | None = None) -> ModelConfig:
        m = self.model
        return ModelConfig(
            encoder_kind=m.encoder_kind,
            encoder_dims=tuple(m.encoder_dims),
            rep_dim=m.rep_dim,
            emb_dim=m.emb_dim,
            n_outputs=K or self.data.K,
            head_sigmoid=m.head_sigmoid,
            in_frames=T or self.data.T,
            in_bins=F or self.data.F,
        )

    def adamw_config(self) -> AdamWConfig:
        t = self.train
        return AdamWConfig(t.lr, t.beta1, t.beta2, t.eps, t.weight_decay)

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(**asdict(self.augment))

    def synth_config(self) -> SynthConfig:
        d = self.data
        return SynthConfig(d.n_samples, d.T, d.F, d.K, d.noise_sigma, d.seed)

    def ruwl_params(self) -> RuwlParams:
        r = self.ruwl
        return RuwlParams(
            Tensor(r.c_init, requires_grad=True),
            tuple(r.lambda_consts),
            r.restraint_target,
            LambdaPosition(r.lambda_position),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "RunConfig":
        """Enforce the invariants of every nested config; raises ConfigError."""
        t = self.train
        try:
            if t.mode not in MODES:
                raise ValueError(f"train.mode must be one of {MODES}")
            if t.batch_size < 2:
                raise ValueError("train.batch_size must be >= 2")
            if t.epochs < 0:
                raise ValueError("train.epochs must be >= 0")
            if len(t.fixed_weights) != 3:
                raise ValueError("train.fixed_weights needs three entries")
            if t.bt_lambda < 0:
                raise ValueError("train.bt_lambda must be >= 0")
            if not t.seeds:
                raise ValueError("train.seeds must not be empty")
            self.adamw_config()
            self.synth_config()
            self.model_config()
            self.augment_config().validate_for(self.data.T, self.data.F)
            self.ruwl_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return self


def _section_from(cls, raw, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key {where}.{unknown[0]}")
    return cls(**raw)


def from_dict(tree: dict) -> RunConfig:
    if not isinstance(tree, dict):
        raise ConfigError("config root must be an object")
    sections = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(tree) - set(sections))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]}")
    kwargs = {}
    for name, f in sections.items():
        if name in tree:
            kwargs[name] = _section_from(f.default_factory, tree[name], name)
    return RunConfig(**kwargs).validate()


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply ``section.key=value`` strings; values are parsed as JSON when possible."""
    tree = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not section.key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2 or parts[0] not in tree or parts[1] not in tree[parts[0]]:
            raise ConfigError(f"unknown key {key.strip()}")
        tree[parts[0]][parts[1]] = _parse_value(value)
    return from_dict(tree)


def load_config(path=None, overrides: list[str] | None = None, env=None) -> RunConfig:
    """Defaults <- config file <- overrides <- RRTN_SEED."""
    if path is None:
        cfg = RunConfig()
    else:
        text = Path(path).read_text()
        try:
            tree = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        cfg = from_dict(tree)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    env = os.environ if env is None else env
    if env.get("RRTN_SEED"):
        try:
            seed = int(env["RRTN_SEED"])
        except ValueError:
            raise ConfigError(f"RRTN_SEED must be an integer, got {env['RRTN_SEED']!r}") from None
        cfg = replace(cfg, train=replace(cfg.train, seed=seed))
    return cfg.validate()
