"""Run configuration: one TOML document with a section per pipeline stage.

Every key has a default, so an empty file is a valid config.  Unknown
sections or keys and wrongly typed values raise ``InvalidConfig`` naming
the offending field.
"""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields

from .cplfpa import AdaptConfig
from .dataset import SynthConfig
from .errors import InvalidConfig, IoFailure
from .loss import LossConfig
from .numerics import ClipMode
from .trainer import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w


@dataclass(frozen=True)
class SynthSection:
    num_classes: int = 8
    per_class: int = 60
    d_in: int = 16
    latent_dim: int = 4
    class_sep: float = 3.0
    anisotropy: float = 8.0
    distractors: int = 100
    shift_rotation_deg: float = 30.0
    shift_scale: float = 1.5
    train_frac: float = 0.5
    query_frac: float = 0.2


@dataclass(frozen=True)
class TrainSection:
    t0: int = 100
    t1_minus_t0: int = 50
    batch_size: int = 64
    lr_stage1: float = 0.05
    lr_stage2: float = 0.005
    momentum: float = 0.9
    weight_decay: float = 0.0005
    d: int = 64
    hidden: int = 64
    variant: str = "mg"
    k1: int = 1
    k0: int = 1
    diagonal: bool = False
    clip_mode: str = TrainConfig.clip_mode.value
    clip_eps: float = TrainConfig.clip_eps
    ridge_rel: float = TrainConfig.ridge_rel
    pair_budget: int = 50_000
    em_max_iters: int = 100
    em_tol: float = 1e-6


@dataclass(frozen=True)
class LossSection:
    nu: float = 0.001
    alpha: float = 1.0


@dataclass(frozen=True)
class AdaptSection:
    k: int = 9
    n_init: int = 10
    pos_budget: int = 20_000
    neg_budget: int = 20_000


@dataclass(frozen=True)
class EvalSection:
    domain: str = "source"
    metric: str = "glrt"
    k_list: list = field(default_factory=lambda: [1, 10, 50])


@dataclass(frozen=True)
class RocSection:
    grid_size: int = 2001
    p_fa: list = field(default_factory=lambda: [0.01, 0.1])


@dataclass(frozen=True)
class IoSection:
    data_dir: str = "data"
    model: str = "out/model.json"
    adapted_model: str = "out/adapted_model.json"
    out_dir: str = "out"


CHOICES = {"train.variant": ("mg", "gmm"), "train.clip_mode": tuple(m.value for m in ClipMode),
           "eval.domain": ("source", "target"), "eval.metric": ("glrt", "cosine")}

SECTIONS = {"synth": SynthSection, "train": TrainSection, "loss": LossSection, "adapt": AdaptSection,
            "eval": EvalSection, "roc": RocSection, "io": IoSection}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    synth: SynthSection = field(default_factory=SynthSection)
    train: TrainSection = field(default_factory=TrainSection)
    loss: LossSection = field(default_factory=LossSection)
    adapt: AdaptSection = field(default_factory=AdaptSection)
    eval: EvalSection = field(default_factory=EvalSection)
    roc: RocSection = field(default_factory=RocSection)
    io: IoSection = field(default_factory=IoSection)

    def synth_config(self):
        return SynthConfig(**dataclasses.asdict(self.synth), seed=self.seed)

    def train_config(self):
        t = dataclasses.asdict(self.train)
        t["clip_mode"] = ClipMode(t["clip_mode"])
        return TrainConfig(**t, seed=self.seed, loss=LossConfig(**dataclasses.asdict(self.loss)))

    def adapt_config(self):
        t = self.train
        return AdaptConfig(**dataclasses.asdict(self.adapt), seed=self.seed, variant=t.variant, k1=t.k1,
                           k0=t.k0, diagonal=t.diagonal, clip_mode=t.clip_mode, clip_eps=t.clip_eps,
                           ridge_rel=t.ridge_rel, em_max_iters=t.em_max_iters, em_tol=t.em_tol)

    def to_dict(self):
        return dataclasses.asdict(self)

    def validate(self):
        for name, allowed in CHOICES.items():
            section, key = name.split(".")
            if getattr(getattr(self, section), key) not in allowed:
                raise InvalidConfig(f"{name} must be one of {', '.join(allowed)}")
        for name, build in (("synth", self.synth_config), ("train", self.train_config),
                            ("adapt", self.adapt_config)):
            try:
                build().validate()
            except ValueError as exc:
                raise InvalidConfig(f"[{name}] {exc}") from exc
        if not self.eval.k_list or any(k < 1 for k in self.eval.k_list):
            raise InvalidConfig("eval.k_list must hold positive integers")
        if self.roc.grid_size < 2:
            raise InvalidConfig("roc.grid_size must be >= 2")
        if any(not 0 <= p <= 1 for p in self.roc.p_fa):
            raise InvalidConfig("roc.p_fa values must lie in [0, 1]")
        return self


def _check(name, value, default):
    kind = type(default)
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif kind is list:
        ok = isinstance(value, list) and all(
            isinstance(v, type(default[0])) or (isinstance(default[0], float) and isinstance(v, int))
            for v in value) and not any(isinstance(v, bool) for v in value)
        value = [type(default[0])(v) for v in value] if ok else value
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise InvalidConfig(f"{name}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _section(name, cls, data):
    if not isinstance(data, dict):
        raise InvalidConfig(f"{name}: expected a table")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise InvalidConfig(f"unknown key {name}.{key}")
    values = {k: _check(f"{name}.{k}", v, getattr(defaults, k)) for k, v in data.items()}
    return dataclasses.replace(defaults, **values)


def from_dict(data) -> RunConfig:
    kwargs = {}
    for key, value in data.items():
        if key == "seed":
            kwargs["seed"] = _check("seed", value, 0)
        elif key in SECTIONS:
            kwargs[key] = _section(key, SECTIONS[key], value)
        else:
            raise InvalidConfig(f"unknown key {key}")
    return RunConfig(**kwargs).validate()


def loads(text) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfig(f"config is not valid TOML: {exc}") from exc
    return from_dict(data)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())
