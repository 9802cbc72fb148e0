"""Run configuration: a YAML tree validated strictly, plus seed fan-out.

Unknown keys are errors, every field except the dataset root has a default,
and dumping then loading a config returns an equal object. The defaults are
the desk-scale Fashion-MNIST recipe documented in the README.

Seed splitting: ``np.random.SeedSequence(seed).spawn(4)`` gives, in order,
the seeds for weight init, batch shuffling, the rate encoder and analysis
sampling. See :func:`component_seeds`.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from .errors import ConfigError
from .neuron import NeuronParams, SurrogateParams
from .optim import CosineSchedule
from .plasticity import SsdpConfig

CONFIG_VERSION = 1
SEED_COMPONENTS = ("init", "shuffle", "encoder", "analysis")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSection(_Strict):
    root: Optional[str] = None  # falls back to $SSDP_DATA_DIR
    encoder: Literal["latency", "rate"] = "latency"
    T: int = 20
    max_rate: float = 1.0
    train_subset: Optional[int] = 10_000
    val_size: int = 1_000
    test_subset: Optional[int] = 2_000
    subset_seed: int = 0

    @field_validator("T", "val_size")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("train_subset", "test_subset")
    @classmethod
    def _positive_or_all(cls, v):
        if v is not None and v < 1:
            raise ValueError("must be >= 1 or null for all samples")
        return v


class SurrogateSection(_Strict):
    sigma_g: float = 5.0
    h_scale: float = 0.15
    s_ratio: float = 6.0


class ModelSection(_Strict):
    hidden_dim: int = 256
    tau_m: float = 20.0
    dt: float = 1.0
    v_th: float = 1.0
    tau_n_init: float = 0.0
    reset_mode: Literal["subtract", "zero"] = "subtract"
    surrogate: SurrogateSection = SurrogateSection()
    init_scale: float = 10.0
    logit_scale: float = 10.0


class SsdpSection(_Strict):
    variant: Literal["exp", "gauss"] = "exp"
    a_plus: float = 0.02
    a_minus: Optional[float] = 0.01
    a_baseline: Optional[float] = None
    sigma: Optional[float] = None
    tau_plus: Optional[float] = 20.0
    tau_minus: Optional[float] = 20.0
    clamp_lo: float = -10.0
    clamp_hi: float = 10.0
    start_epoch: int = 3


class SsdpLayers(_Strict):
    enabled: bool = True
    hidden: Optional[SsdpSection] = None
    readout: Optional[SsdpSection] = SsdpSection()
    order: Literal["gradient_first", "ssdp_first"] = "gradient_first"


class OptimizerSection(_Strict):
    lr: float = 4e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clamp_gradient_step: bool = False


class ScheduleSection(_Strict):
    """Cosine schedules over the run. ``lr_min_fraction`` is relative to ``optimizer.lr``."""

    lr_min_fraction: float = 0.1
    ssdp_max: float = 1.0
    ssdp_min: float = 0.0


class AnalysisSection(_Strict):
    raster_samples: int = 16
    hidden_repr_samples: int = 500
    loss_window: int = 10


class RunConfig(_Strict):
    version: int = CONFIG_VERSION
    seed: int = 0
    epochs: int = 15
    batch_size: int = 64
    output_dir: str = "runs"
    data: DataSection = DataSection()
    model: ModelSection = ModelSection()
    ssdp: SsdpLayers = SsdpLayers()
    optimizer: OptimizerSection = OptimizerSection()
    schedules: ScheduleSection = ScheduleSection()
    analysis: AnalysisSection = AnalysisSection()

    @field_validator("version")
    @classmethod
    def _known_version(cls, v):
        if v != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {v}")
        return v

    @field_validator("epochs")
    @classmethod
    def _epochs(cls, v):
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("batch_size")
    @classmethod
    def _batch(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v


def _wrap_validation(exc: ValidationError) -> ConfigError:
    err = exc.errors()[0]
    where = ".".join(str(p) for p in err["loc"])
    if err["type"] == "extra_forbidden":
        return ConfigError(f"unknown key {where!r}", where)
    return ConfigError(f"{where}: {err['msg']}", where)


def _check_runtime(cfg: RunConfig):
    """Build every library object once so their own checks run at load time."""
    for where, build in (
        ("model", neuron_params),
        ("model.surrogate", surrogate_params),
        ("schedules", lr_schedule),
        ("schedules", ssdp_schedule),
    ):
        try:
            build(cfg)
        except (ValueError, ArithmeticError) as exc:
            raise ConfigError(f"{where}: {exc}", where) from exc
    for layer in ("hidden", "readout"):
        section = getattr(cfg.ssdp, layer)
        if section is None:
            continue
        try:
            SsdpConfig(**section.model_dump())
        except ConfigError as exc:
            exc.field = f"ssdp.{layer}.{exc.field}"
            exc.args = (f"{exc.field}: {exc.args[0]}",)
            raise


def from_dict(tree) -> RunConfig:
    if not isinstance(tree, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        cfg = RunConfig.model_validate(tree)
    except ValidationError as exc:
        raise _wrap_validation(exc) from None
    _check_runtime(cfg)
    return cfg


def to_dict(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json")


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    return from_dict({} if tree is None else tree)


def dump_config(cfg: RunConfig, path=None) -> str:
    text = yaml.safe_dump(to_dict(cfg), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text


def canonical_json(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: RunConfig) -> str:
    """Git blob hash (sha1 of ``blob <len>\\0<bytes>``) of the canonical JSON."""
    body = canonical_json(cfg).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def component_seeds(seed: int) -> dict:
    children = np.random.SeedSequence(seed).spawn(len(SEED_COMPONENTS))
    return dict(zip(SEED_COMPONENTS, children))


def neuron_params(cfg: RunConfig) -> NeuronParams:
    m = cfg.model
    return NeuronParams(tau_m=m.tau_m, dt=m.dt, v_th=m.v_th, tau_n=m.tau_n_init, reset_mode=m.reset_mode)


def surrogate_params(cfg: RunConfig) -> SurrogateParams:
    return SurrogateParams(**cfg.model.surrogate.model_dump())


def ssdp_configs(cfg: RunConfig) -> dict:
    out = {}
    for layer in ("hidden", "readout"):
        section = getattr(cfg.ssdp, layer)
        out[layer] = SsdpConfig(**section.model_dump()) if cfg.ssdp.enabled and section else None
    return out


def lr_schedule(cfg: RunConfig) -> CosineSchedule:
    lr = cfg.optimizer.lr
    return CosineSchedule(lr, lr * cfg.schedules.lr_min_fraction, max(cfg.epochs, 1))


def ssdp_schedule(cfg: RunConfig) -> CosineSchedule:
    s = cfg.schedules
    return CosineSchedule(s.ssdp_max, s.ssdp_min, max(cfg.epochs, 1))
