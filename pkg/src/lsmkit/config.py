"""Experiment configuration: one versioned YAML file drives everything.

Defaults reproduce the stock reservoir set-up (10x10x10 grid, 512-wide
input layer, 50-step encoding windows, 500 training epochs). Cross-field
consistency is checked here so the pipeline can assume a sane config:
the encoding window must be divisible by the readout averaging window,
the dataset feature width must match the reservoir input width, and the
semantic mask only applies to the fixed 3-class staged labelling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .encoding import EncoderConfig
from .errors import ConfigError, ValidationError
from .lif import LifParams
from .topology import BuildConfig

__all__ = ["ReadoutSettings", "DatasetSpec", "ExperimentConfig",
           "load_config", "default_config_yaml", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ReadoutSettings:
    w: int = 50            # raster steps averaged per cube channel
    c_out: int = 64
    kernel: int = 3
    dropout: float = 0.5
    lr: float = 0.2
    halve_every: int = 100
    epochs: int = 500
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.w < 1 or self.c_out < 1 or self.kernel < 1:
            raise ValidationError("w, c_out and kernel must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.halve_every < 1:
            raise ValidationError("bad training schedule")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must lie in [0, 1)")


@dataclass(frozen=True)
class DatasetSpec:
    task: str = "staged"
    n_train: int = 100
    n_test: int = 50
    n_steps: int = 8
    n_classes: int = 3
    noise: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("patterns", "staged"):
            raise ValidationError(f"unknown task {self.task!r}")
        if self.n_train < 1 or self.n_test < 0 or self.n_steps < 1:
            raise ValidationError("dataset sizes must be positive")
        if self.n_classes < 2:
            raise ValidationError("need at least two classes")


@dataclass(frozen=True)
class ExperimentConfig:
    reservoir: BuildConfig = field(default_factory=BuildConfig)
    neuron: LifParams = field(default_factory=LifParams)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    readout: ReadoutSettings = field(default_factory=ReadoutSettings)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    mask: bool = True

    def __post_init__(self):
        if self.encoder.window % self.readout.w != 0:
            raise ValidationError(
                f"readout.w ({self.readout.w}) must divide encoder.window "
                f"({self.encoder.window})"
            )
        if min(self.reservoir.dims) < self.readout.kernel:
            raise ValidationError(
                f"readout.kernel ({self.readout.kernel}) does not fit the "
                f"reservoir dims {self.reservoir.dims}"
            )
        if self.mask and self.dataset.n_classes != 3:
            raise ValidationError("the semantic mask is defined for exactly 3 classes")
        if self.dataset.task == "staged" and self.dataset.n_classes != 3:
            raise ValidationError("the staged task is a fixed 3-class problem")

    @property
    def cube_channels(self) -> int:
        return self.encoder.window // self.readout.w

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "reservoir": self.reservoir.to_dict(),
            "neuron": {
                "v_th": self.neuron.v_th,
                "v_rest": self.neuron.v_rest,
                "v_spike": self.neuron.v_spike,
                "tau_m": self.neuron.tau_m,
                "r_m": self.neuron.r_m,
                "tau_ref": self.neuron.tau_ref,
                "dt": self.neuron.dt,
            },
            "encoder": {"window": self.encoder.window, "seed": self.encoder.seed},
            "readout": {
                "w": self.readout.w,
                "c_out": self.readout.c_out,
                "kernel": self.readout.kernel,
                "dropout": self.readout.dropout,
                "lr": self.readout.lr,
                "halve_every": self.readout.halve_every,
                "epochs": self.readout.epochs,
                "batch_size": self.readout.batch_size,
                "seed": self.readout.seed,
            },
            "dataset": {
                "task": self.dataset.task,
                "n_train": self.dataset.n_train,
                "n_test": self.dataset.n_test,
                "n_steps": self.dataset.n_steps,
                "n_classes": self.dataset.n_classes,
                "noise": self.dataset.noise,
                "seed": self.dataset.seed,
            },
            "mask": self.mask,
        }


_SECTION_TYPES = {
    "reservoir": BuildConfig,
    "neuron": LifParams,
    "encoder": EncoderConfig,
    "readout": ReadoutSettings,
    "dataset": DatasetSpec,
}


def _build_section(name: str, cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    allowed = set(cls.__dataclass_fields__)
    if name == "encoder":
        allowed -= {"rate_scale"}  # not expressible in YAML
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {sorted(unknown)}")
    if name == "reservoir":
        data = dict(data)
        for key in ("dims", "c_table", "w_table"):
            if key in data:
                data[key] = tuple(data[key])
    try:
        return cls(**data)
    except ValidationError as err:
        raise ConfigError(f"in section '{name}': {err}") from err


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a mapping")
    raw = dict(raw)
    version = raw.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}, expected {SCHEMA_VERSION}")
    mask = raw.pop("mask", True)
    if not isinstance(mask, bool):
        raise ConfigError("'mask' must be a boolean")
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        sections[name] = _build_section(name, cls, raw.pop(name, {}))
    if raw:
        raise ConfigError(f"unknown top-level key(s): {sorted(raw)}")
    try:
        return ExperimentConfig(mask=mask, **sections)
    except ValidationError as err:
        raise ConfigError(str(err)) from err


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from err
    if raw is None:
        raw = {}
    return config_from_dict(raw)


def default_config_yaml() -> str:
    """The stock configuration, serialized (useful as a starting point)."""
    return yaml.safe_dump(ExperimentConfig().to_dict(), sort_keys=False)
