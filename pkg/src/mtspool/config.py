"""Run configuration: defaults, file parsing (INI-style sections or JSON),
and conversion to a model configuration.

File format: sections ``[data]``, ``[model]``, ``[train]``, ``[output]`` with
``key = value`` lines and ``#`` comments, or a JSON object with the same keys
flattened.  Unknown keys are rejected.  Command-line flags override file
values.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, fields

from .errors import ConfigurationError
from .model import ModelConfig

METRIC_ALIASES = {
    "euclid": "euclidean",
    "euclidean": "euclidean",
    "abs": "absolute",
    "absolute": "absolute",
    "dtw": "dtw",
}
ADJACENCY_ALIASES = {
    "dynamic": "dynamic",
    "all-one": "all_one",
    "all_one": "all_one",
    "corr": "correlation",
    "correlation": "correlation",
}


@dataclass
class RunConfig:
    """Everything a run needs.  Defaults are noted per field."""

    # [data]
    dataset_dir: str | None = None      # directory holding <name>_TRAIN/TEST.ts
    dataset_name: str | None = None     # dataset file stem
    synthetic: bool = False             # generate data instead of loading
    synth_classes: int = 3
    synth_variables: int = 4
    synth_length: int = 64
    synth_per_class: int = 30
    normalize: bool = False             # per-variable z-normalization
    # [model]
    metric: str = "euclidean"           # euclid | abs | dtw
    adjacency: str = "dynamic"          # dynamic | all-one | corr
    c1: float = 0.1                     # sparsification threshold
    similarity_transform: str = "identity"
    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    channels_per_size: int = 10
    temporal_agg: str = "mean"          # mean | max
    gnn_dims: tuple[int, ...] = (128,)
    heads: int = 2                      # centroid heads
    reduction: int = 2                  # cluster schedule factor
    pooling: str = "variational"        # variational | memory | mean
    renormalize_pooled_adjacency: bool = False
    classifier_hidden: int = 64
    # [train]
    epochs: int = 2000
    lr: float = 1e-4
    batch: int | None = None            # None: full batch up to 400 samples
    seed: int = 0
    val_fraction: float = 0.0           # held-out share of the train split
    # [output]
    out_dir: str = "out"

    def model_config(self, num_series: int, series_length: int, num_classes: int) -> ModelConfig:
        return ModelConfig(
            num_series=num_series,
            series_length=series_length,
            num_classes=num_classes,
            metric=METRIC_ALIASES[self.metric],
            adjacency=ADJACENCY_ALIASES[self.adjacency],
            c1=self.c1,
            similarity_transform=self.similarity_transform,
            kernel_sizes=self.kernel_sizes,
            channels_per_size=self.channels_per_size,
            temporal_agg=self.temporal_agg,
            gnn_dims=self.gnn_dims,
            heads=self.heads,
            reduction=self.reduction,
            pooling=self.pooling,
            renormalize_pooled_adjacency=self.renormalize_pooled_adjacency,
            classifier_hidden=self.classifier_hidden,
            seed=self.seed,
        )

    def validate(self) -> None:
        if self.metric not in METRIC_ALIASES:
            raise ConfigurationError(
                f"metric must be one of {sorted(set(METRIC_ALIASES))}, got {self.metric!r}"
            )
        if self.adjacency not in ADJACENCY_ALIASES:
            raise ConfigurationError(
                f"adjacency must be one of {sorted(set(ADJACENCY_ALIASES))},"
                f" got {self.adjacency!r}"
            )
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.lr <= 0:
            raise ConfigurationError("lr must be > 0")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigurationError("val_fraction must be in [0, 1)")
        if self.batch is not None and self.batch < 1:
            raise ConfigurationError("batch must be >= 1")
        if not self.synthetic and not self.dataset_dir:
            raise ConfigurationError("either synthetic data or a dataset_dir is required")
        if self.dataset_dir and not self.dataset_name:
            raise ConfigurationError("dataset_name is required with dataset_dir")

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d


_FIELD_SECTIONS = {
    "data": (
        "dataset_dir", "dataset_name", "synthetic", "synth_classes",
        "synth_variables", "synth_length", "synth_per_class", "normalize",
    ),
    "model": (
        "metric", "adjacency", "c1", "similarity_transform", "kernel_sizes",
        "channels_per_size", "temporal_agg", "gnn_dims", "heads", "reduction",
        "pooling", "renormalize_pooled_adjacency", "classifier_hidden",
    ),
    "train": ("epochs", "lr", "batch", "seed", "val_fraction"),
    "output": ("out_dir",),
}

_ALL_KEYS = {k for keys in _FIELD_SECTIONS.values() for k in keys}


def _convert(name: str, value):
    """Coerce a string (or JSON scalar) to the field's expected type."""
    if not isinstance(value, str):
        if name in ("kernel_sizes", "gnn_dims") and isinstance(value, list):
            return tuple(int(v) for v in value)
        return value
    text = value.strip()
    bool_fields = {"synthetic", "normalize", "renormalize_pooled_adjacency"}
    int_fields = {
        "synth_classes", "synth_variables", "synth_length", "synth_per_class",
        "channels_per_size", "heads", "reduction", "classifier_hidden",
        "epochs", "seed",
    }
    float_fields = {"c1", "lr", "val_fraction"}
    if name in bool_fields:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigurationError(f"{name} expects true/false, got {text!r}")
    if name in int_fields:
        try:
            return int(text)
        except ValueError:
            raise ConfigurationError(f"{name} expects an integer, got {text!r}") from None
    if name in float_fields:
        try:
            return float(text)
        except ValueError:
            raise ConfigurationError(f"{name} expects a number, got {text!r}") from None
    if name == "batch":
        if text.lower() in ("none", "auto", ""):
            return None
        try:
            return int(text)
        except ValueError:
            raise ConfigurationError(f"batch expects an integer or 'auto', got {text!r}") from None
    if name in ("kernel_sizes", "gnn_dims"):
        try:
            return tuple(int(tok) for tok in text.replace(",", " ").split())
        except ValueError:
            raise ConfigurationError(f"{name} expects integers, got {text!r}") from None
    return text


def _apply(config: RunConfig, items: dict) -> None:
    for key, value in items.items():
        if key not in _ALL_KEYS:
            raise ConfigurationError(f"unknown config key {key!r}")
        setattr(config, key, _convert(key, value))


def load_run_config(path) -> RunConfig:
    """Read a config file (JSON if it parses as JSON, else INI sections)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    config = RunConfig()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            items = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON config: {exc}") from None
        if not isinstance(items, dict):
            raise ConfigurationError("JSON config must be an object")
        _apply(config, items)
        return config
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"invalid config file: {exc}") from None
    for section in parser.sections():
        if section not in _FIELD_SECTIONS:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _FIELD_SECTIONS[section]:
                raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
            setattr(config, key, _convert(key, value))
    return config


def apply_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    """Apply non-None values (command-line flags) over the config."""
    _apply(config, {k: v for k, v in overrides.items() if v is not None})
    return config
