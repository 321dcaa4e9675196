"""Command-line front end.

Subcommands: ``train``, ``eval``, ``embed``, ``inspect-graph``, ``gen-synth``.
Exit codes: 0 success, 1 configuration error, 2 data error.  Output files are
written atomically; reruns with the same seed reproduce the same metrics JSON
except for ``wall_seconds``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .kernels import BACKEND as KERNEL_BACKEND
from .checkpoint import build_model, load_checkpoint, save_checkpoint
from .config import RunConfig, apply_overrides, load_run_config
from .dataio import (
    Dataset,
    load_dataset_dir,
    make_synthetic,
    save_ts,
    split_train_test,
    znormalize,
)
from .errors import ConfigurationError, ContractError, DimensionError, TsParseError
from .exports import export_adjacency, export_assignments, export_embeddings
from .model import GraphPoolModel, ModelConfig
from .train import evaluate, train_model

METRICS_SCHEMA = "mtspool-metrics-v1"


class DataError(Exception):
    """Problems with dataset files or dataset/model shape agreement."""


def _atomic_write_json(path, payload: dict) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_data(config: RunConfig) -> tuple[Dataset, Dataset]:
    """Train/test datasets per the run config, normalized if requested."""
    if config.synthetic:
        ds = make_synthetic(
            config.synth_classes,
            config.synth_variables,
            config.synth_length,
            config.synth_per_class,
            seed=config.seed,
        )
        train, test = split_train_test(ds)
    else:
        if not os.path.isdir(config.dataset_dir):
            raise DataError(f"dataset directory not found: {config.dataset_dir}")
        try:
            train, test = load_dataset_dir(config.dataset_dir, config.dataset_name)
        except FileNotFoundError as exc:
            raise DataError(f"dataset file not found: {exc.filename}") from None
        except TsParseError as exc:
            raise DataError(f"cannot parse dataset: {exc}") from None
    if config.normalize:
        train = znormalize(train)
        test = znormalize(test)
    return train, test


def _carve_validation(train: Dataset, fraction: float, rng) -> tuple[Dataset, Dataset | None]:
    if fraction <= 0.0:
        return train, None
    count = max(1, int(round(len(train) * fraction)))
    if count >= len(train):
        raise ConfigurationError("val_fraction leaves no training samples")
    order = rng.permutation(len(train))
    val_idx = set(order[:count].tolist())
    val = Dataset(train.meta, tuple(s for i, s in enumerate(train.samples) if i in val_idx))
    rest = Dataset(train.meta, tuple(s for i, s in enumerate(train.samples) if i not in val_idx))
    return rest, val


def run_train(config: RunConfig) -> dict:
    """Train per config; returns the metrics payload it also writes."""
    config.validate()
    started = time.perf_counter()
    train, test = load_data(config)
    meta = train.meta
    model_cfg = config.model_config(meta.num_series, meta.series_length, meta.classes)
    rng = np.random.default_rng(config.seed)
    model = GraphPoolModel(model_cfg, rng=rng)
    fit_set, val_set = _carve_validation(train, config.val_fraction, rng)
    os.makedirs(config.out_dir, exist_ok=True)
    best_path = os.path.join(config.out_dir, "best.ckpt")

    def on_best(m, epoch, acc):
        save_checkpoint(best_path, m, epoch=epoch, best_metric=acc)

    log = train_model(
        model,
        fit_set,
        epochs=config.epochs,
        lr=config.lr,
        batch_size=config.batch,
        val_set=val_set,
        rng=rng,
        on_best=on_best if val_set is not None else None,
    )
    train_metrics = evaluate(model, train)
    test_metrics = evaluate(model, test) if test.samples else None
    wall = time.perf_counter() - started
    payload = {
        "schema": METRICS_SCHEMA,
        "seed": config.seed,
        "epochs": config.epochs,
        "kernel_backend": KERNEL_BACKEND,
        "train_accuracy": train_metrics.accuracy,
        "train_loss": train_metrics.mean_loss,
        "test_accuracy": test_metrics.accuracy if test_metrics else None,
        "test_loss": test_metrics.mean_loss if test_metrics else None,
        "best_val_accuracy": log.best_val_accuracy,
        "final_train_loss": log.epochs[-1].mean_loss if log.epochs else None,
        "wall_seconds": wall,
        "config": config.to_dict(),
    }
    _atomic_write_json(os.path.join(config.out_dir, "metrics.json"), payload)
    save_checkpoint(
        os.path.join(config.out_dir, "model.ckpt"),
        model,
        epoch=config.epochs,
        best_metric=log.best_val_accuracy,
    )
    return payload


def _load_for_checkpoint(args, model_cfg: ModelConfig) -> tuple[Dataset, Dataset]:
    config = _config_from_args(args)
    train, test = load_data(config)
    meta = train.meta
    if (
        meta.num_series != model_cfg.num_series
        or meta.series_length != model_cfg.series_length
        or meta.classes != model_cfg.num_classes
    ):
        raise DataError(
            f"dataset shape (n={meta.num_series}, T={meta.series_length},"
            f" M={meta.classes}) does not match checkpoint"
            f" (n={model_cfg.num_series}, T={model_cfg.series_length},"
            f" M={model_cfg.num_classes})"
        )
    return train, test


def _restore(path) -> GraphPoolModel:
    if not os.path.exists(path):
        raise DataError(f"checkpoint not found: {path}")
    try:
        return build_model(load_checkpoint(path))
    except ContractError as exc:
        raise DataError(f"cannot restore checkpoint: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    payload = run_train(_config_from_args(args))
    print(json.dumps({k: payload[k] for k in ("train_accuracy", "test_accuracy")}))
    return 0


def cmd_eval(args) -> int:
    model = _restore(args.checkpoint)
    train, test = _load_for_checkpoint(args, model.config)
    target = test if args.split == "test" and test.samples else train
    metrics = evaluate(model, target)
    print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_embed(args) -> int:
    model = _restore(args.checkpoint)
    train, test = _load_for_checkpoint(args, model.config)
    target = test if args.split == "test" and test.samples else train
    out = args.out or "embeddings.csv"
    export_embeddings(model, target, out)
    print(out)
    return 0


def cmd_inspect_graph(args) -> int:
    model = _restore(args.checkpoint)
    train, test = _load_for_checkpoint(args, model.config)
    target = test if args.split == "test" and test.samples else train
    if not 0 <= args.index < len(target.samples):
        raise DataError(f"sample index {args.index} outside [0, {len(target.samples)})")
    sample = target.samples[args.index]
    out_dir = args.out or "graph"
    os.makedirs(out_dir, exist_ok=True)
    adj_path = os.path.join(out_dir, "adjacency.csv")
    export_adjacency(model, sample, adj_path)
    written = export_assignments(model, sample, out_dir)
    for path in [adj_path] + written:
        print(path)
    return 0


def cmd_gen_synth(args) -> int:
    config = _config_from_args(args)
    config.synthetic = True
    ds = make_synthetic(
        config.synth_classes,
        config.synth_variables,
        config.synth_length,
        config.synth_per_class,
        seed=config.seed,
    )
    train, test = split_train_test(ds)
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    name = args.name
    train_path = os.path.join(out_dir, f"{name}_TRAIN.ts")
    test_path = os.path.join(out_dir, f"{name}_TEST.ts")
    save_ts(Dataset(train.meta, train.samples), train_path)
    save_ts(Dataset(test.meta, test.samples), test_path)
    print(train_path)
    print(test_path)
    return 0


# ---------------------------------------------------------------------------
# argument handling


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file (INI sections or JSON)")
    parser.add_argument("--out", dest="out_dir", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, help="global RNG seed (default: 0)")
    parser.add_argument(
        "--normalize",
        action="store_const",
        const=True,
        help="z-normalize each variable (default: off)",
    )
    parser.add_argument("--epochs", type=int, help="training epochs (default: 2000)")
    parser.add_argument("--lr", type=float, help="learning rate (default: 1e-4)")
    parser.add_argument("--batch", type=int, help="mini-batch size (default: auto)")
    parser.add_argument(
        "--pooling",
        choices=["variational", "memory", "mean"],
        help="pooling kind (default: variational)",
    )
    parser.add_argument(
        "--adjacency",
        choices=["dynamic", "all-one", "corr"],
        help="adjacency mode (default: dynamic)",
    )
    parser.add_argument(
        "--metric",
        choices=["euclid", "abs", "dtw"],
        help="distance metric (default: euclid)",
    )
    parser.add_argument("--data-dir", dest="dataset_dir", help="directory with .ts files")
    parser.add_argument("--dataset", dest="dataset_name", help="dataset file stem")
    parser.add_argument(
        "--synthetic",
        action="store_const",
        const=True,
        help="use generated data (default: off)",
    )
    parser.add_argument("--classes", dest="synth_classes", type=int,
                        help="synthetic classes (default: 3)")
    parser.add_argument("--variables", dest="synth_variables", type=int,
                        help="synthetic variables (default: 4)")
    parser.add_argument("--length", dest="synth_length", type=int,
                        help="synthetic series length (default: 64)")
    parser.add_argument("--per-class", dest="synth_per_class", type=int,
                        help="synthetic samples per class (default: 30)")
    parser.add_argument("--heads", type=int, help="centroid heads (default: 2)")
    parser.add_argument("--reduction", type=int, help="cluster reduction factor (default: 2)")
    parser.add_argument("--c1", type=float, help="adjacency threshold (default: 0.1)")
    parser.add_argument("--val-fraction", dest="val_fraction", type=float,
                        help="held-out share of train (default: 0)")


_OVERRIDE_KEYS = (
    "out_dir", "seed", "normalize", "epochs", "lr", "batch", "pooling",
    "adjacency", "metric", "dataset_dir", "dataset_name", "synthetic",
    "synth_classes", "synth_variables", "synth_length", "synth_per_class",
    "heads", "reduction", "c1", "val_fraction",
)


def _config_from_args(args) -> RunConfig:
    config = load_run_config(args.config) if args.config else RunConfig()
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    return apply_overrides(config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtspool",
        description="Train and inspect graph-pooling time series classifiers.",
    )
    parser.add_argument("--version", action="version", version=f"mtspool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write metrics + checkpoint")
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint; prints metrics JSON")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("--split", choices=["train", "test"], default="test",
                        help="which split to score (default: test)")
    _add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_embed = sub.add_parser("embed", help="export graph-level embeddings as CSV")
    p_embed.add_argument("checkpoint")
    p_embed.add_argument("--split", choices=["train", "test"], default="test",
                         help="which split to embed (default: test)")
    p_embed.add_argument("--out-file", dest="out", help="CSV path (default: embeddings.csv)")
    _add_common(p_embed)
    p_embed.set_defaults(func=cmd_embed, out=None)

    p_graph = sub.add_parser(
        "inspect-graph", help="dump one sample's adjacency and cluster assignments"
    )
    p_graph.add_argument("checkpoint")
    p_graph.add_argument("--split", choices=["train", "test"], default="train",
                         help="which split the sample comes from (default: train)")
    p_graph.add_argument("--index", type=int, default=0, help="sample index (default: 0)")
    p_graph.add_argument("--out-dir", dest="out", help="output directory (default: graph)")
    _add_common(p_graph)
    p_graph.set_defaults(func=cmd_inspect_graph, out=None)

    p_synth = sub.add_parser("gen-synth", help="write a synthetic dataset as .ts files")
    p_synth.add_argument("--name", default="synthetic", help="dataset file stem")
    _add_common(p_synth)
    p_synth.set_defaults(func=cmd_gen_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, TsParseError, DimensionError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
