"""Optimizer, training loop, and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor
from .dataio import Dataset
from .errors import ConfigurationError, ContractError
from .model import GraphPoolModel, cross_entropy

FULL_BATCH_LIMIT = 400
DEFAULT_MINI_BATCH = 16


class Adam:
    """Bias-corrected Adam over a named parameter dict, updating in place."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is None:
                raise ContractError(f"parameter {name!r} has no gradient")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = p.grad
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


@dataclass
class ClassCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0


@dataclass
class Metrics:
    accuracy: float
    mean_loss: float
    per_class: list[ClassCounts]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mean_loss": self.mean_loss,
            "per_class": [
                {"tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn} for c in self.per_class
            ],
        }


def confusion_counts(true_labels, predicted, num_classes: int) -> list[ClassCounts]:
    counts = [ClassCounts() for _ in range(num_classes)]
    total = len(true_labels)
    for k in range(num_classes):
        c = counts[k]
        for t, p in zip(true_labels, predicted):
            if t == k and p == k:
                c.tp += 1
            elif t == k:
                c.fn += 1
            elif p == k:
                c.fp += 1
        c.tn = total - c.tp - c.fn - c.fp
    return counts


def evaluate(model: GraphPoolModel, dataset: Dataset) -> Metrics:
    """Top-1 accuracy, mean cross-entropy, and per-class confusion counts."""
    true_labels = []
    predicted = []
    losses = []
    for sample in dataset.samples:
        probs = model.forward(sample, mode="eval")
        losses.append(float(cross_entropy(probs, sample.label).data))
        true_labels.append(sample.label)
        predicted.append(int(np.argmax(probs.data)))
    correct = sum(1 for t, p in zip(true_labels, predicted) if t == p)
    m = model.config.num_classes
    return Metrics(
        accuracy=correct / len(dataset.samples),
        mean_loss=float(np.mean(losses)),
        per_class=confusion_counts(true_labels, predicted, m),
    )


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    train_accuracy: float
    val_accuracy: float | None = None


@dataclass
class TrainLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_val_accuracy: float | None = None
    best_epoch: int | None = None


def resolve_batch_size(num_samples: int, batch_size: int | None) -> int:
    if batch_size is not None:
        if batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        return min(batch_size, num_samples)
    return num_samples if num_samples <= FULL_BATCH_LIMIT else DEFAULT_MINI_BATCH


def train_model(
    model: GraphPoolModel,
    train_set: Dataset,
    epochs: int,
    lr: float = 1e-4,
    batch_size: int | None = None,
    val_set: Dataset | None = None,
    rng: np.random.Generator | None = None,
    optimizer: Adam | None = None,
    on_best=None,
    stop_when=None,
) -> TrainLog:
    """Per-sample tapes with gradient accumulation over mini-batches.

    Deterministic for a fixed rng.  ``on_best(model, epoch, acc)`` fires when
    validation accuracy improves; ``stop_when(record)`` can end training early.
    """
    if train_set.meta.num_series != model.config.num_series or (
        train_set.meta.series_length != model.config.series_length
    ):
        raise ConfigurationError(
            f"dataset shape ({train_set.meta.num_series}, {train_set.meta.series_length})"
            f" does not match model ({model.config.num_series},"
            f" {model.config.series_length})"
        )
    if train_set.meta.classes != model.config.num_classes:
        raise ConfigurationError(
            f"dataset has {train_set.meta.classes} classes, model expects"
            f" {model.config.num_classes}"
        )
    rng = rng or np.random.default_rng(model.config.seed)
    opt = optimizer or Adam(model.parameters(), lr=lr)
    batch = resolve_batch_size(len(train_set), batch_size)
    log = TrainLog()
    samples = list(train_set.samples)
    for epoch in range(epochs):
        order = rng.permutation(len(samples))
        losses = []
        correct = 0
        for start in range(0, len(samples), batch):
            chunk = [samples[i] for i in order[start : start + batch]]
            opt.zero_grad()
            for sample in chunk:
                with Tape() as tape:
                    probs = model.forward(sample, mode="train")
                    loss = cross_entropy(probs, sample.label)
                tape.backward(loss)
                losses.append(float(loss.data))
                if int(np.argmax(probs.data)) == sample.label:
                    correct += 1
            inv = 1.0 / len(chunk)
            for p in opt.params.values():
                if p.grad is not None:
                    p.grad *= inv
            opt.step()
        record = EpochRecord(
            epoch=epoch,
            mean_loss=float(np.mean(losses)),
            train_accuracy=correct / len(samples),
        )
        if val_set is not None:
            record.val_accuracy = evaluate(model, val_set).accuracy
            if log.best_val_accuracy is None or record.val_accuracy > log.best_val_accuracy:
                log.best_val_accuracy = record.val_accuracy
                log.best_epoch = epoch
                if on_best is not None:
                    on_best(model, epoch, record.val_accuracy)
        log.epochs.append(record)
        if stop_when is not None and stop_when(record):
            break
    return log
