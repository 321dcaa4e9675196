"""Dataset types, the ``.ts`` text format, normalization, and a synthetic
generator.

The ``.ts`` grammar accepted here: lines starting with ``#`` are comments;
header directives start with ``@`` (``@problemName``, ``@timeStamps``,
``@univariate``, ``@dimensions``, ``@equalLength``, ``@seriesLength``,
``@classLabel true <labels...>``); after ``@data``, each line is one record
with dimensions separated by ``:``, values within a dimension separated by
``,``, and the final ``:``-field holding the class label.  Only equal-length,
equally-sampled classification datasets are supported.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import TsParseError


@dataclass(frozen=True)
class TimeSeriesSample:
    """One multivariate series (n variables x T steps) with its class index."""

    series: np.ndarray
    label: int


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    train_size: int
    test_size: int
    num_series: int
    series_length: int
    classes: int
    label_names: tuple[str, ...]


@dataclass(frozen=True)
class Dataset:
    meta: DatasetMeta
    samples: tuple[TimeSeriesSample, ...]

    def __len__(self) -> int:
        return len(self.samples)


def split_train_test(dataset: Dataset) -> tuple[Dataset, Dataset]:
    """Split a dataset whose samples are train-then-test per its meta."""
    k = dataset.meta.train_size
    return (
        Dataset(dataset.meta, dataset.samples[:k]),
        Dataset(dataset.meta, dataset.samples[k:]),
    )


# ---------------------------------------------------------------------------
# .ts parsing


_TRUE = {"true", "1"}
_FALSE = {"false", "0"}


def _parse_bool(token: str, lineno: int) -> bool:
    t = token.lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise TsParseError(f"expected true/false, got {token!r}", lineno)


def parse_ts(text: str):
    """Parse ``.ts`` text into (samples, label_names, header).

    Returns samples as (series ndarray, label index) in file order, the label
    names in declaration order, and a dict of the declared header values.
    """
    header: dict = {}
    label_names: list[str] = []
    samples: list[TimeSeriesSample] = []
    in_data = False
    expected_dims: int | None = None
    expected_len: int | None = None
    equal_length = True

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not in_data and line.startswith("@"):
            parts = line.split()
            key = parts[0][1:].lower()
            args = parts[1:]
            if key == "data":
                if "classlabel" not in header:
                    raise TsParseError("@classLabel must be declared before @data", lineno)
                in_data = True
                continue
            if key == "problemname":
                header["problemname"] = args[0] if args else ""
            elif key == "timestamps":
                if _parse_bool(args[0], lineno):
                    raise TsParseError("timestamped series are not supported", lineno)
                header["timestamps"] = False
            elif key == "univariate":
                header["univariate"] = _parse_bool(args[0], lineno)
                if header["univariate"]:
                    expected_dims = expected_dims or 1
            elif key == "dimensions":
                try:
                    expected_dims = int(args[0])
                except (IndexError, ValueError):
                    raise TsParseError("@dimensions requires an integer", lineno) from None
                header["dimensions"] = expected_dims
            elif key == "equallength":
                equal_length = _parse_bool(args[0], lineno)
                if not equal_length:
                    raise TsParseError("unequal-length series are not supported", lineno)
                header["equallength"] = True
            elif key == "serieslength":
                try:
                    expected_len = int(args[0])
                except (IndexError, ValueError):
                    raise TsParseError("@seriesLength requires an integer", lineno) from None
                header["serieslength"] = expected_len
            elif key == "classlabel":
                if not args:
                    raise TsParseError("@classLabel requires true/false", lineno)
                if not _parse_bool(args[0], lineno):
                    raise TsParseError("datasets without class labels are not supported", lineno)
                label_names = list(args[1:])
                if not label_names:
                    raise TsParseError("@classLabel true requires label names", lineno)
                header["classlabel"] = tuple(label_names)
            else:
                # Unknown directives (e.g. @missing) are recorded, not fatal.
                header[key] = " ".join(args)
            continue
        if not in_data:
            raise TsParseError(f"unexpected content before @data: {line[:40]!r}", lineno)

        fields = line.split(":")
        if len(fields) < 2:
            raise TsParseError("record needs at least one dimension and a label", lineno)
        label_str = fields[-1].strip()
        if label_str not in label_names:
            raise TsParseError(f"unknown label {label_str!r}", lineno)
        dims = []
        for field in fields[:-1]:
            values = []
            for tok in field.split(","):
                tok = tok.strip()
                try:
                    values.append(float(tok))
                except ValueError:
                    raise TsParseError(f"non-numeric value {tok!r}", lineno) from None
            dims.append(values)
        if expected_dims is not None and len(dims) != expected_dims:
            raise TsParseError(
                f"expected {expected_dims} dimensions, got {len(dims)}", lineno
            )
        lengths = {len(d) for d in dims}
        if len(lengths) != 1:
            raise TsParseError(f"ragged dimension lengths {sorted(lengths)}", lineno)
        (t_len,) = lengths
        if expected_len is not None and t_len != expected_len:
            raise TsParseError(
                f"series length mismatch: declared {expected_len}, got {t_len}", lineno
            )
        if equal_length and samples and samples[0].series.shape[1] != t_len:
            raise TsParseError(
                f"series length mismatch: first record has {samples[0].series.shape[1]},"
                f" got {t_len}",
                lineno,
            )
        if expected_dims is None:
            expected_dims = len(dims)
        series = np.array(dims, dtype=np.float64)
        samples.append(TimeSeriesSample(series, label_names.index(label_str)))

    if not in_data:
        raise TsParseError("missing @data section")
    if not samples:
        raise TsParseError("empty @data section")
    return samples, tuple(label_names), header


def dataset_from_ts(text: str, name: str | None = None) -> Dataset:
    """Parse one ``.ts`` file into a Dataset (all samples as the train side)."""
    samples, label_names, header = parse_ts(text)
    n, t_len = samples[0].series.shape
    meta = DatasetMeta(
        name=name or header.get("problemname", "unnamed"),
        train_size=len(samples),
        test_size=0,
        num_series=n,
        series_length=t_len,
        classes=len(label_names),
        label_names=label_names,
    )
    return Dataset(meta, tuple(samples))


def load_ts_file(path, name: str | None = None) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return dataset_from_ts(fh.read(), name=name)


def load_dataset_dir(directory, name: str) -> tuple[Dataset, Dataset]:
    """Load <name>_TRAIN.ts and <name>_TEST.ts from a directory."""
    import os

    train = load_ts_file(os.path.join(directory, f"{name}_TRAIN.ts"), name=name)
    test = load_ts_file(os.path.join(directory, f"{name}_TEST.ts"), name=name)
    if train.meta.label_names != test.meta.label_names:
        raise TsParseError(f"train/test label sets differ for {name}")
    meta = replace(train.meta, test_size=len(test.samples))
    return Dataset(meta, train.samples), Dataset(meta, test.samples)


def write_ts(dataset: Dataset) -> str:
    """Serialize a dataset back to ``.ts`` text.

    Values are written with ``repr`` so a parse -> write -> parse round trip
    reproduces every float bit-exactly.
    """
    meta = dataset.meta
    out = io.StringIO()
    out.write(f"@problemName {meta.name}\n")
    out.write("@timeStamps false\n")
    out.write(f"@univariate {'true' if meta.num_series == 1 else 'false'}\n")
    out.write(f"@dimensions {meta.num_series}\n")
    out.write("@equalLength true\n")
    out.write(f"@seriesLength {meta.series_length}\n")
    out.write(f"@classLabel true {' '.join(meta.label_names)}\n")
    out.write("@data\n")
    for sample in dataset.samples:
        dims = ":".join(",".join(repr(float(v)) for v in row) for row in sample.series)
        out.write(f"{dims}:{meta.label_names[sample.label]}\n")
    return out.getvalue()


def save_ts(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_ts(dataset))


# ---------------------------------------------------------------------------
# normalization


def znormalize(dataset: Dataset) -> Dataset:
    """Standardize each variable of each sample to mean 0, population std 1.

    Constant series become all-zero.
    """
    normalized = []
    for sample in dataset.samples:
        x = sample.series
        mean = x.mean(axis=1, keepdims=True)
        std = x.std(axis=1, keepdims=True)
        safe = np.where(std == 0.0, 1.0, std)
        z = np.where(std == 0.0, 0.0, (x - mean) / safe)
        normalized.append(TimeSeriesSample(z, sample.label))
    return Dataset(dataset.meta, tuple(normalized))


# ---------------------------------------------------------------------------
# synthetic data


def make_synthetic(
    num_classes: int,
    num_series: int,
    series_length: int,
    samples_per_class: int,
    seed: int,
    test_samples_per_class: int | None = None,
) -> Dataset:
    """Deterministic synthetic dataset: class-dependent sinusoid frequencies
    plus cross-variable coupling and low noise.

    Samples are ordered train-then-test (``split_train_test`` separates them);
    the test side has the same per-class count unless overridden.
    """
    if min(num_classes, num_series, series_length, samples_per_class) < 1:
        raise ValueError("all synthetic dataset counts must be >= 1")
    if test_samples_per_class is None:
        test_samples_per_class = samples_per_class
    rng = np.random.default_rng(seed)
    t = np.arange(series_length) / series_length
    label_names = tuple(f"c{k}" for k in range(num_classes))

    def gen_split(per_class):
        samples = []
        for k in range(num_classes):
            freq = k + 1.0
            coupling = 0.8 * k / max(num_classes - 1, 1)
            for _ in range(per_class):
                jitter = rng.normal(0.0, 0.1)
                base = np.stack(
                    [
                        np.sin(2.0 * np.pi * freq * t + v * np.pi / 4.0 + jitter)
                        for v in range(num_series)
                    ]
                )
                coupled = base + coupling * np.roll(base, 1, axis=0)
                noisy = coupled + rng.normal(0.0, 0.1, coupled.shape)
                samples.append(TimeSeriesSample(noisy, k))
        return samples

    train = gen_split(samples_per_class)
    test = gen_split(test_samples_per_class)
    meta = DatasetMeta(
        name="synthetic",
        train_size=len(train),
        test_size=len(test),
        num_series=num_series,
        series_length=series_length,
        classes=num_classes,
        label_names=label_names,
    )
    return Dataset(meta, tuple(train + test))


def nearest_centroid_accuracy(dataset: Dataset) -> float:
    """Accuracy of a nearest-centroid rule on flattened series.

    Independent sanity oracle for generated data: centroids come from the
    train split, accuracy is measured on the test split.
    """
    train, test = split_train_test(dataset)
    if not test.samples:
        train = test = dataset
    m = dataset.meta.classes
    centroids = []
    for k in range(m):
        members = [s.series.ravel() for s in train.samples if s.label == k]
        centroids.append(np.mean(members, axis=0))
    centroids = np.stack(centroids)
    correct = 0
    for s in test.samples:
        d = np.linalg.norm(centroids - s.series.ravel(), axis=1)
        if int(np.argmin(d)) == s.label:
            correct += 1
    return correct / len(test.samples)
