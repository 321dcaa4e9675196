"""Build per-sample adjacency matrices from raw series.

Three modes: a dynamic learned adjacency (similarity softmax times a
trainable mixing matrix, thresholded and row-normalized), an all-one
baseline, and an absolute-Pearson-correlation baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .errors import ConfigurationError

METRICS = ("euclidean", "absolute", "dtw")
ADJACENCY_MODES = ("dynamic", "all_one", "correlation")
SIMILARITY_TRANSFORMS = ("identity", "sqrt", "log1p")

# Exact DTW up to this length; longer series use a Sakoe-Chiba band of T/10.
DTW_EXACT_MAX_LEN = 512


@dataclass
class GraphState:
    """Node features paired with the adjacency they were built with."""

    features: Tensor
    adjacency: Tensor

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]


def _dtw_window(t_len: int) -> int:
    return -1 if t_len <= DTW_EXACT_MAX_LEN else max(1, t_len // 10)


def pairwise_distance(x: np.ndarray, metric: str) -> np.ndarray:
    """Symmetric nonnegative distance matrix between the rows of x."""
    if metric not in METRICS:
        raise ConfigurationError(f"unknown distance metric {metric!r}")
    n, t_len = x.shape
    d = np.zeros((n, n))
    if metric == "euclidean":
        for i in range(n):
            d[i] = np.sqrt(((x - x[i]) ** 2).sum(axis=1))
    elif metric == "absolute":
        for i in range(n):
            d[i] = np.abs(x - x[i]).sum(axis=1)
    else:
        window = _dtw_window(t_len)
        for i in range(n):
            for j in range(i + 1, n):
                d[i, j] = d[j, i] = kernels.dtw_distance(x[i], x[j], window)
    np.fill_diagonal(d, 0.0)
    return d


def _row_softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def similarity_matrix(
    x: np.ndarray, metric: str, transform: str = "identity"
) -> np.ndarray:
    """Row-stochastic similarity: softmax over negated distances."""
    d = pairwise_distance(x, metric)
    if transform == "identity":
        pass
    elif transform == "sqrt":
        d = np.sqrt(d)
    elif transform == "log1p":
        d = np.log1p(d)
    else:
        raise ConfigurationError(f"unknown similarity transform {transform!r}")
    return _row_softmax(-d)


def dynamic_adjacency(
    similarity: Tensor, w_adj: Tensor, c1: float, activation: str = "relu"
) -> Tensor:
    """activation(C @ W_adj), entries below c1 zeroed, then row-normalized.

    The threshold acts as a mask fixed per forward pass: gradients flow only
    through surviving entries.
    """
    raw = ad.elementwise(ad.matmul(similarity, w_adj), activation)
    mask = Tensor((raw.data >= c1).astype(np.float64))
    return ad.row_normalize(ad.hadamard(raw, mask))


def static_adjacency(x: np.ndarray, mode: str, c1: float = 0.0) -> np.ndarray:
    """Input-independent baselines: every-entry-1/n, or thresholded
    row-normalized absolute Pearson correlation."""
    n = x.shape[0]
    if mode == "all_one":
        return np.full((n, n), 1.0 / n)
    if mode != "correlation":
        raise ConfigurationError(f"unknown static adjacency mode {mode!r}")
    centered = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered**2).sum(axis=1))
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = centered / safe[:, None]
    corr = np.abs(unit @ unit.T)
    corr[norms == 0.0, :] = 0.0
    corr[:, norms == 0.0] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr[corr < c1] = 0.0
    sums = corr.sum(axis=1, keepdims=True)
    return np.where(sums == 0.0, corr, corr / np.where(sums == 0.0, 1.0, sums))


class AdjacencyBuilder:
    """Holds the adjacency mode, metric, threshold, and (in dynamic mode) the
    trainable mixing matrix; caches input-only computations per sample."""

    def __init__(
        self,
        num_series: int,
        mode: str = "dynamic",
        metric: str = "euclidean",
        c1: float = 0.1,
        activation: str = "relu",
        similarity_transform: str = "identity",
        rng: np.random.Generator | None = None,
    ):
        if mode not in ADJACENCY_MODES:
            raise ConfigurationError(f"unknown adjacency mode {mode!r}")
        if metric not in METRICS:
            raise ConfigurationError(f"unknown distance metric {metric!r}")
        if c1 < 0.0:
            raise ConfigurationError(f"threshold c1 must be >= 0, got {c1}")
        self.mode = mode
        self.metric = metric
        self.c1 = c1
        self.activation = activation
        self.similarity_transform = similarity_transform
        self.num_series = num_series
        self.w_adj: Tensor | None = None
        if mode == "dynamic":
            rng = rng or np.random.default_rng(0)
            init = np.eye(num_series) + rng.uniform(-0.01, 0.01, (num_series, num_series))
            self.w_adj = Tensor(init, requires_grad=True)
        self._cache: dict[bytes, np.ndarray] = {}

    def parameters(self) -> dict[str, Tensor]:
        if self.mode == "dynamic":
            return {"adjacency.w_adj": self.w_adj}
        return {}

    def _cached(self, x: np.ndarray) -> np.ndarray:
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            if self.mode == "dynamic":
                hit = similarity_matrix(x, self.metric, self.similarity_transform)
            else:
                hit = static_adjacency(x, self.mode, self.c1)
            self._cache[key] = hit
        return hit

    def build(self, x: np.ndarray) -> Tensor:
        """Adjacency for one sample; differentiable only in dynamic mode."""
        if x.shape[0] != self.num_series:
            raise ConfigurationError(
                f"sample has {x.shape[0]} variables, builder expects {self.num_series}"
            )
        cached = self._cached(x)
        if self.mode == "dynamic":
            return dynamic_adjacency(Tensor(cached), self.w_adj, self.c1, self.activation)
        return Tensor(cached)
