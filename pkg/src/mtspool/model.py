"""The full classification pipeline and its configuration.

One sample flows: adjacency from graphlearn, node features from temporalconv,
embeddings from the gnn stack, a single graph vector from pooling, then a
two-layer classifier head with a row softmax.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import BatchNormState, Tensor
from .dataio import TimeSeriesSample
from .errors import ConfigurationError, DimensionError
from .gnn import GnnStack, encode
from .graphlearn import (
    ADJACENCY_MODES,
    METRICS,
    SIMILARITY_TRANSFORMS,
    AdjacencyBuilder,
    GraphState,
)
from .pooling import PoolStack, pool_to_single_with_assignments
from .temporalconv import ConvBank, temporal_features

POOLING_KINDS = ("variational", "memory", "mean")
THRESHOLD_GRID = (0.05, 0.1, 0.2)
HEADS_GRID = (1, 2, 4)
REDUCTION_GRID = (2, 3, 6)

PROBABILITY_FLOOR = 1e-12


@dataclass
class ModelConfig:
    """Everything that shapes the model for one dataset."""

    num_series: int = 0
    series_length: int = 0
    num_classes: int = 0
    metric: str = "euclidean"
    adjacency: str = "dynamic"
    c1: float = 0.1
    similarity_transform: str = "identity"
    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    channels_per_size: int = 10
    temporal_agg: str = "mean"
    gnn_dims: tuple[int, ...] = (128,)
    heads: int = 2
    reduction: int = 2
    pooling: str = "variational"
    renormalize_pooled_adjacency: bool = False
    classifier_hidden: int = 64
    seed: int = 0

    def validate(self) -> None:
        if self.num_series < 1 or self.series_length < 1 or self.num_classes < 1:
            raise ConfigurationError(
                "num_series, series_length, and num_classes must be set and >= 1"
            )
        if self.metric not in METRICS:
            raise ConfigurationError(f"metric must be one of {METRICS}")
        if self.adjacency not in ADJACENCY_MODES:
            raise ConfigurationError(f"adjacency must be one of {ADJACENCY_MODES}")
        if self.similarity_transform not in SIMILARITY_TRANSFORMS:
            raise ConfigurationError(
                f"similarity_transform must be one of {SIMILARITY_TRANSFORMS}"
            )
        if self.pooling not in POOLING_KINDS:
            raise ConfigurationError(f"pooling must be one of {POOLING_KINDS}")
        if self.c1 < 0.0:
            raise ConfigurationError("c1 must be >= 0")
        if self.heads < 1:
            raise ConfigurationError("heads must be >= 1")
        if self.reduction < 2:
            raise ConfigurationError("reduction must be >= 2")
        if self.temporal_agg not in ("mean", "max"):
            raise ConfigurationError("temporal_agg must be 'mean' or 'max'")
        if not self.kernel_sizes or min(self.kernel_sizes) < 1:
            raise ConfigurationError("kernel_sizes must be a non-empty list of >= 1")
        if max(self.kernel_sizes) > self.series_length:
            raise ConfigurationError(
                f"kernel size {max(self.kernel_sizes)} exceeds series length"
                f" {self.series_length}"
            )
        if self.channels_per_size < 1 or self.classifier_hidden < 1:
            raise ConfigurationError("channel and hidden widths must be >= 1")
        if not self.gnn_dims:
            raise ConfigurationError("gnn_dims must name at least one layer width")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel_sizes"] = list(self.kernel_sizes)
        d["gnn_dims"] = list(self.gnn_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown model config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("kernel_sizes", "gnn_dims"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


class GraphPoolModel:
    """End-to-end model for one dataset shape (n variables, length T, M classes)."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        config.validate()
        self.config = config
        rng = rng or np.random.default_rng(config.seed)
        self.builder = AdjacencyBuilder(
            config.num_series,
            mode=config.adjacency,
            metric=config.metric,
            c1=config.c1,
            similarity_transform=config.similarity_transform,
            rng=rng,
        )
        self.bank = ConvBank(
            config.kernel_sizes,
            config.channels_per_size,
            aggregate=config.temporal_agg,
            rng=rng,
        )
        self.gnn = GnnStack(self.bank.feature_dim, config.gnn_dims, rng=rng)
        self.pool = PoolStack(
            config.num_series,
            self.gnn.d_out,
            kind=config.pooling,
            heads=config.heads,
            reduction=config.reduction,
            renormalize_adjacency=config.renormalize_pooled_adjacency,
            rng=rng,
        )
        d_final = self.pool.d_out
        hidden = config.classifier_hidden
        bound1 = np.sqrt(6.0 / (d_final + hidden))
        bound2 = np.sqrt(6.0 / (hidden + config.num_classes))
        self.w_cls1 = Tensor(rng.uniform(-bound1, bound1, (d_final, hidden)), requires_grad=True)
        self.b_cls1 = Tensor(np.zeros((1, hidden)), requires_grad=True)
        self.w_cls2 = Tensor(
            rng.uniform(-bound2, bound2, (hidden, config.num_classes)), requires_grad=True
        )
        self.b_cls2 = Tensor(np.zeros((1, config.num_classes)), requires_grad=True)

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        params.update(self.builder.parameters())
        params.update(self.bank.parameters())
        params.update(self.gnn.parameters())
        params.update(self.pool.parameters())
        params.update(
            {
                "classifier.w1": self.w_cls1,
                "classifier.b1": self.b_cls1,
                "classifier.w2": self.w_cls2,
                "classifier.b2": self.b_cls2,
            }
        )
        return params

    def norm_states(self) -> dict[str, BatchNormState]:
        return self.gnn.norm_states()

    def _check_sample(self, series: np.ndarray) -> None:
        n, t_len = series.shape
        if n != self.config.num_series or t_len != self.config.series_length:
            raise DimensionError(
                f"sample shape ({n}, {t_len}) does not match configured"
                f" ({self.config.num_series}, {self.config.series_length})"
            )

    def forward(self, sample: TimeSeriesSample | np.ndarray, mode: str = "train") -> Tensor:
        """Class probability row vector (1, M) for one sample."""
        probs, _ = self.forward_detail(sample, mode)
        return probs

    def forward_detail(self, sample, mode: str = "train"):
        """Probabilities plus the intermediate stages exports care about."""
        series = sample.series if isinstance(sample, TimeSeriesSample) else np.asarray(sample)
        self._check_sample(series)
        adjacency = self.builder.build(series)
        features = temporal_features(Tensor(series), self.bank)
        encoded = encode(GraphState(features, adjacency), self.gnn, mode)
        vector, assignments = pool_to_single_with_assignments(encoded, self.pool)
        hidden = ad.relu(ad.add(ad.matmul(vector, self.w_cls1), self.b_cls1))
        logits = ad.add(ad.matmul(hidden, self.w_cls2), self.b_cls2)
        probs = ad.softmax_rows(logits)
        detail = {
            "adjacency": adjacency,
            "embedding": vector,
            "assignments": assignments,
            "logits": logits,
        }
        return probs, detail

    def predict(self, sample) -> int:
        probs = self.forward(sample, mode="eval")
        return int(np.argmax(probs.data))


def cross_entropy(probs: Tensor, label: int) -> Tensor:
    """-log p[label] with a probability floor, as a scalar tensor."""
    m = probs.shape[1]
    if not 0 <= label < m:
        raise ConfigurationError(f"label {label} outside [0, {m})")
    onehot = np.zeros((1, m))
    onehot[0, label] = 1.0
    picked = ad.reduce_sum(ad.hadamard(probs, Tensor(onehot)))
    return ad.negate(ad.log(picked, floor=PROBABILITY_FLOOR))
