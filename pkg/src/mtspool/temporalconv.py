"""Multi-scale temporal node features.

Each variable's series is convolved with banks of kernels at several sizes;
per-channel activations are aggregated over time (mean by default) and
concatenated across kernel sizes, giving every node a fixed-width feature
vector regardless of series length.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError


class ConvBank:
    """One kernel/bias pair per kernel size, all trainable."""

    def __init__(
        self,
        kernel_sizes=(3, 5, 7),
        channels_per_size: int = 10,
        activation: str = "relu",
        aggregate: str = "mean",
        rng: np.random.Generator | None = None,
    ):
        if aggregate not in ("mean", "max"):
            raise ConfigurationError(f"aggregate must be 'mean' or 'max', got {aggregate!r}")
        if channels_per_size < 1 or any(ks < 1 for ks in kernel_sizes):
            raise ConfigurationError("kernel sizes and channel count must be >= 1")
        rng = rng or np.random.default_rng(0)
        self.kernel_sizes = tuple(kernel_sizes)
        self.channels_per_size = channels_per_size
        self.activation = activation
        self.aggregate = aggregate
        self.kernels = []
        self.biases = []
        for ks in self.kernel_sizes:
            bound = 1.0 / np.sqrt(ks)
            self.kernels.append(
                Tensor(rng.uniform(-bound, bound, (channels_per_size, ks)), requires_grad=True)
            )
            self.biases.append(Tensor(np.zeros(channels_per_size), requires_grad=True))

    @property
    def feature_dim(self) -> int:
        return self.channels_per_size * len(self.kernel_sizes)

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        for ks, k, b in zip(self.kernel_sizes, self.kernels, self.biases):
            params[f"conv.k{ks}.kernel"] = k
            params[f"conv.k{ks}.bias"] = b
        return params


def temporal_features(x: Tensor, bank: ConvBank) -> Tensor:
    """(n, T) series -> (n, d) multi-scale features, d = channels x sizes."""
    t_len = x.shape[1]
    too_long = [ks for ks in bank.kernel_sizes if ks > t_len]
    if too_long:
        raise ConfigurationError(
            f"kernel sizes {too_long} exceed series length {t_len}"
        )
    blocks = []
    for kernel, bias in zip(bank.kernels, bank.biases):
        conv = ad.elementwise(ad.conv1d_valid(x, kernel, bias), bank.activation)
        if bank.aggregate == "mean":
            blocks.append(ad.reduce_mean(conv, axis=2))
        else:
            blocks.append(ad.reduce_max(conv, axis=2))
    return ad.concat(blocks, axis=1)
