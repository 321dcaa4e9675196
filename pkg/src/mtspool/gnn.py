"""Message-passing encoder: stacked layers combining a self transform with a
weighted neighbor sum, followed by per-graph batch normalization."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import BatchNormState, Tensor
from .errors import DimensionError
from .graphlearn import GraphState


def _glorot(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-bound, bound, (d_in, d_out))


class GnnLayer:
    """One propagation step: z' = act(norm(Z W1 + A Z W2)).

    The neighbor sum is the matrix product A @ Z, so edge weights scale each
    neighbor's contribution.  Normalization runs over the node axis of the
    single graph being encoded; pass ``batch_norm=False`` to disable it.
    """

    def __init__(
        self,
        d_in: int,
        d_out: int,
        activation: str = "relu",
        batch_norm: bool = True,
        rng: np.random.Generator | None = None,
    ):
        rng = rng or np.random.default_rng(0)
        self.d_in = d_in
        self.d_out = d_out
        self.activation = activation
        self.w1 = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
        self.w2 = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
        self.norm = BatchNormState(d_out) if batch_norm else None

    def parameters(self) -> dict[str, Tensor]:
        params = {"w1": self.w1, "w2": self.w2}
        if self.norm is not None:
            params["gamma"] = self.norm.gamma
            params["beta"] = self.norm.beta
        return params


def kgnn_forward(state: GraphState, layer: GnnLayer, mode: str = "train") -> Tensor:
    z, a = state.features, state.adjacency
    if z.shape[1] != layer.d_in:
        raise DimensionError(
            f"feature width {z.shape[1]} does not match layer input {layer.d_in}"
        )
    pre = ad.add(ad.matmul(z, layer.w1), ad.matmul(ad.matmul(a, z), layer.w2))
    if layer.norm is not None:
        pre = ad.batch_norm(pre, layer.norm, mode)
    return ad.elementwise(pre, layer.activation)


class GnnStack:
    """Layers applied in order, threading one adjacency through all of them."""

    def __init__(
        self,
        d_in: int,
        dims=(128,),
        activation: str = "relu",
        batch_norm: bool = True,
        rng: np.random.Generator | None = None,
    ):
        rng = rng or np.random.default_rng(0)
        self.layers: list[GnnLayer] = []
        prev = d_in
        for d in dims:
            self.layers.append(GnnLayer(prev, d, activation, batch_norm, rng=rng))
            prev = d
        self.d_out = prev

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        for i, layer in enumerate(self.layers):
            for name, t in layer.parameters().items():
                params[f"gnn.{i}.{name}"] = t
        return params

    def norm_states(self) -> dict[str, BatchNormState]:
        return {
            f"gnn.{i}": layer.norm
            for i, layer in enumerate(self.layers)
            if layer.norm is not None
        }


def encode(state: GraphState, stack: GnnStack, mode: str = "train") -> GraphState:
    """Apply every layer, returning new features with the same adjacency."""
    z = state.features
    for layer in stack.layers:
        z = kgnn_forward(GraphState(z, state.adjacency), layer, mode)
    return GraphState(z, state.adjacency)
