"""Hierarchical graph coarsening down to a single node.

The main path generates cluster centroids from the input graph itself with an
encoder-decoder: a permutation-invariant attention readout compresses the
node embeddings to one vector, and a perceptron decodes that vector into h
heads of centroids.  Node-to-cluster assignments are row-normalized cosine
similarities between centroids and node embeddings, mixed across heads by a
trainable weight vector.  Two ablation baselines share the same transform: a
memory variant whose centroids are free parameters independent of the input,
and a plain column-mean readout.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError, DimensionError
from .graphlearn import GraphState


def _glorot(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-bound, bound, (d_in, d_out))


def cluster_schedule(num_nodes: int, reduction: int) -> list[int]:
    """Cluster counts per layer: repeated ceiling division by the reduction
    factor, ending at exactly one node."""
    if num_nodes < 1 or reduction < 2:
        raise ConfigurationError(
            f"need num_nodes >= 1 and reduction >= 2, got {num_nodes}, {reduction}"
        )
    schedule = []
    n = num_nodes
    while n > 1:
        n = -(-n // reduction)
        schedule.append(n)
    return schedule or [1]


def encode_graph_vector(z: Tensor, w_avg: Tensor) -> Tensor:
    """Order-free attention readout of node embeddings to one row vector.

    x_avg = tanh(mean-of-rows(Z) @ W_avg); each node contributes its
    embedding scaled by sigmoid(<z_i, x_avg>).
    """
    x_avg = ad.tanh(ad.matmul(ad.reduce_mean(z, axis=0, keepdims=True), w_avg))
    scores = ad.sigmoid(ad.matmul(z, ad.transpose(x_avg)))
    return ad.matmul(ad.transpose(scores), z)


class VariationalPoolLayer:
    """Input-conditioned centroids via the encoder-decoder path."""

    kind = "variational"

    def __init__(
        self,
        d_in: int,
        n_pool: int,
        heads: int = 1,
        d_out: int | None = None,
        activation: str = "relu",
        rng: np.random.Generator | None = None,
    ):
        if heads < 1 or n_pool < 1:
            raise ConfigurationError(f"heads and n_pool must be >= 1, got {heads}, {n_pool}")
        rng = rng or np.random.default_rng(0)
        d_out = d_in if d_out is None else d_out
        self.d_in = d_in
        self.d_out = d_out
        self.n_pool = n_pool
        self.heads = heads
        self.activation = activation
        self.w_avg = Tensor(_glorot(rng, d_in, d_in), requires_grad=True)
        self.w_dec1 = Tensor(_glorot(rng, d_in, d_in), requires_grad=True)
        self.b_dec1 = Tensor(np.zeros((1, d_in)), requires_grad=True)
        out_width = heads * n_pool * d_in
        self.w_dec2 = Tensor(_glorot(rng, d_in, out_width), requires_grad=True)
        self.b_dec2 = Tensor(np.zeros((1, out_width)), requires_grad=True)
        self.w_pool = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
        self.phi = Tensor(np.full(heads, 1.0 / heads), requires_grad=True)

    def parameters(self) -> dict[str, Tensor]:
        return {
            "w_avg": self.w_avg,
            "w_dec1": self.w_dec1,
            "b_dec1": self.b_dec1,
            "w_dec2": self.w_dec2,
            "b_dec2": self.b_dec2,
            "w_pool": self.w_pool,
            "phi": self.phi,
        }

    def centroids(self, z: Tensor) -> Tensor:
        return decode_centroids(encode_graph_vector(z, self.w_avg), self)


class MemoryPoolLayer:
    """Ablation baseline: centroids are free parameters, fixed across inputs."""

    kind = "memory"

    def __init__(
        self,
        d_in: int,
        n_pool: int,
        heads: int = 1,
        d_out: int | None = None,
        activation: str = "relu",
        rng: np.random.Generator | None = None,
    ):
        if heads < 1 or n_pool < 1:
            raise ConfigurationError(f"heads and n_pool must be >= 1, got {heads}, {n_pool}")
        rng = rng or np.random.default_rng(0)
        d_out = d_in if d_out is None else d_out
        self.d_in = d_in
        self.d_out = d_out
        self.n_pool = n_pool
        self.heads = heads
        self.activation = activation
        self.keys = Tensor(
            rng.standard_normal((heads, n_pool, d_in)) / np.sqrt(d_in),
            requires_grad=True,
        )
        self.w_pool = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
        self.phi = Tensor(np.full(heads, 1.0 / heads), requires_grad=True)

    def parameters(self) -> dict[str, Tensor]:
        return {"keys": self.keys, "w_pool": self.w_pool, "phi": self.phi}

    def centroids(self, z: Tensor) -> Tensor:
        return self.keys


def decode_centroids(x_g: Tensor, layer: VariationalPoolLayer) -> Tensor:
    """Perceptron from the graph vector to an (h, n_pool, d) centroid stack."""
    hidden = ad.tanh(ad.add(ad.matmul(x_g, layer.w_dec1), layer.b_dec1))
    flat = ad.add(ad.matmul(hidden, layer.w_dec2), layer.b_dec2)
    return ad.reshape(flat, (layer.heads, layer.n_pool, layer.d_in))


def assignment_matrix(centroids: Tensor, z: Tensor, phi: Tensor) -> Tensor:
    """Mix per-head row-normalized cosine similarities into one assignment.

    centroids: (h, n_pool, d); z: (n, d); phi: (h,) -> (n_pool, n)
    """
    h, n_pool, d = centroids.shape
    if d != z.shape[1]:
        raise DimensionError(
            f"centroid width {d} does not match embedding width {z.shape[1]}"
        )
    flat = ad.reshape(centroids, (h * n_pool, d))
    per_head = ad.row_normalize(ad.cosine_rows(flat, z))
    stacked = ad.reshape(per_head, (h, n_pool, z.shape[0]))
    weighted = ad.hadamard(stacked, ad.reshape(phi, (h, 1, 1)))
    return ad.reduce_sum(weighted, axis=0)


def pool_once(
    state: GraphState, layer, renormalize_adjacency: bool = False
) -> GraphState:
    pooled, _ = pool_once_with_assignment(state, layer, renormalize_adjacency)
    return pooled


def pool_once_with_assignment(
    state: GraphState, layer, renormalize_adjacency: bool = False
) -> tuple[GraphState, Tensor]:
    """One coarsening step; also returns the assignment matrix used."""
    z, a = state.features, state.adjacency
    if z.shape[1] != layer.d_in:
        raise DimensionError(
            f"feature width {z.shape[1]} does not match layer input {layer.d_in}"
        )
    s = assignment_matrix(layer.centroids(z), z, layer.phi)
    x_pool = ad.elementwise(ad.matmul(ad.matmul(s, z), layer.w_pool), layer.activation)
    a_pool = ad.elementwise(
        ad.matmul(ad.matmul(s, a), ad.transpose(s)), layer.activation
    )
    if renormalize_adjacency:
        a_pool = ad.row_normalize(a_pool)
    return GraphState(x_pool, a_pool), s


def mean_pool(state: GraphState) -> Tensor:
    """Column mean of node features: the floor baseline readout."""
    return ad.reduce_mean(state.features, axis=0, keepdims=True)


class PoolStack:
    """Pooling layers following the cluster schedule down to one node."""

    def __init__(
        self,
        num_nodes: int,
        d_in: int,
        kind: str = "variational",
        heads: int = 1,
        reduction: int = 2,
        d_out: int | None = None,
        renormalize_adjacency: bool = False,
        rng: np.random.Generator | None = None,
    ):
        if kind not in ("variational", "memory", "mean"):
            raise ConfigurationError(f"unknown pooling kind {kind!r}")
        rng = rng or np.random.default_rng(0)
        self.kind = kind
        self.d_in = d_in
        self.renormalize_adjacency = renormalize_adjacency
        self.layers: list = []
        if kind == "mean":
            self.d_out = d_in
            self.schedule = []
            return
        cls = VariationalPoolLayer if kind == "variational" else MemoryPoolLayer
        self.schedule = cluster_schedule(num_nodes, reduction)
        d_out = d_in if d_out is None else d_out
        for n_pool in self.schedule:
            self.layers.append(cls(d_in, n_pool, heads, d_out, rng=rng))
            d_in = d_out
        self.d_out = d_out

    def parameters(self) -> dict[str, Tensor]:
        params = {}
        for i, layer in enumerate(self.layers):
            for name, t in layer.parameters().items():
                params[f"pool.{i}.{name}"] = t
        return params


def pool_to_single(state: GraphState, stack: PoolStack) -> Tensor:
    vec, _ = pool_to_single_with_assignments(state, stack)
    return vec


def pool_to_single_with_assignments(
    state: GraphState, stack: PoolStack
) -> tuple[Tensor, list[Tensor]]:
    """Run the whole stack; returns the final 1 x d vector and the per-layer
    assignment matrices (empty for mean pooling)."""
    if stack.kind == "mean":
        return mean_pool(state), []
    assignments = []
    for layer in stack.layers:
        state, s = pool_once_with_assignment(state, layer, stack.renormalize_adjacency)
        assignments.append(s)
    if state.features.shape[0] != 1:
        raise DimensionError(
            f"pool stack ended with {state.features.shape[0]} nodes, expected 1"
        )
    return state.features, assignments
