"""Small model zoo: logistic/linear heads, MLPs and a bare quadratic bowl.

Parameters always travel as one flat float64 vector. Each weight layer is
stored as ``n_out * n_in`` weights in row-major order (one row per output
neuron) followed by ``n_out`` biases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigError, ShapeError

KINDS = ("logistic", "mlp", "quadratic")
ACTIVATIONS = ("tanh", "relu")
LOSSES = ("cross_entropy", "half_mse")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "mlp"
    layer_sizes: tuple = (2, 16, 2)
    activation: str = "tanh"
    loss: str = "cross_entropy"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")
        if any(n < 1 for n in self.layer_sizes):
            raise ConfigError("layer sizes must be positive")
        if self.kind == "quadratic":
            if len(self.layer_sizes) != 1:
                raise ConfigError("quadratic model takes a single size (the dimension)")
            return
        if len(self.layer_sizes) < 2:
            raise ConfigError("layer_sizes needs at least input and output sizes")
        if self.kind == "logistic" and len(self.layer_sizes) != 2:
            raise ConfigError("logistic model has exactly one weight layer")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_classes(self) -> int:
        """Number of valid class labels for a cross-entropy head."""
        return max(2, self.n_outputs)

    def layers(self) -> list[tuple[int, int]]:
        """(n_in, n_out) for every weight layer."""
        s = self.layer_sizes
        return list(zip(s[:-1], s[1:]))


def param_count(spec: ModelSpec) -> int:
    if spec.kind == "quadratic":
        return spec.layer_sizes[0]
    return sum(n_in * n_out + n_out for n_in, n_out in spec.layers())


@dataclass(frozen=True)
class LayerSlot:
    offset: int
    rows: int
    cols: int

    @property
    def size(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class ParamLayout:
    """Where each weight matrix and bias vector lives inside the flat vector."""

    weights: tuple
    biases: tuple
    size: int

    @classmethod
    def of(cls, spec: ModelSpec) -> "ParamLayout":
        if spec.kind == "quadratic":
            d = spec.layer_sizes[0]
            return cls((LayerSlot(0, 1, d),), (), d)
        weights, biases = [], []
        off = 0
        for n_in, n_out in spec.layers():
            weights.append(LayerSlot(off, n_out, n_in))
            off += n_out * n_in
            biases.append(LayerSlot(off, n_out, 1))
            off += n_out
        return cls(tuple(weights), tuple(biases), off)

    def rows(self) -> Iterator[slice]:
        """Filter-normalization rows: each neuron's incoming weights, then each bias alone."""
        for w, b in zip(self.weights, self.biases or (None,) * len(self.weights)):
            for r in range(w.rows):
                start = w.offset + r * w.cols
                yield slice(start, start + w.cols)
            if b is not None:
                for r in range(b.rows):
                    yield slice(b.offset + r, b.offset + r + 1)


def check_params(params: np.ndarray, spec: ModelSpec) -> None:
    d = param_count(spec)
    if params.ndim != 1 or params.shape[0] != d:
        raise ShapeError("d", d, params.shape, what="params")


def unflatten(params: np.ndarray, spec: ModelSpec) -> list:
    """Split a flat vector into [(W, b), ...] views; W is (n_out, n_in)."""
    check_params(params, spec)
    if spec.kind == "quadratic":
        return [(params, None)]
    layout = ParamLayout.of(spec)
    out = []
    for w, b in zip(layout.weights, layout.biases):
        W = params[w.offset:w.offset + w.size].reshape(w.rows, w.cols)
        out.append((W, params[b.offset:b.offset + b.rows]))
    return out


def flatten(layers: list) -> np.ndarray:
    parts = []
    for W, b in layers:
        parts.append(np.ravel(W))
        if b is not None:
            parts.append(np.ravel(b))
    return np.concatenate(parts).astype(np.float64, copy=False)


def init_params(spec: ModelSpec, seed: int, method: str = "uniform") -> np.ndarray:
    """Weights ~ U(-1/sqrt(n_in), 1/sqrt(n_in)); biases zero."""
    d = param_count(spec)
    if method == "zeros":
        return np.zeros(d)
    if method != "uniform":
        raise ConfigError(f"unknown init method {method!r}")
    rng = np.random.default_rng(seed)
    if spec.kind == "quadratic":
        return rng.uniform(-1.0, 1.0, size=d)
    layers = []
    for n_in, n_out in spec.layers():
        bound = 1.0 / np.sqrt(n_in)
        layers.append((rng.uniform(-bound, bound, size=(n_out, n_in)), np.zeros(n_out)))
    return flatten(layers)


def build_loss(graph, params: np.ndarray, spec: ModelSpec, x: np.ndarray, y: np.ndarray):
    """Record the forward pass on ``graph``; returns (loss, output, leaves)."""
    if spec.kind == "quadratic":
        # mean_i 0.5 * ||w - x_i||^2
        w = graph.leaf(params, requires_grad=True)
        pred = graph.add(graph.leaf(np.zeros_like(x)), w)
        return graph.half_mse(pred, x), pred, [w]

    leaves = []
    h = graph.leaf(x)
    layers = unflatten(params, spec)
    for i, (W, b) in enumerate(layers):
        Wt = graph.leaf(W, requires_grad=True)
        bt = graph.leaf(b, requires_grad=True)
        leaves += [Wt, bt]
        h = graph.add(graph.matmul(h, graph.transpose(Wt)), bt)
        if i < len(layers) - 1:
            h = graph.tanh(h) if spec.activation == "tanh" else graph.relu(h)
    if spec.loss == "cross_entropy":
        loss = graph.softmax_cross_entropy(h, y)
    else:
        loss = graph.half_mse(h, y.reshape(len(y), -1))
    return loss, h, leaves


def predict(params: np.ndarray, spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Plain numpy forward pass returning raw outputs (logits or regression values)."""
    if spec.kind == "quadratic":
        return np.broadcast_to(params, x.shape)
    h = x
    layers = unflatten(params, spec)
    for i, (W, b) in enumerate(layers):
        h = h @ W.T + b
        if i < len(layers) - 1:
            h = np.tanh(h) if spec.activation == "tanh" else np.maximum(h, 0.0)
    return h


def predict_labels(params: np.ndarray, spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    out = predict(params, spec, x)
    if out.shape[1] == 1:
        return (out[:, 0] > 0).astype(np.int64)
    return np.argmax(out, axis=1)
