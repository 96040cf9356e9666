"""Loss and gradient evaluation for flat parameter vectors."""

from __future__ import annotations

import numpy as np

from .data import Batch
from .errors import FsamlabError, LabelError, ShapeError
from .graph import Graph
from .models import ModelSpec, build_loss, check_params, flatten


def _check_batch(batch: Batch, model: ModelSpec) -> None:
    if len(batch) == 0:
        raise FsamlabError("empty batch")
    want = model.layer_sizes[0] if model.kind == "quadratic" else model.n_inputs
    if batch.x.shape[1] != want:
        raise ShapeError("features", want, batch.x.shape[1], what="batch")
    if model.kind != "quadratic" and batch.y.shape[0] != batch.x.shape[0]:
        raise ShapeError("examples", batch.x.shape[0], batch.y.shape[0], what="labels")
    if model.kind != "quadratic" and model.loss == "cross_entropy":
        y = batch.y
        if not np.issubdtype(y.dtype, np.integer):
            raise LabelError("cross-entropy needs integer class labels")
        if y.min() < 0 or y.max() >= model.n_classes:
            raise LabelError(f"label out of range [0, {model.n_classes})")


def loss_and_grad(params: np.ndarray, model: ModelSpec, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean loss over ``batch`` and its gradient with respect to ``params``."""
    check_params(params, model)
    _check_batch(batch, model)
    g = Graph()
    loss, _, leaves = build_loss(g, params, model, batch.x, batch.y)
    g.backward(loss)
    if model.kind == "quadratic":
        return float(loss.data), leaves[0].grad.copy()
    grads = [(leaves[i].grad, leaves[i + 1].grad) for i in range(0, len(leaves), 2)]
    return float(loss.data), flatten(grads)


def loss_value(params: np.ndarray, model: ModelSpec, batch: Batch) -> float:
    check_params(params, model)
    _check_batch(batch, model)
    loss, _, _ = build_loss(Graph(), params, model, batch.x, batch.y)
    return float(loss.data)


def finite_diff_grad(params: np.ndarray, model: ModelSpec, batch: Batch, h: float = 1e-5,
                     loss_fn=None) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    f = loss_fn or (lambda w: loss_value(w, model, batch))
    w = np.array(params, dtype=np.float64)
    out = np.empty_like(w)
    for i in range(w.size):
        orig = w[i]
        w[i] = orig + h
        up = f(w)
        w[i] = orig - h
        down = f(w)
        w[i] = orig
        out[i] = (up - down) / (2 * h)
    return out


def per_example_loglik_grad(params: np.ndarray, model: ModelSpec, example) -> np.ndarray:
    """Gradient of log p(y|x) for one (x, y) pair.

    Both heads are negative log-likelihoods (softmax, or a unit-variance
    Gaussian up to a constant), so this is minus the single-example loss gradient.
    """
    x, y = example
    batch = Batch(np.asarray(x, dtype=np.float64).reshape(1, -1), np.asarray([y]))
    _, grad = loss_and_grad(params, model, batch)
    return -grad


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-4) -> float:
    """max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


