"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Graph` is a tape: every operation appends a node holding its inputs,
its output and a closure that pushes the output gradient back to the inputs.
Nodes are appended in creation order, which is already a topological order,
so :meth:`Graph.backward` simply walks the tape in reverse.

Ops live on the graph object rather than in module globals, so distinct
graphs can be used from distinct threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self) -> list[int]:
        return list(self.data.shape)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class Node:
    inputs: tuple
    output: Tensor
    backward: Callable[[np.ndarray], None]
    name: str = ""


@dataclass
class Graph:
    nodes: list = field(default_factory=list)
    visits: int = 0

    def leaf(self, data, requires_grad: bool = False) -> Tensor:
        return Tensor(data, requires_grad=requires_grad)

    def _record(self, name, out_data, inputs, backward) -> Tensor:
        out = Tensor(out_data, requires_grad=any(t.requires_grad for t in inputs))
        if out.requires_grad:
            self.nodes.append(Node(inputs, out, backward, name))
        return out

    @staticmethod
    def _accumulate(t: Tensor, g: np.ndarray):
        if not t.requires_grad:
            return
        if t.grad is None:
            t.grad = np.array(g, dtype=np.float64)
        else:
            t.grad += g

    # ---- ops -----------------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
            raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

        def backward(g):
            self._accumulate(a, g @ b.data.T)
            self._accumulate(b, a.data.T @ g)

        return self._record("matmul", a.data @ b.data, (a, b), backward)

    def transpose(self, a: Tensor) -> Tensor:
        def backward(g):
            self._accumulate(a, g.T)

        return self._record("transpose", a.data.T, (a,), backward)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise add; ``b`` may be a row vector broadcast over ``a``'s rows."""
        if a.data.shape == b.data.shape:
            reduce_b = False
        elif b.data.ndim == 1 and a.data.ndim == 2 and a.data.shape[1] == b.data.shape[0]:
            reduce_b = True
        else:
            raise ValueError(f"add shape mismatch {a.shape} + {b.shape}")

        def backward(g):
            self._accumulate(a, g)
            self._accumulate(b, g.sum(axis=0) if reduce_b else g)

        return self._record("add", a.data + b.data, (a, b), backward)

    def tanh(self, a: Tensor) -> Tensor:
        y = np.tanh(a.data)

        def backward(g):
            self._accumulate(a, g * (1.0 - y * y))

        return self._record("tanh", y, (a,), backward)

    def relu(self, a: Tensor) -> Tensor:
        pos = a.data > 0

        def backward(g):
            self._accumulate(a, g * pos)

        return self._record("relu", np.where(pos, a.data, 0.0), (a,), backward)

    def softmax_cross_entropy(self, logits: Tensor, labels: np.ndarray) -> Tensor:
        """Mean cross-entropy of integer ``labels`` under softmax(logits).

        A single logit column is treated as the two-class case with an implicit
        zero logit for class 0, i.e. a sigmoid head.
        """
        z = logits.data
        single = z.shape[1] == 1
        if single:
            z = np.concatenate([np.zeros_like(z), z], axis=1)
        n = z.shape[0]
        shifted = z - z.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(shifted).sum(axis=1))
        logp = shifted - logsumexp[:, None]
        rows = np.arange(n)
        loss = -logp[rows, labels].mean()

        def backward(g):
            dz = np.exp(logp)
            dz[rows, labels] -= 1.0
            dz *= g / n
            self._accumulate(logits, dz[:, 1:] if single else dz)

        return self._record("softmax_xent", np.array(loss), (logits,), backward)

    def half_mse(self, pred: Tensor, target: np.ndarray) -> Tensor:
        """Mean over rows of 0.5 * ||pred_row - target_row||^2."""
        diff = pred.data - target
        n = diff.shape[0]
        loss = 0.5 * np.sum(diff * diff) / n

        def backward(g):
            self._accumulate(pred, diff * (g / n))

        return self._record("half_mse", np.array(loss), (pred,), backward)

    # ---- backward ------------------------------------------------------------

    def backward(self, out: Tensor) -> None:
        if out.data.size != 1:
            raise ValueError("backward needs a scalar output")
        out.grad = np.ones_like(out.data)
        for node in reversed(self.nodes):
            self.visits += 1
            if node.output.grad is not None:
                node.backward(node.output.grad)
