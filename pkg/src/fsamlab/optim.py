"""First-order base optimizers sharing one flat-vector state layout.

``amsgrad`` with ``beta1=0`` and no bias correction is the literal recurrence

    v_t   = beta2 * v_{t-1} + (1 - beta2) * g_t**2
    vhat  = max(vhat_{t-1}, v_t)          (vhat_{-1} = delta**2)
    w    <- w - lr * g_t / sqrt(vhat)

With ``beta1 > 0`` the numerator becomes the EMA of gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, check_finite

VARIANTS = ("amsgrad", "adam", "adagrad", "sgd")


@dataclass(frozen=True)
class OptimHyper:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    delta: float = 1e-8
    weight_decay: float = 0.01
    variant: str = "amsgrad"
    bias_correction: bool = False
    warmup_steps: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown optimizer variant {self.variant!r}")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be nonnegative")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be nonnegative")


@dataclass
class OptimizerState:
    t: int
    m_buf: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray

    def copy(self) -> "OptimizerState":
        return OptimizerState(self.t, self.m_buf.copy(), self.v.copy(), self.v_hat.copy())

    def to_dict(self) -> dict:
        return {"t": self.t, "m_buf": self.m_buf.tolist(), "v": self.v.tolist(),
                "v_hat": self.v_hat.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerState":
        return cls(int(d["t"]), np.array(d["m_buf"], dtype=np.float64),
                   np.array(d["v"], dtype=np.float64), np.array(d["v_hat"], dtype=np.float64))


def zero_state(d: int, hyper: OptimHyper) -> OptimizerState:
    if d < 1:
        raise ValueError(f"state dimension must be >= 1, got {d}")
    return OptimizerState(0, np.zeros(d), np.zeros(d), np.full(d, hyper.delta ** 2))


def current_lr(hyper: OptimHyper, t: int) -> float:
    """Constant rate, optionally ramped linearly over the first warmup steps."""
    if hyper.warmup_steps and t < hyper.warmup_steps:
        return hyper.lr * (t + 1) / hyper.warmup_steps
    return hyper.lr


def base_step(state: OptimizerState, params: np.ndarray, grad: np.ndarray,
              hyper: OptimHyper) -> tuple[np.ndarray, OptimizerState]:
    """One update; returns new params and a new state (inputs are not mutated)."""
    d = params.shape[0]
    for name, vec in (("grad", grad), ("m_buf", state.m_buf), ("v", state.v), ("v_hat", state.v_hat)):
        if vec.shape != (d,):
            raise ShapeError("d", d, vec.shape, what=name)
    check_finite(grad, "grad")

    b1, b2 = hyper.beta1, hyper.beta2
    t = state.t + 1
    lr = current_lr(hyper, state.t)
    m_buf, v, v_hat = state.m_buf, state.v, state.v_hat

    if hyper.variant == "sgd":
        if b1 > 0:
            m_buf = b1 * m_buf + grad
            update = m_buf
        else:
            update = grad
    elif hyper.variant == "adagrad":
        v = v + grad * grad
        update = grad / np.sqrt(v + hyper.delta ** 2)
    else:
        if b1 > 0:
            m_buf = b1 * m_buf + (1 - b1) * grad
            g_eff = m_buf / (1 - b1 ** t) if hyper.bias_correction else m_buf
        else:
            g_eff = grad
        v = b2 * v + (1 - b2) * grad * grad
        if hyper.variant == "amsgrad":
            v_hat = np.maximum(v_hat, v)
            denom = v_hat / (1 - b2 ** t) if hyper.bias_correction else v_hat
            update = g_eff / np.sqrt(denom)
        else:
            denom = v / (1 - b2 ** t) if hyper.bias_correction else v
            update = g_eff / (np.sqrt(denom) + hyper.delta)

    new_params = params - lr * update
    if hyper.weight_decay:
        new_params = new_params - lr * hyper.weight_decay * params
    return new_params, OptimizerState(t, m_buf, v, v_hat)

