"""Sharpness-aware two-step update with an optional sparse perturbation mask."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import loss_and_grad
from .errors import ConfigError, ShapeError, check_finite
from .optim import OptimHyper, OptimizerState, base_step


@dataclass(frozen=True)
class SamConfig:
    rho: float = 1e-2

    def __post_init__(self):
        if not self.rho >= 0:
            raise ConfigError(f"rho must be nonnegative, got {self.rho}")


@dataclass(frozen=True)
class StepDiagnostics:
    grad_norm: float
    eps_norm: float
    loss: float
    perturbed_loss: float


def sam_perturbation(grad: np.ndarray, rho: float) -> np.ndarray:
    """rho * grad / ||grad||, or zeros at a stationary point."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    check_finite(grad, "grad")
    norm = np.linalg.norm(grad)
    if norm == 0 or rho == 0:
        return np.zeros_like(grad)
    return grad * (rho / norm)


def apply_mask(eps: np.ndarray, mask) -> np.ndarray:
    bits = getattr(mask, "bits", mask)
    if bits.shape != eps.shape:
        raise ShapeError("d", eps.shape, bits.shape, what="mask")
    return eps * bits


def sam_step(state: OptimizerState, params: np.ndarray, model, batch, sam: SamConfig,
             hyper: OptimHyper, mask=None):
    """Ascend to w + eps, take the gradient there, then update w with the base optimizer.

    The mask is applied after normalisation, so the masked perturbation can
    be shorter than rho. Returns (params, state, diagnostics).
    """
    loss, g1 = loss_and_grad(params, model, batch)
    eps = sam_perturbation(g1, sam.rho)
    if mask is not None:
        eps = apply_mask(eps, mask)
    if np.any(eps):
        perturbed_loss, g_sam = loss_and_grad(params + eps, model, batch)
    else:
        perturbed_loss, g_sam = loss, g1
    new_params, new_state = base_step(state, params, g_sam, hyper)
    diag = StepDiagnostics(float(np.linalg.norm(g1)), float(np.linalg.norm(eps)), loss, perturbed_loss)
    return new_params, new_state, diag
