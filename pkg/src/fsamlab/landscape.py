"""Loss-landscape probes: interpolation curves, filter-normalized surfaces, sharpness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import loss_and_grad, loss_value
from .errors import ShapeError
from .models import ParamLayout
from .sam import sam_perturbation

DEFAULT_ALPHAS = np.linspace(-1.0, 1.0, 41)


@dataclass(frozen=True)
class Snapshot:
    label: str
    params: np.ndarray
    step: int = 0


@dataclass(frozen=True)
class Direction:
    vec: np.ndarray
    normalized: bool = False


def _same_length(a, b, what):
    if a.shape != b.shape:
        raise ShapeError("d", a.shape, b.shape, what=what)


def interp_curve(theta0: Snapshot, theta1: Snapshot, alphas, model, data) -> list[tuple[float, float]]:
    """Loss along theta1 + alpha * (theta1 - theta0)."""
    p0, p1 = np.asarray(theta0.params), np.asarray(theta1.params)
    _same_length(p0, p1, "snapshot")
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.size == 0:
        raise ValueError("alpha grid is empty")
    delta = p1 - p0
    out = []
    for a in alphas:
        # exact endpoints: alpha=0 is theta1 and alpha=-1 is theta0
        if a == 0:
            w = p1
        elif a == -1:
            w = p0
        else:
            w = p1 + a * delta
        out.append((float(a), loss_value(w, model, data)))
    return out


def filter_normalized_direction(params: np.ndarray, layout: ParamLayout, seed) -> Direction:
    """Gaussian direction with every layout row rescaled to the matching parameter row norm."""
    if layout.size != params.shape[0]:
        raise ShapeError("d", layout.size, params.shape[0], what="layout")
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(params.shape[0])
    for row in layout.rows():
        wn = np.linalg.norm(params[row])
        dn = np.linalg.norm(d[row])
        d[row] = 0.0 if wn == 0 or dn == 0 else d[row] * (wn / dn)
    return Direction(d, normalized=True)


def surface_grid(center: Snapshot, d1: Direction, d2: Direction, model, data,
                 grid_n: int = 25, span: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Losses at center + x*d1 + y*d2; returns (coords, losses) with losses[i, j] at (coords[i], coords[j])."""
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    c = np.asarray(center.params)
    _same_length(c, d1.vec, "direction 1")
    _same_length(c, d2.vec, "direction 2")
    coords = np.linspace(-span, span, grid_n)
    coords = 0.5 * (coords - coords[::-1])  # exactly antisymmetric, zero at the middle
    losses = np.empty((grid_n, grid_n))
    for i, x in enumerate(coords):
        for j, y in enumerate(coords):
            losses[i, j] = loss_value(c + x * d1.vec + y * d2.vec, model, data)
    return coords, losses


def sharpness_probe(params: np.ndarray, model, data, rho: float, n_dirs: int = 64,
                    seed=0) -> tuple[float, float]:
    """(max loss rise over random rho-sphere points, rise along the gradient-ascent point)."""
    if rho < 0 or n_dirs < 1:
        raise ValueError("need rho >= 0 and n_dirs >= 1")
    base, grad = loss_and_grad(params, model, data)
    if rho == 0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    rises = []
    for _ in range(n_dirs):
        u = rng.standard_normal(params.shape[0])
        u /= np.linalg.norm(u)
        rises.append(loss_value(params + rho * u, model, data) - base)
    ascent = loss_value(params + sam_perturbation(grad, rho), model, data) - base
    return float(max(rises)), float(ascent)
