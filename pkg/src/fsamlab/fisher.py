"""Diagonal empirical Fisher, top-k perturbation masks and their refresh schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import per_example_loglik_grad
from .data import round_half_up
from .errors import ConfigError, FsamlabError


@dataclass(frozen=True)
class FisherEstimate:
    values: np.ndarray
    sample_count: int


@dataclass(frozen=True)
class SparseMask:
    bits: np.ndarray
    sparse_ratio: float

    @property
    def cardinality(self) -> int:
        return int(self.bits.sum())

    def __len__(self):
        return self.bits.shape[0]


def mask_size(d: int, s: float) -> int:
    """Number of perturbed coordinates, round((1 - s) * d) clamped to [0, d]."""
    return min(d, max(0, round_half_up((1.0 - s) * d)))


def _check_ratio(s):
    if not 0 <= s <= 1:
        raise ConfigError(f"sparse ratio must be in [0, 1], got {s}")


def empirical_fisher(params: np.ndarray, model, samples) -> FisherEstimate:
    """Mean over samples of the squared per-example log-likelihood gradient."""
    samples = list(samples)
    if not samples:
        raise FsamlabError("empirical Fisher needs at least one sample")
    acc = np.zeros_like(params, dtype=np.float64)
    for ex in samples:
        g = per_example_loglik_grad(params, model, ex)
        acc += g * g
    return FisherEstimate(acc / len(samples), len(samples))


def build_mask(fisher, s: float) -> SparseMask:
    """Set the bits of the k largest Fisher values; ties go to the lower index."""
    _check_ratio(s)
    values = np.asarray(getattr(fisher, "values", fisher), dtype=np.float64)
    d = values.shape[0]
    k = mask_size(d, s)
    bits = np.zeros(d)
    bits[np.argsort(-values, kind="stable")[:k]] = 1.0
    return SparseMask(bits, s)


def random_mask(d: int, s: float, seed) -> SparseMask:
    if d < 1:
        raise ValueError("d must be >= 1")
    _check_ratio(s)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bits = np.zeros(d)
    bits[rng.choice(d, size=mask_size(d, s), replace=False)] = 1.0
    return SparseMask(bits, s)


def sample_examples(ds, n: int, rng: np.random.Generator) -> list:
    """n examples without replacement (with replacement only if n exceeds the split)."""
    idx = rng.choice(len(ds), size=n, replace=n > len(ds))
    return list(zip(ds.x[idx], ds.y[idx]))


@dataclass
class MaskSchedule:
    interval: int
    mask: SparseMask
    n_fisher: int
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    last_update_step: int = 0
    updates: list = field(default_factory=list)

    def __post_init__(self):
        if self.interval < 1:
            raise ConfigError("mask interval must be >= 1")
        if self.n_fisher < 1:
            raise ConfigError("n_fisher must be >= 1")

    def due(self, t: int) -> bool:
        return t > 0 and t % self.interval == 0


def schedule_tick(sched: MaskSchedule, t: int,
                  fisher_provider: Callable[[int, np.random.Generator], FisherEstimate]):
    """Rebuild the mask when t is a positive multiple of the interval.

    ``fisher_provider(n, rng)`` must draw ``n`` examples with ``rng`` and return
    their empirical Fisher at the current weights. Returns (mask, updated).
    """
    if t < sched.last_update_step:
        raise ValueError(f"schedule steps must be monotone, got {t} after {sched.last_update_step}")
    if not sched.due(t) or t == sched.last_update_step:
        return sched.mask, False
    fisher = fisher_provider(sched.n_fisher, sched.rng)
    sched.mask = build_mask(fisher, sched.mask.sparse_ratio)
    sched.last_update_step = t
    sched.updates.append(t)
    return sched.mask, True
