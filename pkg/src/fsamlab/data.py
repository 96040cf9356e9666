"""Seeded synthetic datasets, stratified subsampling and the dataset CSV format."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FsamlabError

KINDS = ("two_gaussians", "xor", "two_moons", "quadratic_regression")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Batch:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_2d(np.asarray(self.x, dtype=np.float64)))
        object.__setattr__(self, "y", np.asarray(self.y))

    def __len__(self):
        return self.x.shape[0]

    def take(self, idx) -> "Batch":
        return Batch(self.x[idx], self.y[idx])


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    split: str = "train"
    source: dict = field(default_factory=dict)

    def __len__(self):
        return self.x.shape[0]

    @property
    def is_classification(self) -> bool:
        return np.issubdtype(self.y.dtype, np.integer)

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def examples(self):
        return list(zip(self.x, self.y))

    def batch(self, idx=None) -> Batch:
        if idx is None:
            return Batch(self.x, self.y)
        return Batch(self.x[idx], self.y[idx])


def _balanced_labels(n, rng):
    y = np.arange(n) % 2
    rng.shuffle(y)
    return y.astype(np.int64)


def make_synthetic(kind: str, n: int, noise: float, seed: int, split: str = "train") -> Dataset:
    """Generate one of the toy tasks; identical arguments give identical arrays."""
    if kind not in KINDS:
        raise ConfigError(f"unknown dataset kind {kind!r}")
    if n < 2:
        raise ConfigError("n must be at least 2")
    if noise < 0:
        raise ConfigError("noise must be nonnegative")
    # train and eval splits draw from separate streams of the same seed
    rng = np.random.default_rng([seed, 0 if split == "train" else 1])
    if kind == "two_gaussians":
        y = _balanced_labels(n, rng)
        centers = np.where(y[:, None] == 1, 1.0, -1.0) * np.ones((n, 2))
        x = centers + noise * rng.standard_normal((n, 2))
    elif kind == "xor":
        y = _balanced_labels(n, rng)
        # class 1 on the (+,+)/(-,-) diagonal, class 0 on the other one
        s = rng.choice([-1.0, 1.0], size=n)
        x = np.stack([s, np.where(y == 1, s, -s)], axis=1)
        x += noise * rng.standard_normal((n, 2))
    elif kind == "two_moons":
        y = _balanced_labels(n, rng)
        t = rng.uniform(0.0, np.pi, size=n)
        upper = np.stack([np.cos(t), np.sin(t)], axis=1)
        lower = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
        x = np.where(y[:, None] == 0, upper, lower) + noise * rng.standard_normal((n, 2))
    else:
        x = rng.standard_normal((n, 2))
        y = x @ np.array([1.0, -2.0]) + 0.5 + noise * rng.standard_normal(n)
    source = {"kind": kind, "n": n, "noise": noise, "seed": seed, "split": split}
    return Dataset(x, y, split, source)


def subsample(ds: Dataset, rate: float, seed: int) -> Dataset:
    """Sample round(rate * n) examples without replacement, stratified by class.

    Per-class quotas use the largest-remainder rule, so every class gets
    floor or ceil of rate * class_count.
    """
    if not 0 < rate <= 1:
        raise ConfigError(f"subsample rate must be in (0, 1], got {rate}")
    n = len(ds)
    k = max(1, round_half_up(rate * n))
    rng = np.random.default_rng(seed)
    if not ds.is_classification:
        idx = rng.choice(n, size=k, replace=False)
    else:
        classes, counts = np.unique(ds.y, return_counts=True)
        exact = rate * counts
        quota = np.floor(exact).astype(int)
        spare = k - quota.sum()
        if spare > 0:
            order = np.argsort(-(exact - quota), kind="stable")
            quota[order[:spare]] += 1
        elif spare < 0:
            # only reachable through the minimum-size-1 rule
            order = np.argsort(exact - quota, kind="stable")
            for j in order[: -spare]:
                quota[j] -= 1
        parts = []
        for c, q in zip(classes, quota):
            members = np.flatnonzero(ds.y == c)
            parts.append(rng.choice(members, size=q, replace=False))
        idx = np.concatenate(parts)
        rng.shuffle(idx)
    source = dict(ds.source, subsample_rate=rate, subsample_seed=seed)
    return Dataset(ds.x[idx], ds.y[idx], ds.split, source)


def write_csv(ds: Dataset, path) -> None:
    p = ds.n_features
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"feature_{i}" for i in range(p)] + ["label"])
        for xi, yi in zip(ds.x, ds.y):
            w.writerow([repr(float(v)) for v in xi] + [str(int(yi)) if ds.is_classification else repr(float(yi))])


def read_csv(path, split: str = "train") -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FsamlabError(f"{path}: empty dataset file")
    header, body = rows[0], rows[1:]
    if header[-1] != "label" or any(h != f"feature_{i}" for i, h in enumerate(header[:-1])):
        raise FsamlabError(f"{path}: expected header feature_0..feature_{{p-1}},label")
    if not body:
        raise FsamlabError(f"{path}: no examples")
    x = np.array([[float(v) for v in r[:-1]] for r in body], dtype=np.float64)
    labels = [r[-1] for r in body]
    try:
        y = np.array([int(v) for v in labels], dtype=np.int64)
    except ValueError:
        y = np.array([float(v) for v in labels], dtype=np.float64)
    return Dataset(x, y, split, {"path": str(Path(path))})
