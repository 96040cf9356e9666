"""Config-driven training runs, seeded comparisons, sweeps and the rate check."""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .autodiff import finite_diff_grad, loss_and_grad, loss_value, rel_error
from .config import ExperimentConfig
from .data import Batch, Dataset, make_synthetic, read_csv, subsample
from .errors import ConfigError, NonFiniteError
from .fisher import (MaskSchedule, empirical_fisher, mask_size, random_mask,
                     sample_examples, schedule_tick)
from .landscape import Snapshot, sharpness_probe
from .models import ModelSpec, init_params, param_count, predict, predict_labels
from .optim import base_step, zero_state
from .sam import sam_step

# independent RNG streams derived from run.seed
_INIT, _BATCHES, _MASK, _FISHER, _PROBE = range(5)

DEFAULT_RATES = tuple(round(0.1 * i, 1) for i in range(1, 10))
MODES = ("base", "sam", "fsam")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---- data -----------------------------------------------------------------------

def load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    d = cfg.data
    if d.train_csv:
        train = read_csv(d.train_csv, "train")
        evals = read_csv(d.eval_csv, "eval") if d.eval_csv else train
    else:
        train = make_synthetic(d.kind, d.n, d.noise, d.seed, "train")
        evals = make_synthetic(d.kind, d.n_eval, d.noise, d.seed, "eval")
    if d.subsample_rate < 1.0:
        train = subsample(train, d.subsample_rate, d.seed)
    return train, evals


def landscape_batch(cfg: ExperimentConfig, train: Dataset) -> Batch:
    """Fixed seeded subset reused for every landscape evaluation."""
    n = min(cfg.landscape.n_eval, len(train))
    idx = np.sort(np.random.default_rng(cfg.landscape.seed).choice(len(train), n, replace=False))
    return train.batch(idx)


def metric(params, spec: ModelSpec, batch: Batch) -> float:
    """Accuracy for classification heads, mean half squared error otherwise."""
    if spec.kind != "quadratic" and spec.loss == "cross_entropy":
        return float(np.mean(predict_labels(params, spec, batch.x) == batch.y))
    return loss_value(params, spec, batch)


class EpochSampler:
    """Consecutive chunks of a fresh seeded permutation per epoch."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n, self.b, self.rng = n, min(batch_size, n), rng
        self._perm, self._pos = None, n

    def next(self) -> np.ndarray:
        if self._pos >= self.n:
            self._perm, self._pos = self.rng.permutation(self.n), 0
        idx = self._perm[self._pos:self._pos + self.b]
        self._pos += self.b
        return idx


# ---- records --------------------------------------------------------------------

@dataclass
class MetricRow:
    step: int
    train_loss: float
    train_metric: float
    eval_loss: float
    eval_metric: float
    grad_norm: float
    eps_norm: float
    mask_updated: bool
    sharpness: Optional[float] = None


ROW_FIELDS = [f.name for f in fields(MetricRow)]


@dataclass
class RunRecord:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    initial: Optional[Snapshot] = None
    final: Optional[Snapshot] = None
    mask_updates: list = field(default_factory=list)
    diverged: bool = False
    wall_time: float = 0.0

    @property
    def final_row(self) -> MetricRow:
        return self.rows[-1]

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, k)) for k in ROW_FIELDS])
        return buf.getvalue()

    def summary_csv(self) -> str:
        last = self.rows[-1]
        items = [("name", self.config.run.name), ("mode", self.config.mode),
                 ("seed", self.config.run.seed), ("steps_run", last.step),
                 ("diverged", self.diverged), ("mask_updates", len(self.mask_updates)),
                 ("final_train_metric", last.train_metric), ("final_eval_metric", last.eval_metric)]
        return "key,value\n" + "".join(f"{k},{_fmt(v)}\n" for k, v in items)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(self.metrics_csv())
        (out / "summary.csv").write_text(self.summary_csv())
        (out / "config.txt").write_text(self.config.to_text())
        for snap, name in ((self.initial, "snapshot_init.csv"), (self.final, "snapshot_final.csv")):
            if snap is not None:
                write_snapshot(snap, out / name)


def read_metrics(text: str) -> list[MetricRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(MetricRow(
            int(rec["step"]), float(rec["train_loss"]), float(rec["train_metric"]),
            float(rec["eval_loss"]), float(rec["eval_metric"]), float(rec["grad_norm"]),
            float(rec["eps_norm"]), rec["mask_updated"] == "1",
            float(rec["sharpness"]) if rec["sharpness"] else None))
    return rows


def write_snapshot(snap: Snapshot, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "step", "index", "value"])
        for i, v in enumerate(snap.params):
            w.writerow([snap.label, snap.step, i, repr(float(v))])


def read_snapshot(path) -> Snapshot:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty snapshot")
    values = np.array([float(r["value"]) for r in sorted(rows, key=lambda r: int(r["index"]))])
    return Snapshot(rows[0]["label"], values, int(rows[0]["step"]))


# ---- the training loop ----------------------------------------------------------

class Trainer:
    """Owns one run's parameters, optimizer state, sampler and mask schedule."""

    def __init__(self, cfg: ExperimentConfig, train: Dataset, params=None):
        self.cfg = cfg
        self.spec = cfg.model.spec
        self.train = train
        seed = cfg.run.seed
        d = param_count(self.spec)
        self.params = init_params(self.spec, seed, cfg.model.init) if params is None else params
        self.state = zero_state(d, cfg.optim)
        self.sampler = EpochSampler(len(train), cfg.run.batch_size, _rng(seed, _BATCHES))
        self.sam = cfg.sam.core
        self.schedule = None
        if cfg.mode == "fsam":
            n_fisher = cfg.fsam.n_fisher or min(256, len(train))
            self.schedule = MaskSchedule(cfg.fsam.interval,
                                         random_mask(d, cfg.fsam.sparse_ratio, _rng(seed, _MASK)),
                                         n_fisher, rng=_rng(seed, _FISHER))

    def _fisher(self, n, rng):
        return empirical_fisher(self.params, self.spec, sample_examples(self.train, n, rng))

    def step(self, t: int):
        """Advance to step t (1-based). Returns (grad_norm, eps_norm, batch_loss, mask_updated)."""
        batch = self.train.batch(self.sampler.next())
        if self.cfg.mode == "base":
            loss, g = loss_and_grad(self.params, self.spec, batch)
            self.params, self.state = base_step(self.state, self.params, g, self.cfg.optim)
            return float(np.linalg.norm(g)), 0.0, loss, False
        mask, updated = None, False
        if self.schedule is not None:
            mask, updated = schedule_tick(self.schedule, t, self._fisher)
        self.params, self.state, diag = sam_step(self.state, self.params, self.spec, batch,
                                                 self.sam, self.cfg.optim, mask)
        return diag.grad_norm, diag.eps_norm, diag.loss, updated


def _eval_row(cfg, spec, params, step, train_b, eval_b, probe_b, gnorm, enorm, updated):
    sharp = None
    if cfg.run.probe_dirs > 0:
        sharp, _ = sharpness_probe(params, spec, probe_b, cfg.run.probe_rho, cfg.run.probe_dirs,
                                   _rng(cfg.run.seed, _PROBE))
    return MetricRow(step, loss_value(params, spec, train_b), metric(params, spec, train_b),
                     loss_value(params, spec, eval_b), metric(params, spec, eval_b),
                     gnorm, enorm, updated, sharp)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunRecord:
    """Train for run.steps steps; rows at step 0, every eval_every steps, each mask refresh and the end."""
    cfg.validate()
    start = time.perf_counter()
    train, evals = load_datasets(cfg)
    spec = cfg.model.spec
    trainer = Trainer(cfg, train)
    train_b, eval_b = train.batch(), evals.batch()
    probe_b = landscape_batch(cfg, train) if cfg.run.probe_dirs > 0 else None
    record = RunRecord(cfg, initial=Snapshot("init", trainer.params.copy(), 0))

    with np.errstate(all="ignore"):
        record.rows.append(_eval_row(cfg, spec, trainer.params, 0, train_b, eval_b, probe_b,
                                     float("nan"), 0.0, False))
        for t in range(1, cfg.run.steps + 1):
            try:
                gnorm, enorm, loss, updated = trainer.step(t)
            except NonFiniteError:
                gnorm, enorm, loss, updated = float("nan"), float("nan"), float("nan"), False
            if updated:
                record.mask_updates.append(t)
            if not (math.isfinite(loss) and np.all(np.isfinite(trainer.params))):
                record.diverged = True
                nan = float("nan")
                record.rows.append(MetricRow(t, nan, nan, nan, nan, gnorm, enorm, updated))
                break
            if updated or t % cfg.run.eval_every == 0 or t == cfg.run.steps:
                record.rows.append(_eval_row(cfg, spec, trainer.params, t, train_b, eval_b,
                                             probe_b, gnorm, enorm, updated))

    record.final = Snapshot("final", trainer.params.copy(), record.rows[-1].step)
    record.wall_time = time.perf_counter() - start
    if write and cfg.run.output_dir:
        record.write(cfg.run.output_dir)
    return record


# ---- comparisons ----------------------------------------------------------------

COMPARE_FIELDS = ["name", "mode", "repeats", "mean_metric", "std_metric"]
SWEEP_FIELDS = ["rate", "mode", "n_train", "repeats", "mean_metric", "std_metric"]


def table_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _final_metric(cfg: ExperimentConfig) -> float:
    return run_experiment(cfg).final_row.eval_metric


def _seeded(cfg: ExperimentConfig, r: int, tag: str) -> ExperimentConfig:
    over = {"run.seed": cfg.run.seed + r}
    if cfg.run.output_dir:
        over["run.output_dir"] = os.path.join(cfg.run.output_dir, tag, f"seed{cfg.run.seed + r}")
    return cfg.override(over)


def _run_all(configs: list, jobs: int) -> list[float]:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_final_metric, configs))
    return [_final_metric(c) for c in configs]


def compare(configs: list, repeats: int = 5, jobs: int = 1) -> list[dict]:
    """Mean and population std of the final eval metric over seeds run.seed .. run.seed+repeats-1."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    if not configs:
        raise ConfigError("nothing to compare")
    ref = configs[0]
    for c in configs[1:]:
        if c.data != ref.data or c.model != ref.model:
            raise ConfigError(f"config {c.run.name!r} does not share dataset and model with {ref.run.name!r}")
    jobs_list = [_seeded(c, r, c.run.name) for c in configs for r in range(repeats)]
    scores = _run_all(jobs_list, jobs)
    rows = []
    for i, c in enumerate(configs):
        vals = np.array(scores[i * repeats:(i + 1) * repeats])
        rows.append({"name": c.run.name, "mode": c.mode, "repeats": repeats,
                     "mean_metric": float(vals.mean()), "std_metric": float(vals.std())})
    return rows


def mode_config(cfg: ExperimentConfig, mode: str) -> ExperimentConfig:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    return cfg.override({"sam.enabled": mode != "base", "fsam.enabled": mode == "fsam",
                         "run.name": f"{cfg.run.name}-{mode}"})


def low_resource_sweep(base: ExperimentConfig, rates=DEFAULT_RATES, repeats: int = 5,
                       jobs: int = 1) -> list[dict]:
    """Every rate x mode on a stratified subsample of the train split.

    Rate 1.0 keeps the split untouched so it matches a plain compare.
    """
    rates = [float(r) for r in rates]
    if any(not 0 < r <= 1 for r in rates):
        raise ConfigError("rates must lie in (0, 1]")
    full, _ = load_datasets(base.override({"data.subsample_rate": 1.0}))
    rows = []
    for rate in rates:
        for mode in MODES:
            cfg = mode_config(base, mode).override({"data.subsample_rate": rate})
            if cfg.run.output_dir:
                cfg = cfg.override({"run.output_dir": os.path.join(cfg.run.output_dir, f"rate{rate}")})
            n_train = len(subsample(full, rate, base.data.seed)) if rate < 1 else len(full)
            row = compare([cfg], repeats, jobs)[0]
            rows.append({"rate": rate, "mode": mode, "n_train": n_train, "repeats": repeats,
                         "mean_metric": row["mean_metric"], "std_metric": row["std_metric"]})
    return rows


# ---- empirical convergence rate -------------------------------------------------

RATE_FIELDS = ["T", "batch_size", "lr", "rho", "mean_sq_grad_norm", "slope"]


def empirical_rate_check(cfg: ExperimentConfig, t_grid=(200, 400, 800, 1600)):
    """Average squared full-batch gradient norm over T steps, for each T in the grid.

    Each run uses lr = optim.lr * sqrt(b / T) and rho = sam.rho * sqrt(1 / (b T)).
    Returns (slope of log M against log T, table rows).
    """
    t_grid = [int(t) for t in t_grid]
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])) or t_grid[0] < 1:
        raise ConfigError("T grid must be positive and increasing")
    cfg.validate()
    train, _ = load_datasets(cfg)
    spec = cfg.model.spec
    b = min(cfg.run.batch_size, len(train))
    full = train.batch()
    rows = []
    for T in t_grid:
        lr = cfg.optim.lr * math.sqrt(b / T)
        rho = cfg.sam.rho * math.sqrt(1.0 / (b * T))
        run_cfg = cfg.override({"optim.lr": lr, "sam.rho": rho, "run.steps": T})
        trainer = Trainer(run_cfg, train)
        total = 0.0
        for t in range(T):
            _, g = loss_and_grad(trainer.params, spec, full)
            total += float(g @ g)
            trainer.step(t + 1)
        rows.append({"T": T, "batch_size": b, "lr": lr, "rho": rho, "mean_sq_grad_norm": total / T})
    m = np.array([r["mean_sq_grad_norm"] for r in rows])
    if np.all(m > 0):
        slope = float(np.polyfit(np.log(t_grid), np.log(m), 1)[0])
    else:
        slope = float("nan")
    for r in rows:
        r["slope"] = slope
    return slope, rows


# ---- gradient oracle ------------------------------------------------------------

GRADCHECK_MODELS = (
    ModelSpec("logistic", (3, 1), "tanh", "cross_entropy"),
    ModelSpec("logistic", (3, 4), "tanh", "cross_entropy"),
    ModelSpec("logistic", (3, 1), "tanh", "half_mse"),
    ModelSpec("mlp", (3, 5, 3), "tanh", "cross_entropy"),
    ModelSpec("mlp", (3, 6, 4, 2), "relu", "cross_entropy"),
    ModelSpec("mlp", (3, 5, 2), "tanh", "half_mse"),
    ModelSpec("quadratic", (6,), "tanh", "half_mse"),
)
GRADCHECK_FIELDS = ["model", "draw", "max_rel_err", "ok"]


def _model_name(spec: ModelSpec) -> str:
    return f"{spec.kind}[{'-'.join(map(str, spec.layer_sizes))}]/{spec.activation}/{spec.loss}"


def _random_batch(spec: ModelSpec, n: int, rng) -> Batch:
    x = rng.standard_normal((n, spec.layer_sizes[0]))
    if spec.kind == "quadratic":
        return Batch(x, np.zeros(n))
    if spec.loss == "cross_entropy":
        return Batch(x, rng.integers(0, spec.n_classes, n))
    return Batch(x, rng.standard_normal((n, spec.n_outputs)))


def gradient_check(draws: int = 20, seed: int = 0, h: float = 1e-5, tol: float = 1e-5,
                   models=GRADCHECK_MODELS) -> list[dict]:
    """Compare autodiff gradients with central differences on random draws."""
    rows = []
    for m_i, spec in enumerate(models):
        for k in range(draws):
            rng = np.random.default_rng([seed, m_i, k])
            params = rng.standard_normal(param_count(spec))
            batch = _random_batch(spec, int(rng.integers(1, 9)), rng)
            _, g = loss_and_grad(params, spec, batch)
            err = rel_error(g, finite_diff_grad(params, spec, batch, h))
            rows.append({"model": _model_name(spec), "draw": k, "max_rel_err": err, "ok": err < tol})
    return rows
