import math

import numpy as np
import pytest

from fsamlab.config import ExperimentConfig
from fsamlab.data import Dataset, write_csv
from fsamlab.errors import ConfigError
from fsamlab.harness import (DEFAULT_RATES, Trainer, compare, empirical_rate_check, gradient_check,
                             load_datasets, low_resource_sweep, mode_config, read_metrics,
                             read_snapshot, run_experiment, table_csv, COMPARE_FIELDS)


def test_run_is_byte_reproducible(tmp_path, small_cfg):
    cfg = mode_config(small_cfg, "fsam")
    a = run_experiment(cfg.override({"run.output_dir": str(tmp_path / "a")}))
    b = run_experiment(cfg.override({"run.output_dir": str(tmp_path / "b")}))
    for name in ("metrics.csv", "snapshot_final.csv", "snapshot_init.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert a.metrics_csv() == b.metrics_csv()


def test_metrics_csv_roundtrip(small_cfg):
    rec = run_experiment(mode_config(small_cfg.override({"run.probe_dirs": 4}), "fsam"), write=False)
    rows = read_metrics(rec.metrics_csv())
    assert len(rows) == len(rec.rows)
    assert [r.train_loss for r in rows] == [r.train_loss for r in rec.rows]
    assert math.isnan(rows[0].grad_norm)  # no step taken yet
    steps = [r.step for r in rows]
    assert steps == sorted(set(steps)) and steps[0] == 0 and steps[-1] == 60
    assert all(r.sharpness is not None for r in rows)


def test_snapshot_roundtrip(tmp_path, small_cfg):
    rec = run_experiment(small_cfg.override({"run.output_dir": str(tmp_path)}))
    snap = read_snapshot(tmp_path / "snapshot_final.csv")
    assert snap.params.tobytes() == rec.final.params.tobytes()
    assert snap.step == 60 and snap.label == "final"


def test_fsam_sparse_zero_matches_sam(small_cfg):
    sam = run_experiment(mode_config(small_cfg, "sam"), write=False)
    fsam = run_experiment(mode_config(small_cfg, "fsam").override({"fsam.sparse_ratio": 0.0}), write=False)
    assert sam.final.params.tobytes() == fsam.final.params.tobytes()
    assert [r.train_loss for r in sam.rows] == [r.train_loss for r in fsam.rows]


@pytest.mark.parametrize("steps,interval", [(60, 20), (65, 20), (19, 20), (50, 1)])
def test_mask_update_accounting(small_cfg, steps, interval):
    cfg = mode_config(small_cfg, "fsam").override({"run.steps": steps, "fsam.interval": interval})
    rec = run_experiment(cfg, write=False)
    assert sum(r.mask_updated for r in rec.rows) == steps // interval
    assert rec.mask_updates == list(range(interval, steps + 1, interval))


def test_divergence_is_recorded(small_cfg):
    cfg = small_cfg.override({"optim.variant": "sgd", "optim.lr": 1e6, "optim.beta1": 0.0,
                              "model.loss": "half_mse", "data.kind": "quadratic_regression",
                              "model.kind": "logistic", "model.layers": "2,1"})
    rec = run_experiment(cfg, write=False)
    assert rec.diverged
    assert math.isnan(rec.final_row.train_loss)
    assert "diverged,1" in rec.summary_csv()
    assert read_metrics(rec.metrics_csv())[-1].step == rec.final_row.step


def test_invalid_config_fails_before_running():
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig().override({"run.steps": 0}))


def test_external_csv_dataset(tmp_path, small_cfg):
    ds = Dataset(np.array([[1.0, 1.0], [-1.0, -1.0]] * 10), np.array([1, 0] * 10))
    write_csv(ds, tmp_path / "train.csv")
    cfg = small_cfg.override({"data.train_csv": str(tmp_path / "train.csv")})
    train, evals = load_datasets(cfg)
    assert len(train) == 20 and evals is train
    assert run_experiment(cfg, write=False).final_row.train_metric == 1.0


def test_compare_single_run(small_cfg):
    rows = compare([small_cfg], repeats=1)
    single = run_experiment(small_cfg, write=False).final_row.eval_metric
    assert rows[0]["mean_metric"] == single and rows[0]["std_metric"] == 0.0


def test_compare_order_independent(small_cfg):
    a = mode_config(small_cfg, "base")
    b = mode_config(small_cfg, "sam").override({"sam.rho": 0.05})
    r1 = compare([a, b], repeats=2)
    r2 = compare([b, a], repeats=2)
    assert r1 == r2[::-1]
    assert table_csv(r1, COMPARE_FIELDS).splitlines()[0] == ",".join(COMPARE_FIELDS)


def test_compare_rejects_mismatched_data(small_cfg):
    with pytest.raises(ConfigError):
        compare([small_cfg, small_cfg.override({"data.noise": 0.5})], 1)


def test_compare_default_repeats_is_five(small_cfg):
    import inspect
    assert inspect.signature(compare).parameters["repeats"].default == 5


def test_sweep_rate_one_equals_compare(small_cfg):
    rows = low_resource_sweep(small_cfg, [1.0], repeats=2)
    for row in rows:
        plain = compare([mode_config(small_cfg, row["mode"])], 2)[0]
        assert row["mean_metric"] == plain["mean_metric"] and row["std_metric"] == plain["std_metric"]


def test_default_rate_grid():
    assert len(DEFAULT_RATES) == 9 and DEFAULT_RATES[0] == 0.1 and DEFAULT_RATES[-1] == 0.9


def test_sweep_monotone_on_separable_task():
    cfg = ExperimentConfig().override({"data.kind": "two_gaussians", "data.noise": 0.0, "data.n": 200,
                                       "run.steps": 300, "run.eval_every": 300, "optim.variant": "adam"})
    rows = low_resource_sweep(cfg, [0.1, 0.5, 0.9], repeats=5)
    for mode in ("base", "sam", "fsam"):
        vals = [r["mean_metric"] for r in rows if r["mode"] == mode]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


def _rate_cfg(**over):
    base = {"data.kind": "quadratic_regression", "data.n": 200, "data.noise": 0.1,
            "model.kind": "logistic", "model.layers": "2,1", "model.loss": "half_mse",
            "optim.variant": "adam", "optim.lr": 0.1, "optim.weight_decay": 0.0,
            "run.batch_size": 8}
    base.update(over)
    return ExperimentConfig().override(base)


def test_ratecheck_stationary_start(tmp_path):
    ds = Dataset(np.random.default_rng(0).standard_normal((50, 2)), np.zeros(50))
    write_csv(ds, tmp_path / "zero.csv")
    cfg = mode_config(_rate_cfg(**{"data.train_csv": str(tmp_path / "zero.csv"), "model.init": "zeros"}), "sam")
    slope, rows = empirical_rate_check(cfg, [10, 20, 40])
    assert all(r["mean_sq_grad_norm"] == 0.0 for r in rows)
    assert math.isnan(slope)


def test_ratecheck_schedule_and_monotone():
    slope, rows = empirical_rate_check(mode_config(_rate_cfg(), "sam"), [100, 200, 400])
    b = 8
    for r in rows:
        assert r["lr"] == pytest.approx(0.1 * math.sqrt(b / r["T"]))
        assert r["rho"] == pytest.approx(0.01 * math.sqrt(1 / (b * r["T"])))
    m = [r["mean_sq_grad_norm"] for r in rows]
    assert all(b <= a for a, b in zip(m, m[1:]))
    assert slope < 0


def test_ratecheck_rejects_bad_grid():
    with pytest.raises(ConfigError):
        empirical_rate_check(_rate_cfg(), [400, 200])


def test_trainer_uses_literal_recurrence_in_base_mode(small_cfg):
    cfg = small_cfg.override({"optim.beta1": 0.0})
    t = Trainer(cfg, load_datasets(cfg)[0])
    t.step(1)
    assert t.state.t == 1 and np.all(t.state.v_hat >= cfg.optim.delta ** 2)


def test_gradient_check_rows():
    rows = gradient_check(draws=2)
    assert all(r["ok"] for r in rows)
    assert {r["draw"] for r in rows} == {0, 1}
