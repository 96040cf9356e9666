"""Command-line entry point: ``fsamlab <subcommand> ...``.

Every subcommand writes CSV with a header row (to ``--out`` or stdout).
``--plot`` additionally renders a PNG next to the CSV. Failures exit with
status 1 and a single JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .config import load_config
from .data import make_synthetic, write_csv
from .fisher import build_mask, empirical_fisher, sample_examples
from .landscape import (filter_normalized_direction, interp_curve, surface_grid)
from .models import ParamLayout


def _emit(text: str, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _figure_path(args, default_name: str) -> Path:
    return Path(args.out).with_suffix(".png") if args.out else Path(default_name)


def parse_rates(spec: str) -> list[float]:
    """``0.1..0.9`` (step 0.1), ``0.2..0.8:0.2`` or a comma list."""
    if ".." in spec:
        lo, _, rest = spec.partition("..")
        hi, _, step = rest.partition(":")
        lo, hi, step = float(lo), float(hi), float(step or 0.1)
        n = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 10) for i in range(n)]
    return [float(v) for v in spec.split(",") if v.strip()]


def cmd_train(args):
    cfg = load_config(args.config)
    if args.out:
        cfg = cfg.override({"run.output_dir": args.out})
    record = harness.run_experiment(cfg)
    sys.stdout.write(record.metrics_csv())
    if args.plot:
        from .plotting import plot_metrics

        target = Path(cfg.run.output_dir or ".") / f"{cfg.run.name}_metrics.png"
        plot_metrics(record.rows, target, title=f"{cfg.run.name} ({cfg.mode})")
    return 0


def cmd_compare(args):
    configs = [load_config(p) for p in args.configs.split(",") if p]
    rows = harness.compare(configs, args.repeats, args.jobs)
    _emit(harness.table_csv(rows, harness.COMPARE_FIELDS), args.out)
    if args.plot:
        from .plotting import plot_compare

        plot_compare(rows, _figure_path(args, "compare.png"))
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)
    rows = harness.low_resource_sweep(cfg, parse_rates(args.rates), args.repeats, args.jobs)
    _emit(harness.table_csv(rows, harness.SWEEP_FIELDS), args.out)
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(rows, _figure_path(args, "sweep.png"))
    return 0


def cmd_landscape(args):
    cfg = load_config(args.config)
    spec = cfg.model.spec
    train, _ = harness.load_datasets(cfg)
    data = harness.landscape_batch(cfg, train)
    snaps = [harness.read_snapshot(p) for p in args.snapshots.split(",") if p]
    if args.mode == "1d":
        if len(snaps) != 2:
            raise ValueError("1d mode needs exactly two snapshots: before,after")
        alphas = np.linspace(-1.0, 1.0, cfg.landscape.n_alphas)
        pts = interp_curve(snaps[0], snaps[1], alphas, spec, data)
        _emit("alpha,loss\n" + "".join(f"{a!r},{l!r}\n" for a, l in pts), args.out)
        if args.plot:
            from .plotting import plot_interp

            plot_interp({snaps[1].label: pts}, _figure_path(args, "landscape_1d.png"))
        return 0
    if not snaps:
        raise ValueError("2d mode needs a snapshot")
    center = snaps[-1]
    layout = ParamLayout.of(spec)
    d1 = filter_normalized_direction(center.params, layout, [cfg.landscape.seed, 1])
    d2 = filter_normalized_direction(center.params, layout, [cfg.landscape.seed, 2])
    coords, losses = surface_grid(center, d1, d2, spec, data, cfg.landscape.grid_n, cfg.landscape.range)
    lines = ["x,y,loss\n"]
    for i, x in enumerate(coords):
        for j, y in enumerate(coords):
            lines.append(f"{float(x)!r},{float(y)!r},{float(losses[i, j])!r}\n")
    _emit("".join(lines), args.out)
    if args.plot:
        from .plotting import plot_surface

        plot_surface(coords, losses, _figure_path(args, "landscape_2d.png"))
    return 0


def cmd_fisher_stats(args):
    cfg = load_config(args.config)
    train, _ = harness.load_datasets(cfg)
    snap = harness.read_snapshot(args.snapshot)
    n = cfg.fsam.n_fisher or min(256, len(train))
    rng = np.random.default_rng([cfg.run.seed, 3])
    fisher = empirical_fisher(snap.params, cfg.model.spec, sample_examples(train, n, rng))
    mask = build_mask(fisher, cfg.fsam.sparse_ratio)
    order = np.argsort(-fisher.values, kind="stable")
    lines = ["index,fisher_value,selected\n"]
    lines += [f"{i},{float(fisher.values[i])!r},{int(mask.bits[i])}\n" for i in order]
    _emit("".join(lines), args.out)
    return 0


def cmd_gradcheck(args):
    rows = harness.gradient_check(draws=args.draws, seed=args.seed)
    _emit(harness.table_csv(rows, harness.GRADCHECK_FIELDS), args.out)
    bad = [r for r in rows if not r["ok"]]
    if bad:
        raise RuntimeError(f"{len(bad)} gradient draws exceed tolerance; worst "
                           f"{max(r['max_rel_err'] for r in bad):.3g}")
    return 0


def cmd_ratecheck(args):
    cfg = load_config(args.config)
    slope, rows = harness.empirical_rate_check(cfg, [int(t) for t in args.tgrid.split(",")])
    _emit(harness.table_csv(rows, harness.RATE_FIELDS), args.out)
    if args.plot:
        from .plotting import plot_rate

        plot_rate(rows, slope, _figure_path(args, "ratecheck.png"))
    return 0


def cmd_datagen(args):
    ds = make_synthetic(args.kind, args.n, args.noise, args.seed, args.split)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsamlab", description="SAM / Fisher-masked SAM laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("train", cmd_train, "run one experiment")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", help="output directory (overrides run.output_dir)")
    sp.add_argument("--plot", action="store_true")

    sp = add("compare", cmd_compare, "seeded comparison of several configs")
    sp.add_argument("--configs", required=True, help="comma-separated config paths")
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out")
    sp.add_argument("--plot", action="store_true")

    sp = add("sweep", cmd_sweep, "low-resource subsampling sweep")
    sp.add_argument("--config", required=True)
    sp.add_argument("--rates", default="0.1..0.9")
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out")
    sp.add_argument("--plot", action="store_true")

    sp = add("landscape", cmd_landscape, "1D interpolation or 2D surface")
    sp.add_argument("--config", required=True)
    sp.add_argument("--mode", choices=("1d", "2d"), required=True)
    sp.add_argument("--snapshots", required=True, help="snapshot CSVs: before,after (1d) or center (2d)")
    sp.add_argument("--out")
    sp.add_argument("--plot", action="store_true")

    sp = add("fisher-stats", cmd_fisher_stats, "dump empirical Fisher and mask selection")
    sp.add_argument("--config", required=True)
    sp.add_argument("--snapshot", required=True)
    sp.add_argument("--out")

    sp = add("gradcheck", cmd_gradcheck, "autodiff vs central finite differences")
    sp.add_argument("--draws", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")

    sp = add("ratecheck", cmd_ratecheck, "empirical convergence-rate slope")
    sp.add_argument("--config", required=True)
    sp.add_argument("--tgrid", default="200,400,800,1600")
    sp.add_argument("--out")
    sp.add_argument("--plot", action="store_true")

    sp = add("datagen", cmd_datagen, "write a synthetic dataset CSV")
    sp.add_argument("--kind", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--noise", type=float, default=0.1)
    sp.add_argument("--split", default="train", choices=("train", "eval"))
    sp.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one machine-readable line, never a traceback
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
