"""Command line pipeline: synth, train, associate, grid, eval, stress, plot.

One key=value config file drives every command; any key can be overridden
on the command line with ``--set key=value``.  Exit codes: 0 success,
1 runtime failure, 2 configuration/usage error.  Config problems are
collected and reported together, not one at a time.

Config keys (defaults in parentheses):

    stations             station CSV path                     [required]
    velocity_model       layered model path                   [required]
    region.lat_min/.lat_max/.lon_min/.lon_max                 [required]
    synth.*              SynthConfig fields, e.g. synth.n_p (500)
    window.n_p (synth.n_p)   window length used by associate/stress
    window.window_s (synth.window_s)
    train.*              TrainConfig fields, e.g. train.hidden (32)
    agg.n_nuc (8)  agg.n_merge (7)  agg.n_min (8)
    grid.spacing_km (5)  grid.depth_levels (2,9,16,23)
    grid.residual_tol (1.5)  grid.min_picks (8)
    grid.origin_time_step (1)  grid.dedup_window (6)
    stress.gaps (10,12,16,20,24,32,64,128)  stress.n_events (500)
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, fields

import numpy as np

from . import __version__
from .aggregate import (AggParams, associate_stream, read_catalog, write_catalog)
from .evaluate import (iter_linked, pr_sweep, score, stress_test, svg_line_plot,
                       read_tidy_csv, write_metrics_json, write_pr_csv,
                       write_stress_csv, write_tidy_csv)
from .geo import Region, load_stations
from .gridassoc import GridParams, build_grid, grid_associate
from .linker import LinkerModel, TrainConfig, predict_batch, train
from .synth import SynthConfig, generate_dataset
from .velmod import load_model
from .window import build_subsequences, read_picks_csv, write_picks_csv

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError([f"{path}:{lineno}: expected key = value"])
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError([f"cannot read config file: {exc}"]) from None
    return values


class RunConfig:
    """String key-value store with typed, error-collecting accessors."""

    def __init__(self, values: dict[str, str]):
        self.values = values
        self.problems: list[str] = []

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        values: dict[str, str] = {}
        if getattr(args, "config", None):
            values.update(_parse_config_file(args.config))
        for item in getattr(args, "set", None) or []:
            if "=" not in item:
                raise ConfigError([f"--set {item!r}: expected key=value"])
            key, value = item.split("=", 1)
            values[key.strip()] = value.strip()
        if getattr(args, "seed", None) is not None:
            values["seed"] = str(args.seed)
        if getattr(args, "workers", None) is not None:
            values["workers"] = str(args.workers)
        return cls(values)

    # -- primitive getters ---------------------------------------------------

    def _get(self, key, default=None, required=False):
        if key in self.values:
            return self.values[key]
        if required and default is None:
            self.problems.append(f"missing required config key {key!r}")
            return None
        return default

    def get_float(self, key, default=None, required=False):
        raw = self._get(key, None if default is None else str(default), required)
        if raw is None:
            return None
        try:
            return float(raw)
        except ValueError:
            self.problems.append(f"config key {key!r}: not a number: {raw!r}")
            return None

    def get_int(self, key, default=None, required=False):
        raw = self._get(key, None if default is None else str(default), required)
        if raw is None:
            return None
        try:
            return int(raw)
        except ValueError:
            self.problems.append(f"config key {key!r}: not an integer: {raw!r}")
            return None

    def get_floats(self, key, default):
        raw = self._get(key, default)
        try:
            return tuple(float(x) for x in str(raw).split(",") if x.strip())
        except ValueError:
            self.problems.append(f"config key {key!r}: not a number list: {raw!r}")
            return ()

    def get_path(self, key, required=True):
        raw = self._get(key, required=required)
        if raw is None:
            return None
        import os
        if not os.path.exists(raw):
            self.problems.append(f"config key {key!r}: file not found: {raw}")
            return None
        return raw

    # -- composite objects ----------------------------------------------------

    def region(self):
        vals = [self.get_float(f"region.{k}", required=True)
                for k in ("lat_min", "lat_max", "lon_min", "lon_max")]
        if any(v is None for v in vals):
            return None
        try:
            return Region(*vals)
        except ValueError as exc:
            self.problems.append(f"region: {exc}")
            return None

    def stations(self):
        path = self.get_path("stations")
        if path is None:
            return None
        try:
            return load_stations(path)
        except ValueError as exc:
            self.problems.append(str(exc))
            return None

    def velmodel(self):
        path = self.get_path("velocity_model")
        if path is None:
            return None
        try:
            return load_model(path)
        except ValueError as exc:
            self.problems.append(str(exc))
            return None

    def _dataclass(self, cls, prefix, **overrides):
        kwargs = {}
        for f in fields(cls):
            key = f"{prefix}.{f.name}"
            if f.name in overrides and overrides[f.name] is not None:
                kwargs[f.name] = overrides[f.name]
                continue
            if key not in self.values:
                continue
            raw = self.values[key]
            try:
                if f.type in ("int", int):
                    kwargs[f.name] = int(raw)
                elif f.type in ("float", float):
                    kwargs[f.name] = float(raw)
                elif "tuple" in str(f.type):
                    kwargs[f.name] = tuple(float(x) for x in raw.split(","))
                else:
                    kwargs[f.name] = raw
            except ValueError:
                self.problems.append(f"config key {key!r}: bad value {raw!r}")
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            self.problems.append(f"{prefix}: {exc}")
            return None

    def synth_config(self):
        seed = self.get_int("seed", 0)
        return self._dataclass(SynthConfig, "synth", seed=seed)

    def train_config(self):
        seed = self.get_int("seed", 0)
        return self._dataclass(TrainConfig, "train", seed=seed)

    def agg_params(self):
        return self._dataclass(AggParams, "agg")

    def grid_params(self):
        return self._dataclass(GridParams, "grid")

    def window_shape(self):
        synth = self.synth_config()
        n_p = self.get_int("window.n_p", synth.n_p if synth else 500)
        window_s = self.get_float("window.window_s", synth.window_s if synth else 120.0)
        return n_p, window_s

    def check(self):
        if self.problems:
            raise ConfigError(self.problems)

    def echo(self) -> dict:
        return {"tool": "pickassoc", "version": __version__, "config": self.values}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = RunConfig.from_args(args)
    synth_cfg = cfg.synth_config()
    stations = cfg.stations()
    region = cfg.region()
    model = cfg.velmodel()
    workers = cfg.get_int("workers", 1)
    cfg.check()
    header = generate_dataset(synth_cfg, stations, region, model,
                              n_samples=args.n, out_path=args.out, workers=workers)
    print(f"wrote {args.out}: {header['n_samples']} windows "
          f"(n_p={header['config']['n_p']}, seed={header['seed']})")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = RunConfig.from_args(args)
    train_cfg = cfg.train_config()
    cfg.check()
    result = train(args.dataset, train_cfg, log_path=args.log,
                   checkpoint_path=args.out)
    if result.diverged:
        print("training diverged (non-finite loss); kept last finite checkpoint",
              file=sys.stderr)
        return EXIT_RUNTIME
    last = result.history[-1]
    result.model.save(args.out, extra={"config": asdict(train_cfg),
                                       "best_epoch": result.best_epoch})
    print(f"wrote {args.out}: best epoch {result.best_epoch}, "
          f"val accuracy {last.val_accuracy:.4f} (real rows), "
          f"{last.val_accuracy_unmasked:.4f} (all rows)")
    return EXIT_OK


def cmd_associate(args) -> int:
    cfg = RunConfig.from_args(args)
    agg = cfg.agg_params()
    n_p, window_s = cfg.window_shape()
    stations = cfg.stations()
    region = cfg.region()
    if not args.oracle and args.checkpoint is None:
        cfg.problems.append("associate needs --checkpoint or --oracle")
    cfg.check()
    picks = read_picks_csv(args.picks, stations)
    if args.oracle:
        event_ids = np.asarray([-1 if p.event_id is None else p.event_id
                                for p in picks], dtype=np.int64)
        predictor = event_ids
    else:
        predictor = LinkerModel.load(args.checkpoint)
    windows = build_subsequences(picks, stations, region, n_p, window_s)
    linked = iter_linked(windows, predictor, threshold=args.threshold)
    clusters = list(associate_stream(linked, agg))
    write_catalog(args.out, clusters, picks=picks, stations=stations,
                  header_extra=cfg.echo())
    print(f"wrote {args.out}: {len(clusters)} events from {len(picks)} picks")
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = RunConfig.from_args(args)
    params = cfg.grid_params()
    stations = cfg.stations()
    region = cfg.region()
    model = cfg.velmodel()
    spacing = cfg.get_float("grid.spacing_km", 5.0)
    depths = cfg.get_floats("grid.depth_levels", "2,9,16,23")
    cfg.check()
    picks = read_picks_csv(args.picks, stations)
    grid = build_grid(region, depths, spacing, stations, model)
    clusters = grid_associate(picks, grid, params)
    write_catalog(args.out, clusters, picks=picks, stations=stations,
                  header_extra=cfg.echo())
    print(f"wrote {args.out}: {len(clusters)} events from {len(picks)} picks "
          f"({grid.n_nodes} grid nodes)")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = RunConfig.from_args(args)
    cfg.check()
    catalog = read_catalog(args.catalog)
    truth = read_catalog(args.truth)
    report = score(catalog, [c.picks for c in truth],
                   success_threshold=args.success_threshold)
    write_metrics_json(args.out, report, header=cfg.echo())
    line = (f"event precision {report.event_precision:.4f} "
            f"recall {report.event_recall:.4f} | phase precision "
            f"{report.phase_precision:.4f} recall {report.phase_recall:.4f}")
    print(line)
    if args.pr_sweep:
        lo, hi = (int(x) for x in args.pr_sweep.split(":"))
        sweep = pr_sweep(catalog, [c.picks for c in truth], range(lo, hi + 1),
                         success_threshold=args.success_threshold)
        out = args.out.rsplit(".", 1)[0] + "_pr.csv"
        write_pr_csv(out, sweep)
        print(f"wrote {out}: n_min sweep {lo}..{hi}")
    return EXIT_OK


def cmd_stress(args) -> int:
    cfg = RunConfig.from_args(args)
    stations = cfg.stations()
    region = cfg.region()
    model = cfg.velmodel()
    agg = cfg.agg_params()
    grid_params = None if args.no_grid else cfg.grid_params()
    gaps = cfg.get_floats("stress.gaps", "10,12,16,20,24,32,64,128")
    n_events = cfg.get_int("stress.n_events", 500)
    n_p, window_s = cfg.window_shape()
    seed = cfg.get_int("seed", 0)
    cfg.check()
    predictor = None if args.oracle else LinkerModel.load(args.checkpoint)
    rows = stress_test(predictor, stations, region, model, gaps=gaps,
                       n_events=n_events, seed=seed, n_p=n_p, window_s=window_s,
                       agg=agg, grid_params=grid_params,
                       grid_spacing_km=cfg.get_float("grid.spacing_km", 5.0),
                       grid_depths=cfg.get_floats("grid.depth_levels", "2,9,16,23"))
    write_stress_csv(args.out, rows)
    write_metrics_json(args.out.rsplit(".", 1)[0] + ".json", rows,
                       header=cfg.echo())
    for r in rows:
        print(f"gap<{r['max_gap_s']:.0f}s mean {r['mean_gap_s']:5.1f}s "
              f"{r['associator']:>13}: precision {r['event_precision']:.3f} "
              f"recall {r['event_recall']:.3f}")
    return EXIT_OK


def cmd_plot(args) -> int:
    rows = read_tidy_csv(args.input)
    if not rows:
        print("no rows to plot", file=sys.stderr)
        return EXIT_RUNTIME
    x_col = args.x or ("mean_gap_s" if "mean_gap_s" in rows[0] else "n_min")
    series_col = args.series or ("associator" if "associator" in rows[0] else None)
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        if r["metric"] != args.metric:
            continue
        name = r[series_col] if series_col else args.metric
        series.setdefault(name, []).append((float(r[x_col]), float(r["value"])))
    if not series:
        print(f"metric {args.metric!r} not present in {args.input}", file=sys.stderr)
        return EXIT_RUNTIME
    svg_line_plot(args.out, series, title=args.metric, xlabel=x_col,
                  ylabel=args.metric)
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pickassoc",
        description="grid-free seismic phase association pipeline")
    parser.add_argument("--version", action="version", version=__version__)

    def common(sub):
        sub.add_argument("--config", help="key=value config file")
        sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override one config key (repeatable)")
        sub.add_argument("--seed", type=int, help="override config seed")
        sub.add_argument("--workers", type=int, help="parallel workers")

    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a training dataset")
    common(p)
    p.add_argument("--n", type=int, required=True, help="number of windows")
    p.add_argument("--out", required=True, help="output .npz dataset")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="train the linker on a dataset")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output checkpoint .npz")
    p.add_argument("--log", help="training log CSV")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("associate", help="associate a pick stream with the linker")
    common(p)
    p.add_argument("--picks", required=True, help="pick stream CSV")
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--oracle", action="store_true",
                   help="use event_id column instead of a model")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output catalog JSON lines")
    p.set_defaults(func=cmd_associate)

    p = subs.add_parser("grid", help="associate a pick stream with the grid baseline")
    common(p)
    p.add_argument("--picks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = subs.add_parser("eval", help="score a catalog against a truth catalog")
    common(p)
    p.add_argument("--catalog", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.add_argument("--success-threshold", type=float, default=0.5)
    p.add_argument("--pr-sweep", metavar="LO:HI",
                   help="also sweep n_min over LO..HI (catalog must be n_min=1)")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("stress", help="inter-event spacing stress sweep")
    common(p)
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--oracle", action="store_true", help="use oracle labels")
    p.add_argument("--no-grid", action="store_true", help="skip the grid baseline")
    p.add_argument("--out", required=True, help="tidy CSV output")
    p.set_defaults(func=cmd_stress)

    p = subs.add_parser("plot", help="render a tidy metrics CSV as an SVG")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metric", default="event_recall")
    p.add_argument("--x", help="x column (default mean_gap_s or n_min)")
    p.add_argument("--series", help="series column (default associator)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
