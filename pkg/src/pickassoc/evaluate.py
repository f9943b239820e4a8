"""Jaccard-overlap evaluation of catalogs against ground truth.

A detected cluster scores against the truth event it overlaps best
(Jaccard precision); a truth event scores against its best detection
(Jaccard recall).  A detection counts as successful when its Jaccard
precision reaches the success threshold (0.5 by default: at least half the
union is shared with one true event).  Event precision/recall are the
success fractions over detections/truth events; phase precision/recall are
the mean Jaccard values themselves.

Also here: the precision-recall sweep over the minimum cluster size, the
stress harness that degrades inter-event spacing until association breaks
down, and small CSV/JSON/SVG report writers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .aggregate import AggParams, Cluster, LinkedWindow, associate, linked_window
from .geo import Region, StationTable
from .gridassoc import GridParams, TravelTimeGrid, build_grid, grid_associate
from .linker import LinkerModel, oracle_link, predict_batch
from .synth import GroundTruth, generate_stress_sequence
from .velmod import LayeredModel
from .window import build_subsequences


def _as_set(cluster) -> set:
    return cluster.picks if isinstance(cluster, Cluster) else set(cluster)


def jaccard_p(detected, truth: Sequence) -> float:
    """Best overlap of one detection against all truth events (0 when none)."""
    a = _as_set(detected)
    if not a or not truth:
        return 0.0
    best = 0.0
    for b in truth:
        bs = _as_set(b)
        inter = len(a & bs)
        if inter:
            best = max(best, inter / len(a | bs))
    return best


def jaccard_r(truth_event, detections: Sequence) -> float:
    """Best overlap of one truth event against all detections (0 when none)."""
    return jaccard_p(truth_event, detections)


@dataclass
class MetricsReport:
    event_precision: float
    event_recall: float
    phase_precision: float
    phase_recall: float
    n_detected: int
    n_truth: int
    precision_defined: bool = True
    recall_defined: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


def score(catalog: Sequence, truth: Sequence,
          success_threshold: float = 0.5) -> MetricsReport:
    """Event and phase metrics of a catalog against truth pick sets."""
    det = [_as_set(c) for c in catalog]
    tru = [_as_set(c) for c in truth]
    d, c = len(det), len(tru)
    jp = [jaccard_p(a, tru) for a in det]
    jr = [jaccard_r(b, det) for b in tru]
    return MetricsReport(
        event_precision=float(np.mean([j >= success_threshold for j in jp])) if d else 1.0,
        event_recall=float(np.mean([j >= success_threshold for j in jr])) if c else 1.0,
        phase_precision=float(np.mean(jp)) if d else 1.0,
        phase_recall=float(np.mean(jr)) if c else 1.0,
        n_detected=d, n_truth=c,
        precision_defined=d > 0, recall_defined=c > 0)


def pr_sweep(clusters: Sequence[Cluster], truth: Sequence,
             n_min_range: Iterable[int] = range(8, 21),
             success_threshold: float = 0.5) -> list[tuple[int, MetricsReport]]:
    """Score the same pre-filter clusters under each minimum cluster size.

    ``clusters`` must come from association run with n_min=1 so the sweep
    only re-applies the final size filter; recall is then exactly
    non-increasing in n_min.
    """
    out = []
    for n_min in n_min_range:
        kept = [c for c in clusters if len(_as_set(c)) >= n_min]
        out.append((int(n_min), score(kept, truth, success_threshold)))
    return out


# ---------------------------------------------------------------------------
# prediction plumbing shared by the harness and the CLI
# ---------------------------------------------------------------------------

Predictor = Union[LinkerModel, np.ndarray, GroundTruth, Callable]


def iter_linked(windows, predictor: Predictor, threshold: float = 0.5,
                batch: int = 256, n_picks: Optional[int] = None):
    """Yield a LinkedWindow per sub-sequence using a model, oracle, or callable.

    ``predictor`` may be a LinkerModel (batched forward passes), a
    GroundTruth / pick->event-id array (oracle labels), or any callable
    mapping a SubSequence to a Prediction.
    """
    if isinstance(predictor, LinkerModel):
        buf = []
        for w in windows:
            buf.append(w)
            if len(buf) == batch:
                feats = np.stack([b.features for b in buf])
                preds = predict_batch(predictor, feats,
                                      np.asarray([b.n_real for b in buf]), threshold)
                for b, p in zip(buf, preds):
                    yield linked_window(b, p)
                buf = []
        if buf:
            feats = np.stack([b.features for b in buf])
            preds = predict_batch(predictor, feats,
                                  np.asarray([b.n_real for b in buf]), threshold)
            for b, p in zip(buf, preds):
                yield linked_window(b, p)
        return
    if isinstance(predictor, GroundTruth):
        ids = predictor.pick_event_ids(n_picks) if n_picks else None
        fn = lambda w: oracle_link(ids if ids is not None else predictor, w)
    elif isinstance(predictor, np.ndarray):
        fn = lambda w: oracle_link(predictor, w)
    else:
        fn = predictor
    for w in windows:
        yield linked_window(w, fn(w))


# ---------------------------------------------------------------------------
# stress harness
# ---------------------------------------------------------------------------

STRESS_GAPS = (10.0, 12.0, 16.0, 20.0, 24.0, 32.0, 64.0, 128.0)


def stress_test(predictor: Optional[Predictor], stations: StationTable, region: Region,
                model: LayeredModel, gaps: Sequence[float] = STRESS_GAPS,
                n_events: int = 500, seed: int = 0, n_p: int = 500,
                window_s: float = 120.0, agg: Optional[AggParams] = None,
                grid_params: Optional[GridParams] = None,
                grid_spacing_km: float = 5.0,
                grid_depths: Sequence[float] = (2.0, 9.0, 16.0, 23.0),
                order: str = "reverse") -> list[dict]:
    """Associate progressively denser synthetic sequences; optionally run the
    grid baseline on the same picks.  Returns one row per (gap, associator).
    """
    agg = agg or AggParams()
    grid: Optional[TravelTimeGrid] = None
    if grid_params is not None:
        grid = build_grid(region, grid_depths, grid_spacing_km, stations, model)
    rows = []
    for gi, gap in enumerate(gaps):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([seed, 101 + gi])))
        picks, truth = generate_stress_sequence(stations, region, model,
                                                n_events=n_events, max_gap_s=gap,
                                                rng=rng)
        origins = [ev.origin_time for ev in truth.events]
        mean_gap = float(np.mean(np.diff(origins))) if len(origins) > 1 else 0.0
        truth_sets = truth.pick_sets(min_picks=1)

        if predictor is None:  # oracle mode: label from this gap's own truth
            pred = truth.pick_event_ids(len(picks))
            name = "oracle-linker"
        else:
            pred = predictor
            name = "linker" if isinstance(predictor, LinkerModel) else "custom"
        windows = build_subsequences(picks, stations, region, n_p, window_s)
        linked = iter_linked(windows, pred, n_picks=len(picks))
        catalog = associate(linked, agg, order=order)
        report = score(catalog, truth_sets)
        rows.append({"max_gap_s": float(gap), "mean_gap_s": mean_gap,
                     "associator": name, **report.as_dict()})

        if grid is not None:
            gcat = grid_associate(picks, grid, grid_params)
            greport = score(gcat, truth_sets)
            rows.append({"max_gap_s": float(gap), "mean_gap_s": mean_gap,
                         "associator": "grid", **greport.as_dict()})
    return rows


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

_METRIC_COLS = ("event_precision", "event_recall", "phase_precision", "phase_recall")


def write_metrics_json(path, payload, header: Optional[dict] = None) -> None:
    doc = {"header": header or {}}
    if isinstance(payload, MetricsReport):
        doc["metrics"] = payload.as_dict()
    else:
        doc["rows"] = payload
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_tidy_csv(path, rows: list[dict], id_cols: Sequence[str]) -> None:
    """Long-format CSV: one line per (row id, metric)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*id_cols, "metric", "value"])
        for row in rows:
            for metric in _METRIC_COLS:
                w.writerow([*(row[c] for c in id_cols), metric, repr(row[metric])])


def read_tidy_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def write_pr_csv(path, sweep: list[tuple[int, MetricsReport]]) -> None:
    rows = [{"n_min": n, **rep.as_dict()} for n, rep in sweep]
    write_tidy_csv(path, rows, id_cols=("n_min",))


def write_stress_csv(path, rows: list[dict]) -> None:
    write_tidy_csv(path, rows, id_cols=("max_gap_s", "mean_gap_s", "associator"))


_SVG_COLORS = ("#1b6ca8", "#c43d3d", "#3d8f4e", "#8a57b0", "#d08a2e", "#557080")


def svg_line_plot(path, series: dict[str, list[tuple[float, float]]],
                  title: str = "", xlabel: str = "", ylabel: str = "",
                  width: int = 640, height: int = 420) -> None:
    """Dependency-free line plot for stress/PR curves."""
    pad_l, pad_r, pad_t, pad_b = 62, 16, 34, 46
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(0.0, min(ys)), max(1.0, max(ys))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def sx(x):
        return pad_l + (x - x_lo) / (x_hi - x_lo) * (width - pad_l - pad_r)

    def sy(y):
        return height - pad_b - (y - y_lo) / (y_hi - y_lo) * (height - pad_t - pad_b)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" '
           f'font-size="14">{title}</text>']
    axis = (f'<line x1="{pad_l}" y1="{height - pad_b}" x2="{width - pad_r}" '
            f'y2="{height - pad_b}" stroke="black"/>'
            f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" '
            f'y2="{height - pad_b}" stroke="black"/>')
    out.append(axis)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        out.append(f'<text x="{sx(xv):.1f}" y="{height - pad_b + 16}" '
                   f'text-anchor="middle" font-size="10">{xv:g}</text>')
        out.append(f'<text x="{pad_l - 6}" y="{sy(yv) + 3:.1f}" '
                   f'text-anchor="end" font-size="10">{yv:g}</text>')
    out.append(f'<text x="{(pad_l + width - pad_r) / 2:.0f}" y="{height - 10}" '
               f'text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="14" y="{(pad_t + height - pad_b) / 2:.0f}" '
               f'text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {(pad_t + height - pad_b) / 2:.0f})">'
               f'{ylabel}</text>')
    for i, (name, pts) in enumerate(series.items()):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        pts = sorted(pts)
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="1.6"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="2.4" '
                       f'fill="{color}"/>')
        ly = pad_t + 14 * i
        out.append(f'<line x1="{width - pad_r - 130}" y1="{ly}" '
                   f'x2="{width - pad_r - 110}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{width - pad_r - 104}" y="{ly + 4}" '
                   f'font-size="11">{name}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
