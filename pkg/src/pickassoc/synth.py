"""Synthetic pick sequences: training windows and long stress-test streams.

Training windows are produced by a fixed rule list, in order:

1.  event count drawn uniformly from {0..max_events};
2.  one hypocenter drawn uniformly over the region (lat, lon in normalized
    [0,1], depth in depth_range) and initially shared by all events;
3.  each event independently re-drawn to a fresh hypocenter with
    probability reassign_prob, so windows contain events that overlap in
    time but originate in different parts of the network;
4.  first origin time drawn from first_origin_range (may precede the window);
5.  successive origin gaps drawn from inter_event_range;
6.  per-event maximum source-receiver distance drawn from max_dist_range;
7.  P and S arrivals computed for every station within that distance;
8.  each pick independently discarded with probability discard_prob;
9.  a uniform pick error from pick_error_range added to each arrival;
10. a uniform count {0..false_pick_max} of false picks scattered uniformly
    over stations, the window, and both phase labels;
11. picks outside [0, window_s] removed;
12. remaining picks time-sorted (ties by station index then phase), the
    first n_p retained, the feature matrix zero-padded to n_p rows.

The label vector marks the root pick's event: if the first retained pick
belongs to an event, that event's retained picks are labeled 1; otherwise
only position 0 is labeled.  Windows with no picks at all are emitted with
``empty=True`` and skipped by training.

Every random quantity of one window is drawn from that window's own
generator in the order above, so datasets are reproducible pick-for-pick
regardless of chunking or worker count.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import window as window_mod
from .geo import Region, StationTable, epicentral_distances_km
from .velmod import LayeredModel, Phase, travel_times

DATASET_FORMAT = "pickassoc-dataset"
DATASET_VERSION = 1


@dataclass
class SynthConfig:
    """Knobs of the window generator; defaults follow the full-scale recipe."""

    max_events: int = 20
    depth_range: tuple[float, float] = (0.0, 25.0)
    reassign_prob: float = 0.10
    first_origin_range: tuple[float, float] = (-60.0, 60.0)
    inter_event_range: tuple[float, float] = (3.0, 20.0)
    max_dist_range: tuple[float, float] = (20.0, 100.0)
    discard_prob: float = 0.5
    pick_error_range: tuple[float, float] = (-0.5, 0.5)
    false_pick_max: int = 500
    window_s: float = 120.0
    n_p: int = 500
    seed: int = 0

    def __post_init__(self):
        for name in ("depth_range", "first_origin_range", "inter_event_range",
                     "max_dist_range", "pick_error_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} is not well-ordered: ({lo}, {hi})")
        for name in ("reassign_prob", "discard_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability, got {p}")
        if self.max_events < 0 or self.false_pick_max < 0:
            raise ValueError("counts must be non-negative")
        if self.n_p < 1:
            raise ValueError("n_p must be >= 1")
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")


@dataclass(frozen=True)
class Pick:
    """One phase detection: station, time (s), phase, and optional truth link."""

    station_index: int
    time: float
    phase: Phase
    event_id: Optional[int] = None  # None = false pick


@dataclass(frozen=True)
class TruthEvent:
    lat: float
    lon: float
    depth: float
    origin_time: float
    pick_indices: tuple[int, ...]
    reassigned: bool = False
    n_candidates: int = 0  # in-range station-phase pairs before discard
    n_kept: int = 0        # after discard, before the window crop


@dataclass
class GroundTruth:
    events: list[TruthEvent] = field(default_factory=list)

    def pick_event_ids(self, n_picks: int) -> np.ndarray:
        """Array mapping pick index -> event index (-1 for false picks)."""
        ids = np.full(n_picks, -1, dtype=np.int64)
        for k, ev in enumerate(self.events):
            for i in ev.pick_indices:
                ids[i] = k
        return ids

    def pick_sets(self, min_picks: int = 1) -> list[set[int]]:
        """Pick-index sets of events with at least ``min_picks`` picks."""
        return [set(ev.pick_indices) for ev in self.events
                if len(ev.pick_indices) >= min_picks]


@dataclass
class WindowSample:
    picks: list[Pick]
    labels: np.ndarray           # (n_p,) uint8
    features: np.ndarray         # (n_p, 5)
    truth: GroundTruth
    empty: bool

    @property
    def n_real(self) -> int:
        return len(self.picks)

    @property
    def root_event(self) -> int:
        if self.empty:
            return -1
        eid = self.picks[0].event_id
        return -1 if eid is None else eid


# ---------------------------------------------------------------------------
# draw phase: all randomness, no travel times
# ---------------------------------------------------------------------------

@dataclass
class _EventDraw:
    lat: float
    lon: float
    depth: float
    origin: float
    reassigned: bool
    station_idx: np.ndarray   # kept picks after discard
    dist_km: np.ndarray
    phase: np.ndarray         # 0/1
    error_s: np.ndarray
    n_candidates: int
    n_kept: int


@dataclass
class _WindowDraw:
    events: list[_EventDraw]
    false_station: np.ndarray
    false_time: np.ndarray
    false_phase: np.ndarray


def _draw_window(cfg: SynthConfig, stations: StationTable, region: Region,
                 rng: np.random.Generator) -> _WindowDraw:
    n_events = int(rng.integers(0, cfg.max_events + 1))

    base_lat = region.lat_min + rng.uniform() * region.lat_span
    base_lon = region.lon_min + rng.uniform() * region.lon_span
    base_depth = rng.uniform(*cfg.depth_range)

    reassigned = rng.random(n_events) < cfg.reassign_prob
    lats = np.full(n_events, base_lat)
    lons = np.full(n_events, base_lon)
    depths = np.full(n_events, base_depth)
    for e in range(n_events):
        if reassigned[e]:
            lats[e] = region.lat_min + rng.uniform() * region.lat_span
            lons[e] = region.lon_min + rng.uniform() * region.lon_span
            depths[e] = rng.uniform(*cfg.depth_range)

    origins = np.empty(n_events)
    if n_events:
        origins[0] = rng.uniform(*cfg.first_origin_range)
        gaps = rng.uniform(*cfg.inter_event_range, size=n_events - 1)
        origins[1:] = origins[0] + np.cumsum(gaps)
    max_dist = rng.uniform(*cfg.max_dist_range, size=n_events)

    events = []
    for e in range(n_events):
        dists = epicentral_distances_km(lats[e], lons[e], stations.lats, stations.lons)
        in_range = np.nonzero(dists <= max_dist[e])[0]
        # candidates ordered station-major, P then S
        cand_station = np.repeat(in_range, 2)
        cand_phase = np.tile(np.array([0, 1]), len(in_range))
        keep = rng.random(cand_station.size) >= cfg.discard_prob
        kept_station = cand_station[keep]
        kept_phase = cand_phase[keep]
        errors = rng.uniform(*cfg.pick_error_range, size=kept_station.size)
        events.append(_EventDraw(
            lat=lats[e], lon=lons[e], depth=depths[e], origin=origins[e],
            reassigned=bool(reassigned[e]),
            station_idx=kept_station, dist_km=dists[kept_station],
            phase=kept_phase, error_s=errors,
            n_candidates=int(cand_station.size), n_kept=int(kept_station.size)))

    n_false = int(rng.integers(0, cfg.false_pick_max + 1))
    false_station = rng.integers(0, len(stations), size=n_false)
    false_time = rng.uniform(0.0, cfg.window_s, size=n_false)
    false_phase = rng.integers(0, 2, size=n_false)
    return _WindowDraw(events, false_station, false_time, false_phase)


# ---------------------------------------------------------------------------
# assembly phase: deterministic math
# ---------------------------------------------------------------------------

def _assemble(cfg: SynthConfig, draw: _WindowDraw, arrivals: list[np.ndarray],
              sx: np.ndarray, sy: np.ndarray) -> WindowSample:
    """Build the window from drawn randomness + precomputed arrival times."""
    stations, times, phases, event_ids = [], [], [], []
    for e, ev in enumerate(draw.events):
        t = ev.origin + arrivals[e] + ev.error_s
        stations.append(ev.station_idx)
        times.append(t)
        phases.append(ev.phase)
        event_ids.append(np.full(t.size, e, dtype=np.int64))
    stations.append(draw.false_station)
    times.append(draw.false_time)
    phases.append(draw.false_phase)
    event_ids.append(np.full(draw.false_time.size, -1, dtype=np.int64))

    st = np.concatenate(stations).astype(np.int64)
    t = np.concatenate(times)
    ph = np.concatenate(phases).astype(np.int64)
    ev = np.concatenate(event_ids)

    in_window = (t >= 0.0) & (t <= cfg.window_s)
    st, t, ph, ev = st[in_window], t[in_window], ph[in_window], ev[in_window]
    order = np.lexsort((ph, st, t))
    st, t, ph, ev = st[order], t[order], ph[order], ev[order]
    if st.size > cfg.n_p:
        st, t, ph, ev = st[: cfg.n_p], t[: cfg.n_p], ph[: cfg.n_p], ev[: cfg.n_p]

    picks = [Pick(int(s), float(tt), Phase(int(p)), None if e < 0 else int(e))
             for s, tt, p, e in zip(st, t, ph, ev)]

    events = []
    for e, evd in enumerate(draw.events):
        members = tuple(np.nonzero(ev == e)[0].tolist())
        events.append(TruthEvent(
            lat=evd.lat, lon=evd.lon, depth=evd.depth, origin_time=evd.origin,
            pick_indices=members, reassigned=evd.reassigned,
            n_candidates=evd.n_candidates, n_kept=evd.n_kept))
    truth = GroundTruth(events)

    labels = np.zeros(cfg.n_p, dtype=np.uint8)
    empty = st.size == 0
    if not empty:
        root_event = ev[0]
        if root_event >= 0:
            labels[np.nonzero(ev == root_event)[0]] = 1
        else:
            labels[0] = 1
    features = window_mod.featurize(t, st, ph, sx, sy,
                                    root_time=float(t[0]) if not empty else 0.0,
                                    n_p=cfg.n_p, window_s=cfg.window_s)
    return WindowSample(picks=picks, labels=labels, features=features,
                        truth=truth, empty=empty)


def _arrival_batch(model: LayeredModel, draws: list[_WindowDraw]) -> list[list[np.ndarray]]:
    """Travel times for every kept pick of every draw, batched by phase."""
    depths, dists, phases, owner = [], [], [], []
    for w, draw in enumerate(draws):
        for e, ev in enumerate(draw.events):
            n = ev.station_idx.size
            depths.append(np.full(n, ev.depth))
            dists.append(ev.dist_km)
            phases.append(ev.phase)
            owner.append(np.full(n, w * 10_000_000 + e, dtype=np.int64))
    out: list[list[np.ndarray]] = [[np.empty(0)] * len(d.events) for d in draws]
    if not depths:
        return out
    depths_all = np.concatenate(depths)
    dists_all = np.concatenate(dists)
    phases_all = np.concatenate(phases)
    tt = np.empty_like(depths_all)
    for ph in (Phase.P, Phase.S):
        m = phases_all == int(ph)
        if np.any(m):
            tt[m] = travel_times(model, depths_all[m], dists_all[m], ph)
    pos = 0
    for w, draw in enumerate(draws):
        for e, ev in enumerate(draw.events):
            n = ev.station_idx.size
            out[w][e] = tt[pos: pos + n]
            pos += n
    return out


# ---------------------------------------------------------------------------
# public generators
# ---------------------------------------------------------------------------

def generate_subsequence(cfg: SynthConfig, stations: StationTable, region: Region,
                         model: LayeredModel, rng: np.random.Generator) -> WindowSample:
    """One labeled training window drawn from ``rng`` (see module docstring)."""
    sx, sy = stations.normalized(region)
    draw = _draw_window(cfg, stations, region, rng)
    arrivals = _arrival_batch(model, [draw])[0]
    return _assemble(cfg, draw, arrivals, sx, sy)


def iter_samples(cfg: SynthConfig, stations: StationTable, region: Region,
                 model: LayeredModel, n_samples: int,
                 chunk: int = 256) -> Iterator[WindowSample]:
    """Stream ``n_samples`` windows; chunked internally to batch travel times.

    Sample i is drawn from the i-th child of SeedSequence(cfg.seed), so the
    stream is reproducible and independent of ``chunk`` and of any worker
    split that assigns whole index ranges to workers.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(n_samples)
    sx, sy = stations.normalized(region)
    for start in range(0, n_samples, chunk):
        seeds = children[start: start + chunk]
        draws = [_draw_window(cfg, stations, region, np.random.Generator(np.random.PCG64(s)))
                 for s in seeds]
        arrivals = _arrival_batch(model, draws)
        for draw, arr in zip(draws, arrivals):
            yield _assemble(cfg, draw, arr, sx, sy)


def _chunk_arrays(cfg, stations, region, model, lo, hi):
    feats = np.zeros((hi - lo, cfg.n_p, 5), dtype=np.float32)
    labels = np.zeros((hi - lo, cfg.n_p), dtype=np.uint8)
    n_real = np.zeros(hi - lo, dtype=np.int32)
    empty = np.zeros(hi - lo, dtype=bool)
    n_events = np.zeros(hi - lo, dtype=np.int16)
    root_event = np.zeros(hi - lo, dtype=np.int32)
    children = np.random.SeedSequence(cfg.seed).spawn(hi)[lo:hi]
    sx, sy = stations.normalized(region)
    chunk = 256
    for start in range(0, hi - lo, chunk):
        seeds = children[start: start + chunk]
        draws = [_draw_window(cfg, stations, region,
                              np.random.Generator(np.random.PCG64(s))) for s in seeds]
        arrivals = _arrival_batch(model, draws)
        for j, (draw, arr) in enumerate(zip(draws, arrivals)):
            s = _assemble(cfg, draw, arr, sx, sy)
            i = start + j
            feats[i] = s.features
            labels[i] = s.labels
            n_real[i] = s.n_real
            empty[i] = s.empty
            n_events[i] = len(s.truth.events)
            root_event[i] = s.root_event
    return feats, labels, n_real, empty, n_events, root_event


def generate_dataset(cfg: SynthConfig, stations: StationTable, region: Region,
                     model: LayeredModel, n_samples: int, out_path,
                     val_fraction: float = 0.25, workers: int = 1) -> dict:
    """Write ``n_samples`` windows to an .npz dataset with a 75/25 split marker.

    Returns the header dict.  Bytes are a pure function of the config seed:
    per-sample generators come from spawned seed-sequence children and the
    split marker from one extra child, so reruns (and any worker count)
    reproduce the file exactly.
    """
    if workers > 1 and n_samples >= workers * 64:
        import multiprocessing as mp
        bounds = np.linspace(0, n_samples, workers + 1).astype(int)
        args = [(cfg, stations, region, model, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])]
        with mp.Pool(workers) as pool:
            parts = pool.starmap(_chunk_arrays, args)
        feats, labels, n_real, empty, n_events, root_event = (
            np.concatenate([part[k] for part in parts]) for k in range(6))
    else:
        feats, labels, n_real, empty, n_events, root_event = _chunk_arrays(
            cfg, stations, region, model, 0, n_samples)

    # dedicated stream for the train/validation split marker
    split_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([cfg.seed, 51_773])))
    is_val = split_rng.random(n_samples) < val_fraction

    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "n_samples": int(n_samples),
        "seed": int(cfg.seed),
        "val_fraction": val_fraction,
        "config": asdict(cfg),
    }
    np.savez_compressed(out_path, meta=np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8),
        features=feats, labels=labels, n_real=n_real, empty=empty,
        is_val=is_val, n_events=n_events, root_event=root_event)
    return header


@dataclass
class Dataset:
    header: dict
    features: np.ndarray
    labels: np.ndarray
    n_real: np.ndarray
    empty: np.ndarray
    is_val: np.ndarray
    n_events: np.ndarray
    root_event: np.ndarray


def load_dataset(path) -> Dataset:
    with np.load(path) as z:
        header = json.loads(bytes(z["meta"]).decode())
        if header.get("format") != DATASET_FORMAT:
            raise ValueError(f"{path}: not a {DATASET_FORMAT} file")
        return Dataset(header=header, features=z["features"], labels=z["labels"],
                       n_real=z["n_real"], empty=z["empty"], is_val=z["is_val"],
                       n_events=z["n_events"], root_event=z["root_event"])


def generate_stress_sequence(stations: StationTable, region: Region,
                             model: LayeredModel, n_events: int, max_gap_s: float,
                             rng: np.random.Generator,
                             depth_range=(0.0, 25.0), max_dist_range=(20.0, 100.0),
                             pick_error_range=(-0.5, 0.5)) -> tuple[list[Pick], GroundTruth]:
    """A continuous multi-event sequence for stress testing.

    Unlike training windows there is no shared hypocenter, no discard, no
    false picks, and no time crop: every event gets its own uniform
    hypocenter, inter-event gaps come from U[0, max_gap_s], and all in-range
    P/S arrivals are kept (with uniform pick errors).
    """
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    if max_gap_s <= 0:
        raise ValueError("max_gap_s must be positive")
    lats = region.lat_min + rng.uniform(size=n_events) * region.lat_span
    lons = region.lon_min + rng.uniform(size=n_events) * region.lon_span
    depths = rng.uniform(*depth_range, size=n_events)
    gaps = rng.uniform(0.0, max_gap_s, size=n_events - 1)
    origins = np.concatenate([[0.0], np.cumsum(gaps)])
    max_dist = rng.uniform(*max_dist_range, size=n_events)

    ev_station, ev_dist, ev_phase, ev_err, ev_id = [], [], [], [], []
    for e in range(n_events):
        dists = epicentral_distances_km(lats[e], lons[e], stations.lats, stations.lons)
        in_range = np.nonzero(dists <= max_dist[e])[0]
        st = np.repeat(in_range, 2)
        ph = np.tile(np.array([0, 1]), len(in_range))
        err = rng.uniform(*pick_error_range, size=st.size)
        ev_station.append(st)
        ev_dist.append(dists[st])
        ev_phase.append(ph)
        ev_err.append(err)
        ev_id.append(np.full(st.size, e, dtype=np.int64))

    st = np.concatenate(ev_station).astype(np.int64)
    dist = np.concatenate(ev_dist)
    ph = np.concatenate(ev_phase).astype(np.int64)
    err = np.concatenate(ev_err)
    eid = np.concatenate(ev_id)
    depth_per_pick = depths[eid]
    origin_per_pick = origins[eid]

    tt = np.empty_like(dist)
    for phase in (Phase.P, Phase.S):
        m = ph == int(phase)
        if np.any(m):
            tt[m] = travel_times(model, depth_per_pick[m], dist[m], phase)
    t = origin_per_pick + tt + err

    order = np.lexsort((ph, st, t))
    st, t, ph, eid = st[order], t[order], ph[order], eid[order]
    picks = [Pick(int(s), float(tt_), Phase(int(p)), int(e))
             for s, tt_, p, e in zip(st, t, ph, eid)]
    events = []
    for e in range(n_events):
        members = tuple(np.nonzero(eid == e)[0].tolist())
        events.append(TruthEvent(lat=float(lats[e]), lon=float(lons[e]),
                                 depth=float(depths[e]), origin_time=float(origins[e]),
                                 pick_indices=members))
    return picks, GroundTruth(events)
