"""Generic grid back-projection associator used as the classical baseline.

A travel-time table is precomputed on a lat/lon/depth lattice over the
region.  Association slides candidate origin times along a fixed lattice
(step ``origin_time_step``): every unconsumed pick votes for the (node,
origin) cells whose predicted arrival matches its time within
``residual_tol``.  Within a time segment, the best-scoring cell is
repeatedly extracted: if at least ``min_picks`` picks match, an event is
declared, its picks are consumed, and further declarations within
``dedup_window`` of the accepted origin are suppressed.

This is a faithful generic back-projection scheme, not a clone of any
proprietary associator; see the repository notes on how it differs from a
global best-first extraction (best-first is applied within long bounded
time segments so multi-hour streams need not hold a full node-by-time
histogram).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregate import Cluster
from .geo import Region, StationTable, epicentral_distances_km
from .velmod import LayeredModel, Phase, travel_times


class GridMemoryError(ValueError):
    """The travel-time table would exceed the configured memory cap."""


@dataclass
class GridParams:
    residual_tol: float = 1.5
    min_picks: int = 8
    origin_time_step: float = 1.0
    dedup_window: float = 6.0

    def __post_init__(self):
        for name in ("residual_tol", "min_picks", "origin_time_step", "dedup_window"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TravelTimeGrid:
    lats: np.ndarray      # (n_nodes,)
    lons: np.ndarray
    depths: np.ndarray
    times: np.ndarray     # (n_nodes, n_stations, 2) seconds
    spacing_km: float

    @property
    def n_nodes(self) -> int:
        return len(self.lats)

    @property
    def max_time(self) -> float:
        return float(self.times.max())


def _axis(lo: float, hi: float, span_km: float, spacing_km: float) -> np.ndarray:
    n = int(round(span_km / spacing_km)) + 1
    if n <= 1:
        return np.asarray([(lo + hi) / 2.0])
    return np.linspace(lo, hi, n)


def build_grid(region: Region, depth_levels, spacing_km: float,
               stations: StationTable, model: LayeredModel,
               max_bytes: int = 1 << 30) -> TravelTimeGrid:
    """Tabulate P and S first arrivals from every lattice node to every station."""
    if spacing_km <= 0:
        raise ValueError("spacing_km must be positive")
    depth_levels = np.asarray(depth_levels, dtype=float)
    if depth_levels.size == 0:
        raise ValueError("need at least one depth level")
    km_per_deg = 111.195
    lat_axis = _axis(region.lat_min, region.lat_max,
                     region.lat_span * km_per_deg, spacing_km)
    mid_lat = 0.5 * (region.lat_min + region.lat_max)
    lon_axis = _axis(region.lon_min, region.lon_max,
                     region.lon_span * km_per_deg * np.cos(np.radians(mid_lat)),
                     spacing_km)

    lat_g, lon_g, dep_g = np.meshgrid(lat_axis, lon_axis, depth_levels, indexing="ij")
    lats, lons, deps = lat_g.ravel(), lon_g.ravel(), dep_g.ravel()
    n_nodes = lats.size
    estimate = n_nodes * len(stations) * 2 * 8
    if estimate > max_bytes:
        raise GridMemoryError(
            f"travel-time table needs ~{estimate / 1e6:.0f} MB for {n_nodes} nodes "
            f"x {len(stations)} stations (cap {max_bytes / 1e6:.0f} MB); "
            f"increase spacing_km or the cap")

    times = np.empty((n_nodes, len(stations), 2))
    for s in range(len(stations)):
        dists = epicentral_distances_km(float(stations.lats[s]), float(stations.lons[s]),
                                        lats, lons)
        for phase in (Phase.P, Phase.S):
            times[:, s, int(phase)] = travel_times(model, deps, dists, phase)
    return TravelTimeGrid(lats=lats, lons=lons, depths=deps, times=times,
                          spacing_km=spacing_km)


def grid_associate(picks, grid: TravelTimeGrid, params: GridParams,
                   segment_s: float = 600.0) -> list[Cluster]:
    """Back-project a time-sorted pick stream into a catalog of clusters."""
    n = len(picks)
    if n == 0:
        return []
    t = np.asarray([p.time for p in picks])
    st = np.asarray([p.station_index for p in picks], dtype=np.int64)
    ph = np.asarray([int(p.phase) for p in picks], dtype=np.int64)
    if np.any(np.diff(t) < 0):
        raise ValueError("pick stream not sorted")

    step = params.origin_time_step
    tol = params.residual_tol
    tt_max = grid.max_time + tol
    anchor = np.floor((t[0] - tt_max) / step) * step
    n_nodes = grid.n_nodes
    seg_bins = max(int(round(segment_s / step)), 10)
    n_offsets = int(np.floor(2.0 * tol / step)) + 2

    consumed = np.zeros(n, dtype=bool)
    accepted: list[float] = []
    clusters: list[Cluster] = []

    seg_start_bin = 0
    end_bin = int(np.ceil((t[-1] - anchor) / step)) + 1
    while seg_start_bin < end_bin:
        seg_lo = anchor + seg_start_bin * step
        seg_hi = seg_lo + seg_bins * step
        live = ~consumed & (t >= seg_lo) & (t <= seg_hi + tt_max)
        idx = np.nonzero(live)[0]
        if idx.size < params.min_picks:
            # jump ahead to the next unconsumed pick's earliest plausible origin
            future = np.nonzero(~consumed & (t > seg_hi + tt_max))[0]
            if future.size == 0:
                break
            jump = int(np.floor((t[future[0]] - tt_max - anchor) / step))
            seg_start_bin = max(seg_start_bin + seg_bins, jump)
            continue

        # votes: counts[node, local_bin]
        centers = t[idx][:, None] - grid.times[:, st[idx], ph[idx]].T  # (k, nodes)
        base = np.ceil((centers - tol - seg_lo) / step).astype(np.int64)
        top = np.floor((centers + tol - seg_lo) / step).astype(np.int64)
        counts = np.zeros(n_nodes * seg_bins, dtype=np.int32)
        node_ids = np.broadcast_to(np.arange(n_nodes, dtype=np.int64),
                                   centers.shape)
        for o in range(n_offsets):
            b = base + o
            ok = (b <= top) & (b >= 0) & (b < seg_bins)
            if np.any(ok):
                flat = node_ids[ok] * seg_bins + b[ok]
                counts += np.bincount(flat, minlength=n_nodes * seg_bins
                                      ).astype(np.int32)
        counts = counts.reshape(n_nodes, seg_bins)

        def block(origin: float) -> None:
            lo_b = int(np.ceil((origin - params.dedup_window - seg_lo) / step))
            hi_b = int(np.floor((origin + params.dedup_window - seg_lo) / step))
            counts[:, max(lo_b, 0): max(hi_b + 1, 0)] = -1

        for origin in accepted:
            if origin >= seg_lo - params.dedup_window:
                block(origin)

        while True:
            j = int(np.argmax(counts))
            node, b = divmod(j, seg_bins)
            if counts[node, b] < params.min_picks:
                break
            t0 = seg_lo + b * step
            resid = np.abs(t[idx] - t0 - grid.times[node, st[idx], ph[idx]])
            hit = (resid <= tol) & ~consumed[idx]
            members = idx[hit]
            if members.size < params.min_picks:
                counts[node, b] = -1
                continue
            clusters.append(Cluster(picks=set(int(i) for i in members),
                                    roots=[], max_time=float(t[members].max())))
            consumed[members] = True
            accepted.append(t0)
            # retract the consumed picks' votes
            sub = np.nonzero(hit)[0]
            c_sub = centers[sub]
            base_s = np.ceil((c_sub - tol - seg_lo) / step).astype(np.int64)
            top_s = np.floor((c_sub + tol - seg_lo) / step).astype(np.int64)
            nid = np.broadcast_to(np.arange(n_nodes, dtype=np.int64), c_sub.shape)
            dec = np.zeros(n_nodes * seg_bins, dtype=np.int32)
            for o in range(n_offsets):
                bb = base_s + o
                ok = (bb <= top_s) & (bb >= 0) & (bb < seg_bins)
                if np.any(ok):
                    flat = nid[ok] * seg_bins + bb[ok]
                    dec += np.bincount(flat, minlength=n_nodes * seg_bins
                                       ).astype(np.int32)
            neg = counts < 0  # keep blocked cells blocked
            counts -= dec.reshape(n_nodes, seg_bins)
            counts[neg] = -1
            block(t0)
        seg_start_bin += seg_bins

    clusters.sort(key=lambda c: c.earliest)
    return clusters
