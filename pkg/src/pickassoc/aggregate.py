"""Turn per-root link predictions into event clusters.

For each sub-sequence whose linked picks number at least ``n_nuc``, a
candidate cluster nucleates from exactly those picks.  The existing cluster
sharing the most picks with the candidate absorbs it when the overlap
exceeds ``n_merge``; otherwise the candidate starts a new cluster.  After
all sub-sequences are processed, clusters smaller than ``n_min`` are
dropped.

Batch mode walks the sub-sequences in reverse root-time order; streaming
mode walks forward and retires a cluster once the stream has moved more
than one window length past its newest pick (no later candidate can still
overlap it), keeping memory bounded by the active clusters only.  On
cleanly separated sequences both orders produce identical catalogs; they
can differ on pathological overlap ties.

Ties for the maximum overlap go to the cluster whose earliest pick is
earliest (global pick indices are time-ordered, so the smallest index
decides).  A pick may in rare cases end up in two clusters (merging binds a
candidate to a single best cluster); a count of such picks is logged.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .velmod import Phase

log = logging.getLogger(__name__)

CATALOG_FORMAT = "pickassoc-catalog"
CATALOG_VERSION = 1


@dataclass
class AggParams:
    n_nuc: int = 8
    n_merge: int = 7
    n_min: int = 8

    def __post_init__(self):
        if min(self.n_nuc, self.n_merge, self.n_min) < 1:
            raise ValueError("aggregation thresholds must be >= 1")
        if self.n_merge > self.n_nuc - 1:
            raise ValueError(f"n_merge must be <= n_nuc - 1 "
                             f"({self.n_merge} > {self.n_nuc - 1})")


@dataclass
class LinkedWindow:
    """The aggregation-relevant output of predicting one sub-sequence."""

    root_index: int
    root_time: float
    pick_indices: np.ndarray  # global indices of label-1 picks
    pick_times: np.ndarray


def linked_window(subseq, prediction) -> LinkedWindow:
    """Pair a SubSequence with its Prediction for the aggregator."""
    rows = np.nonzero(prediction.labels[: subseq.n_real])[0]
    return LinkedWindow(root_index=subseq.root_index, root_time=subseq.root_time,
                        pick_indices=subseq.member_indices[rows],
                        pick_times=subseq.member_times[rows])


@dataclass
class Cluster:
    """A set of picks declared to share one origin."""

    picks: set[int]
    roots: list[int] = field(default_factory=list)
    max_time: float = -np.inf

    @property
    def earliest(self) -> int:
        return min(self.picks)

    def __len__(self) -> int:
        return len(self.picks)


class _Merger:
    """Shared nucleation/merge state for both processing orders."""

    def __init__(self, params: AggParams):
        self.params = params
        self.clusters: list[Optional[Cluster]] = []
        self.active: list[int] = []
        self.by_pick: dict[int, list[int]] = {}

    def add(self, win: LinkedWindow) -> None:
        if win.pick_indices.size < self.params.n_nuc:
            return
        candidate = set(int(i) for i in win.pick_indices)
        overlap: dict[int, int] = {}
        for pick in candidate:
            for ci in self.by_pick.get(pick, ()):
                overlap[ci] = overlap.get(ci, 0) + 1
        best_ci, best_n, best_earliest = -1, 0, None
        for ci, n in overlap.items():
            e = self.clusters[ci].earliest
            if n > best_n or (n == best_n and e < best_earliest):
                best_ci, best_n, best_earliest = ci, n, e
        if best_ci >= 0 and best_n > self.params.n_merge:
            cluster = self.clusters[best_ci]
            new_picks = candidate - cluster.picks
            cluster.picks |= new_picks
            cluster.roots.append(win.root_index)
            cluster.max_time = max(cluster.max_time, float(win.pick_times.max()))
            for pick in new_picks:
                self.by_pick.setdefault(pick, []).append(best_ci)
        else:
            ci = len(self.clusters)
            self.clusters.append(Cluster(picks=candidate, roots=[win.root_index],
                                         max_time=float(win.pick_times.max())))
            self.active.append(ci)
            for pick in candidate:
                self.by_pick.setdefault(pick, []).append(ci)

    def pop_retired(self, horizon: float) -> list[Cluster]:
        """Remove and return clusters whose newest pick is before ``horizon``."""
        out = []
        still = []
        for ci in self.active:
            cluster = self.clusters[ci]
            if cluster.max_time < horizon:
                out.append(cluster)
                for pick in cluster.picks:
                    refs = self.by_pick[pick]
                    refs.remove(ci)
                    if not refs:
                        del self.by_pick[pick]
                self.clusters[ci] = None
            else:
                still.append(ci)
        self.active = still
        out.sort(key=lambda c: c.earliest)
        return out

    def remaining(self) -> list[Cluster]:
        return [c for c in self.clusters if c is not None]


def _warn_duplicates(clusters: list[Cluster]) -> None:
    counts: dict[int, int] = {}
    for c in clusters:
        for pick in c.picks:
            counts[pick] = counts.get(pick, 0) + 1
    dupes = sum(1 for n in counts.values() if n > 1)
    if dupes:
        log.warning("%d picks appear in more than one cluster", dupes)


def associate(predictions: Iterable[LinkedWindow], params: AggParams,
              order: str = "reverse") -> list[Cluster]:
    """Cluster a finite stream of linked windows; returns the catalog.

    ``order="reverse"`` (default) processes sub-sequences newest root first;
    ``order="forward"`` processes them oldest first.
    """
    if order not in ("reverse", "forward"):
        raise ValueError(f"order must be 'reverse' or 'forward', got {order!r}")
    windows = list(predictions)
    if order == "reverse":
        windows = windows[::-1]
    merger = _Merger(params)
    for win in windows:
        merger.add(win)
    clusters = merger.remaining()
    _warn_duplicates(clusters)
    kept = [c for c in clusters if len(c) >= params.n_min]
    kept.sort(key=lambda c: c.earliest)
    return kept


def associate_stream(predictions: Iterable[LinkedWindow], params: AggParams,
                     window_s: float | None = None) -> Iterator[Cluster]:
    """Forward streaming associate: yields clusters as they retire.

    Windows only contain picks at or after their root, so once the root time
    passes a cluster's newest pick no later candidate can overlap it and the
    cluster is final.  Memory stays bounded by the active clusters plus one
    window of picks.  (``window_s`` is accepted for symmetry with the batch
    pipeline but the retirement horizon does not need it.)
    """
    merger = _Merger(params)
    for win in predictions:
        merger.add(win)
        for cluster in merger.pop_retired(win.root_time):
            if len(cluster) >= params.n_min:
                yield cluster
    remaining = merger.remaining()
    _warn_duplicates(remaining)
    for cluster in sorted(remaining, key=lambda c: c.earliest):
        if len(cluster) >= params.n_min:
            yield cluster


# ---------------------------------------------------------------------------
# catalog files: JSON lines, one event per line after a header record
# ---------------------------------------------------------------------------

def write_catalog(path, clusters: Iterable[Cluster], picks=None,
                  stations=None, header_extra: Optional[dict] = None) -> None:
    """Write clusters as JSON lines.

    Each event line carries the member pick indices and, when the pick
    stream and station table are given, the (station, time, phase) triplet
    of every member.
    """
    with open(path, "w") as fh:
        header = {"type": "header", "format": CATALOG_FORMAT,
                  "version": CATALOG_VERSION}
        if header_extra:
            header.update(header_extra)
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for k, cluster in enumerate(clusters):
            indices = sorted(cluster.picks)
            rec = {"event": k, "n_roots": len(cluster.roots),
                   "pick_indices": indices}
            if picks is not None:
                members = []
                for i in indices:
                    p = picks[i]
                    members.append({
                        "station": stations.ids[p.station_index]
                        if stations is not None else p.station_index,
                        "time": p.time,
                        "phase": Phase(p.phase).name,
                    })
                rec["picks"] = members
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_catalog(path) -> list[Cluster]:
    clusters = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("type") == "header":
                continue
            if "pick_indices" not in rec:
                raise ValueError(f"{path}:{lineno}: event record without pick_indices")
            clusters.append(Cluster(picks=set(rec["pick_indices"]),
                                    roots=[0] * rec.get("n_roots", 0)))
    return clusters
