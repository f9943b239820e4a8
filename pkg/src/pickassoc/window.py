"""Fixed-length feature windows slid one pick at a time over a sorted stream.

Each pick in the stream roots exactly one sub-sequence: the root plus the
following picks no later than ``window_s`` after it, capped at the earliest
``n_p``, zero-padded to ``n_p`` rows.  Feature rows are
(x, y, t_norm, phase, pad): normalized station longitude/latitude, time
relative to the root scaled by ``window_s``, phase flag (0=P, 1=S), and the
padding indicator.  A padded row is all zeros except pad=1; real rows at
the network's lower-left corner are distinguished from pads by pad=0.

The stream is consumed through a bounded buffer of at most ``n_p + 1``
pending picks, so memory does not grow with stream length.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .geo import Region, StationTable
from .velmod import Phase

N_FEATURES = 5


def featurize(times, station_idx, phases, sx, sy, root_time, n_p, window_s) -> np.ndarray:
    """Feature matrix (n_p, 5) for one window's real rows + padding."""
    n = len(times)
    if n > n_p:
        raise ValueError(f"{n} rows exceed n_p={n_p}")
    rows = np.zeros((n_p, N_FEATURES))
    if n:
        station_idx = np.asarray(station_idx, dtype=np.int64)
        rows[:n, 0] = sx[station_idx]
        rows[:n, 1] = sy[station_idx]
        rows[:n, 2] = (np.asarray(times) - root_time) / window_s
        rows[:n, 3] = np.asarray(phases, dtype=float)
    rows[n:, 4] = 1.0
    return rows


@dataclass
class SubSequence:
    """One root pick's feature window plus the global identity of its rows."""

    root_index: int
    root_time: float
    features: np.ndarray        # (n_p, 5)
    member_indices: np.ndarray  # (n_real,) global pick indices, row-aligned
    member_times: np.ndarray    # (n_real,)

    @property
    def n_real(self) -> int:
        return len(self.member_indices)


def build_subsequences(picks, stations: StationTable, region: Region,
                       n_p: int, window_s: float) -> Iterator[SubSequence]:
    """Yield one SubSequence per pick of a time-sorted stream (stride 1).

    ``picks`` may be any iterable of objects with station_index/time/phase
    attributes; it is consumed lazily.  Raises ValueError on out-of-order
    input.
    """
    sx, sy = stations.normalized(region)
    it = iter(picks)
    buf: deque = deque()
    exhausted = False
    last_time = -np.inf
    next_global = 0

    def pull():
        nonlocal exhausted, last_time, next_global
        try:
            p = next(it)
        except StopIteration:
            exhausted = True
            return
        if p.time < last_time:
            raise ValueError(
                f"pick stream not sorted: {p.time} after {last_time} "
                f"(global index {next_global})")
        last_time = p.time
        buf.append((next_global, float(p.time), int(p.station_index), int(p.phase)))
        next_global += 1

    if not exhausted:
        pull()
    while buf:
        root_time = buf[0][1]
        while (not exhausted and len(buf) < n_p
               and buf[-1][1] - root_time <= window_s):
            pull()
        members = []
        for entry in buf:
            if len(members) == n_p or entry[1] - root_time > window_s:
                break
            members.append(entry)
        idx = np.array([m[0] for m in members], dtype=np.int64)
        times = np.array([m[1] for m in members])
        sta = np.array([m[2] for m in members], dtype=np.int64)
        ph = np.array([m[3] for m in members], dtype=np.int64)
        yield SubSequence(
            root_index=int(idx[0]), root_time=root_time,
            features=featurize(times, sta, ph, sx, sy, root_time, n_p, window_s),
            member_indices=idx, member_times=times)
        buf.popleft()
        if not buf and not exhausted:
            pull()


# ---------------------------------------------------------------------------
# pick stream files
# ---------------------------------------------------------------------------

PICK_HEADER = ["station_id", "time_epoch_s", "phase", "event_id"]


def write_picks_csv(path, picks, stations: StationTable) -> None:
    """CSV pick stream; event_id column is blank for unlabeled/false picks."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PICK_HEADER)
        for p in picks:
            eid = "" if p.event_id is None else p.event_id
            w.writerow([stations.ids[p.station_index], repr(float(p.time)),
                        Phase(p.phase).name, eid])


def read_picks_csv(path, stations: StationTable):
    """Read a pick stream CSV (header ``station_id,time_epoch_s,phase[,event_id]``)."""
    from .synth import Pick
    picks = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"station_id", "time_epoch_s", "phase"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected CSV header with {sorted(need)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                eid = row.get("event_id")
                picks.append(Pick(
                    station_index=stations.index_of(row["station_id"]),
                    time=float(row["time_epoch_s"]),
                    phase=Phase.parse(row["phase"]),
                    event_id=int(eid) if eid not in (None, "") else None))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad pick row: {exc}") from None
    return picks
