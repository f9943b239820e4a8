"""Draw a few synthetic training windows and show their anatomy.

Each window is a fixed-length, time-sorted slice of picks: real arrivals
from a handful of co-located (sometimes scattered) events plus uniform
false picks, with the label vector marking the picks that share the root
pick's origin.
"""

import pathlib

import numpy as np

from pickassoc.geo import Region, load_stations
from pickassoc.synth import SynthConfig, generate_subsequence
from pickassoc.velmod import load_model

HERE = pathlib.Path(__file__).parent
stations = load_stations(HERE / "data" / "stations.csv")
model = load_model(HERE / "data" / "velocity_model.txt")
region = Region(34.0, 35.0, -118.0, -117.0)

cfg = SynthConfig(n_p=50, false_pick_max=60, seed=11)
rng = np.random.default_rng(11)

for k in range(3):
    sample = generate_subsequence(cfg, stations, region, model, rng)
    n_events = len(sample.truth.events)
    print(f"\nwindow {k}: {sample.n_real} picks, {n_events} events drawn, "
          f"root event {sample.root_event}, {int(sample.labels.sum())} linked")
    print(f"  {'row':>3} {'t(s)':>7} {'station':>7} {'phase':>5} {'label':>5}")
    for row, p in enumerate(sample.picks[:12]):
        print(f"  {row:>3} {p.time:7.2f} {stations.ids[p.station_index]:>7} "
              f"{p.phase.name:>5} {int(sample.labels[row]):>5}")
    if sample.n_real > 12:
        print(f"  ... {sample.n_real - 12} more rows")
