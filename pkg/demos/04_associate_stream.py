"""Associate a continuous synthetic pick stream into an event catalog.

Uses the ground-truth oracle as the linker stand-in so the demo runs
instantly without a checkpoint; swap in a trained model (see demo 03) via
``LinkerModel.load`` for the real thing.
"""

import pathlib

import numpy as np

from pickassoc.aggregate import AggParams, associate, write_catalog
from pickassoc.evaluate import iter_linked, score
from pickassoc.geo import Region, load_stations
from pickassoc.synth import generate_stress_sequence
from pickassoc.velmod import load_model
from pickassoc.window import build_subsequences

HERE = pathlib.Path(__file__).parent
stations = load_stations(HERE / "data" / "stations.csv")
model = load_model(HERE / "data" / "velocity_model.txt")
region = Region(34.0, 35.0, -118.0, -117.0)

rng = np.random.default_rng(4)
picks, truth = generate_stress_sequence(stations, region, model,
                                        n_events=60, max_gap_s=64.0, rng=rng)
print(f"stream: {len(picks)} picks from {len(truth.events)} events over "
      f"{picks[-1].time - picks[0].time:.0f} s")

windows = build_subsequences(picks, stations, region, n_p=500, window_s=120.0)
linked = iter_linked(windows, truth.pick_event_ids(len(picks)))
catalog = associate(linked, AggParams())

report = score(catalog, truth.pick_sets())
print(f"declared {report.n_detected} events against {report.n_truth} observable")
print(f"event precision {report.event_precision:.3f}, recall {report.event_recall:.3f}")

out = HERE / "demo_catalog.jsonl"
write_catalog(out, catalog, picks=picks, stations=stations)
print(f"wrote {out}")
