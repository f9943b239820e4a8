"""Shrink the inter-event spacing until association breaks down.

Runs the oracle-linker pipeline and the grid baseline over sequences whose
maximum inter-event gap sweeps from 128 s down to 10 s (mean gap 64 s down
to 5 s), then writes a tidy CSV and an SVG of the recall curves.  With a
trained checkpoint, pass it through the CLI instead:

    pickassoc stress --config demos/data/config.txt --checkpoint linker.npz \
        --out stress.csv
"""

import pathlib

from pickassoc.evaluate import (stress_test, svg_line_plot, write_stress_csv)
from pickassoc.geo import Region, load_stations
from pickassoc.gridassoc import GridParams
from pickassoc.velmod import load_model

HERE = pathlib.Path(__file__).parent
stations = load_stations(HERE / "data" / "stations.csv")
model = load_model(HERE / "data" / "velocity_model.txt")
region = Region(34.0, 35.0, -118.0, -117.0)

rows = stress_test(None, stations, region, model,
                   gaps=(10.0, 16.0, 24.0, 64.0, 128.0), n_events=120,
                   seed=6, n_p=500, grid_params=GridParams())
print(f"{'max gap':>8} {'mean':>6} {'associator':>14} {'precision':>10} {'recall':>7}")
for r in rows:
    print(f"{r['max_gap_s']:8.0f} {r['mean_gap_s']:6.1f} {r['associator']:>14} "
          f"{r['event_precision']:10.3f} {r['event_recall']:7.3f}")

csv_out = HERE / "demo_stress.csv"
write_stress_csv(csv_out, rows)
series = {}
for r in rows:
    series.setdefault(r["associator"], []).append((r["mean_gap_s"], r["event_recall"]))
svg_out = HERE / "demo_stress.svg"
svg_line_plot(svg_out, series, title="event recall vs mean inter-event gap",
              xlabel="mean gap (s)", ylabel="event recall")
print(f"wrote {csv_out} and {svg_out}")
