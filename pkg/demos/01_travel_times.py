"""Travel-time curves from the bundled 1D crust model.

Computes first-arrival P and S times over distance for a few source depths
and prints a small table; optionally writes an SVG plot next to this file.
"""

import pathlib

import numpy as np

from pickassoc.evaluate import svg_line_plot
from pickassoc.velmod import Phase, load_model, travel_times

HERE = pathlib.Path(__file__).parent
model = load_model(HERE / "data" / "velocity_model.txt")

distances = np.linspace(0.0, 100.0, 21)
print("first arrivals (s) for the bundled crust model")
print(f"{'dist_km':>8} {'P@5km':>8} {'S@5km':>8} {'P@15km':>8} {'S@15km':>8}")
series = {}
for depth in (5.0, 15.0):
    zs = np.full(distances.shape, depth)
    p = travel_times(model, zs, distances, Phase.P)
    s = travel_times(model, zs, distances, Phase.S)
    series[f"P depth {depth:.0f} km"] = list(zip(distances, p))
    series[f"S depth {depth:.0f} km"] = list(zip(distances, s))

p5 = dict(series["P depth 5 km"])
s5 = dict(series["S depth 5 km"])
p15 = dict(series["P depth 15 km"])
s15 = dict(series["S depth 15 km"])
for d in distances:
    print(f"{d:8.1f} {p5[d]:8.2f} {s5[d]:8.2f} {p15[d]:8.2f} {s15[d]:8.2f}")

out = HERE / "travel_times.svg"
svg_line_plot(out, series, title="first arrivals, bundled crust model",
              xlabel="epicentral distance (km)", ylabel="travel time (s)")
print(f"\nwrote {out}")
