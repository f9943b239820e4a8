import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from pickassoc.geo import Region, StationTable
from pickassoc.velmod import LayeredModel

# Desk-scale experiment geometry shared by tests and demos: a 1 degree box
# with a 64-station jittered grid and a generic 4-layer crust.  Dense enough
# that an event at the minimum 20 km cutoff distance still reaches several
# stations from almost anywhere in the box.
DESK_REGION = Region(lat_min=34.0, lat_max=35.0, lon_min=-118.0, lon_max=-117.0)

CRUST_LAYERS = ((0.0, 5.5, 3.18), (4.0, 6.3, 3.64), (16.0, 6.7, 3.87), (32.0, 7.8, 4.51))


def desk_station_table(n_side=8, jitter=0.045, seed=20260501) -> StationTable:
    rng = np.random.default_rng(seed)
    lats, lons, ids = [], [], []
    for iy in range(n_side):
        for ix in range(n_side):
            lat = DESK_REGION.lat_min + (iy + 0.5) / n_side * DESK_REGION.lat_span
            lon = DESK_REGION.lon_min + (ix + 0.5) / n_side * DESK_REGION.lon_span
            lat += rng.uniform(-jitter, jitter)
            lon += rng.uniform(-jitter, jitter)
            ids.append(f"S{iy * n_side + ix:02d}")
            lats.append(lat)
            lons.append(lon)
    return StationTable(ids=tuple(ids), lats=np.asarray(lats), lons=np.asarray(lons))


@pytest.fixture(scope="session")
def region() -> Region:
    return DESK_REGION


@pytest.fixture(scope="session")
def stations() -> StationTable:
    return desk_station_table()


@pytest.fixture(scope="session")
def crust() -> LayeredModel:
    tops, vp, vs = zip(*CRUST_LAYERS)
    return LayeredModel(tops, vp, vs)


def random_layered_model(rng) -> LayeredModel:
    """Random 1-5 layer model, mostly velocity-increasing with occasional
    low-velocity zones; interface contrasts kept >= 2% to stay away from
    float-degenerate critical refractions."""
    n = int(rng.integers(1, 6))
    tops = [0.0]
    for _ in range(n - 1):
        tops.append(tops[-1] + rng.uniform(1.5, 12.0))
    vp = [rng.uniform(3.5, 6.0)]
    for _ in range(n - 1):
        factor = rng.uniform(0.90, 0.98) if rng.random() < 0.15 else rng.uniform(1.03, 1.35)
        vp.append(vp[-1] * factor)
    ratio = rng.uniform(1.6, 1.9)
    vs = [v / ratio for v in vp]
    return LayeredModel(tuple(tops), tuple(vp), tuple(vs))


def random_depth_away_from_interfaces(model, rng, lo=0.0, hi=35.0, margin=1e-4):
    while True:
        z = rng.uniform(lo, hi)
        if all(abs(z - t) > margin for t in model.top_depths):
            return z


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
