import numpy as np
import pytest

from pickassoc.geo import GeoPoint, Region, StationTable, epicentral_distance_km
from pickassoc.gridassoc import (GridMemoryError, GridParams, TravelTimeGrid,
                                 build_grid, grid_associate)
from pickassoc.synth import Pick, generate_stress_sequence
from pickassoc.velmod import Phase, travel_time


def test_params_validation():
    with pytest.raises(ValueError):
        GridParams(residual_tol=0.0)


def test_single_node_grid_matches_travel_time(crust):
    region = Region(34.49, 34.51, -117.51, -117.49)
    table = StationTable(ids=("A",), lats=np.asarray([34.5]), lons=np.asarray([-117.5]))
    grid = build_grid(region, depth_levels=[10.0], spacing_km=500.0,
                      stations=table, model=crust)
    assert grid.n_nodes == 1
    node = GeoPoint(float(grid.lats[0]), float(grid.lons[0]))
    dist = epicentral_distance_km(node, GeoPoint(34.5, -117.5))
    assert grid.times[0, 0, 0] == pytest.approx(travel_time(crust, 10.0, dist, Phase.P))
    assert grid.times[0, 0, 1] == pytest.approx(travel_time(crust, 10.0, dist, Phase.S))
    assert grid.times[0, 0, 0] < grid.times[0, 0, 1]


def test_grid_symmetry_about_station(crust):
    # station at the region center: nodes mirrored in longitude share times
    region = Region(34.0, 35.0, -118.0, -117.0)
    table = StationTable(ids=("C",), lats=np.asarray([34.5]), lons=np.asarray([-117.5]))
    grid = build_grid(region, depth_levels=[8.0], spacing_km=20.0,
                      stations=table, model=crust)
    lons = np.unique(grid.lons)
    lat_pick = grid.lats[0]
    for lon in lons:
        mirror = -235.0 - lon  # reflect about -117.5
        a = np.nonzero((grid.lons == lon) & (grid.lats == lat_pick))[0]
        b = np.nonzero((np.isclose(grid.lons, mirror)) & (grid.lats == lat_pick))[0]
        if len(a) and len(b):
            assert grid.times[a[0], 0, 0] == pytest.approx(grid.times[b[0], 0, 0],
                                                           abs=1e-9)


def test_grid_spot_checks_recompute(stations, region, crust):
    grid = build_grid(region, depth_levels=[2.0, 9.0], spacing_km=30.0,
                      stations=stations, model=crust)
    rng = np.random.default_rng(4)
    for _ in range(25):
        n = int(rng.integers(0, grid.n_nodes))
        s = int(rng.integers(0, len(stations)))
        ph = Phase(int(rng.integers(0, 2)))
        dist = epicentral_distance_km(GeoPoint(float(grid.lats[n]), float(grid.lons[n])),
                                      stations.point(s))
        assert grid.times[n, s, int(ph)] == pytest.approx(
            travel_time(crust, float(grid.depths[n]), dist, ph), abs=1e-9)


def test_memory_cap(stations, region, crust):
    with pytest.raises(GridMemoryError, match="cap"):
        build_grid(region, depth_levels=[2.0, 9.0], spacing_km=1.0,
                   stations=stations, model=crust, max_bytes=10_000)


def test_empty_stream(stations, region, crust):
    grid = build_grid(region, depth_levels=[9.0], spacing_km=30.0,
                      stations=stations, model=crust)
    assert grid_associate([], grid, GridParams()) == []


@pytest.fixture(scope="module")
def desk_grid(stations, region, crust):
    return build_grid(region, depth_levels=[2.0, 9.0, 16.0, 23.0], spacing_km=8.0,
                      stations=stations, model=crust)


def test_noiseless_events_on_nodes_always_detected(stations, region, crust,
                                                   desk_grid):
    # noiseless picks generated exactly at grid nodes: detection rate 100%
    grid = desk_grid
    rng = np.random.default_rng(17)
    for node in rng.integers(0, grid.n_nodes, size=5):
        origin = 30.0
        picks = []
        for s in range(len(stations)):
            for ph in (Phase.P, Phase.S):
                picks.append(Pick(s, origin + float(grid.times[node, s, int(ph)]),
                                  ph, 0))
        picks.sort(key=lambda p: (p.time, p.station_index, int(p.phase)))
        cat = grid_associate(picks, grid, GridParams(min_picks=8))
        assert len(cat) == 1
        assert cat[0].picks == set(range(len(picks)))  # every pick associated


def test_two_events_well_separated_no_cross_talk(stations, region, crust, desk_grid):
    rng = np.random.default_rng(1)  # seed drawing a 106 s separation
    picks, truth = generate_stress_sequence(stations, region, crust, n_events=2,
                                            max_gap_s=128.0, rng=rng)
    assert truth.events[1].origin_time - truth.events[0].origin_time > 60.0
    cat = grid_associate(picks, desk_grid, GridParams())
    assert len(cat) == 2
    ids = truth.pick_event_ids(len(picks))
    for cluster in cat:
        events = {int(ids[i]) for i in cluster.picks}
        assert len(events) == 1  # no mixing across events


def test_declared_events_respect_min_picks_and_residuals(stations, region, crust,
                                                         desk_grid):
    rng = np.random.default_rng(21)
    picks, truth = generate_stress_sequence(stations, region, crust, n_events=30,
                                            max_gap_s=64.0, rng=rng)
    params = GridParams()
    cat = grid_associate(picks, desk_grid, params)
    assert cat, "no events declared"
    t = np.asarray([p.time for p in picks])
    st = np.asarray([p.station_index for p in picks])
    ph = np.asarray([int(p.phase) for p in picks])
    seen = set()
    for cluster in cat:
        assert len(cluster.picks) >= params.min_picks
        assert not (cluster.picks & seen)  # no pick in two events
        seen |= cluster.picks
        members = sorted(cluster.picks)
        # some (node, lattice origin) must explain every member within tol:
        # the lattice is the multiples of origin_time_step, so an admissible
        # origin exists iff ceil((max r - tol)/step)*step <= min r + tol
        step, tol = params.origin_time_step, params.residual_tol
        ok = False
        for node in range(desk_grid.n_nodes):
            res = t[members] - desk_grid.times[node, st[members], ph[members]]
            lo = res.max() - tol - 1e-9
            hi = res.min() + tol + 1e-9
            if np.ceil(lo / step) * step <= hi:
                ok = True
                break
        assert ok
