import numpy as np
import pytest

from pickassoc.synth import Pick, SynthConfig, generate_subsequence
from pickassoc.velmod import Phase
from pickassoc.window import build_subsequences, featurize, read_picks_csv, write_picks_csv


def mk_picks(times, station=0, phase=Phase.P):
    return [Pick(station_index=station, time=float(t), phase=phase) for t in times]


def test_padding_rule(stations, region):
    subs = list(build_subsequences(mk_picks([0.0, 1.0, 2.0]), stations, region,
                                   n_p=5, window_s=120.0))
    first = subs[0]
    assert first.n_real == 3
    assert np.all(first.features[3:, 4] == 1.0)
    assert np.all(first.features[3:, :4] == 0.0)
    assert np.all(first.features[:3, 4] == 0.0)


def test_window_cutoff_exclusive_above(stations, region):
    subs = list(build_subsequences(mk_picks([0.0, 120.0, 121.0]), stations, region,
                                   n_p=10, window_s=120.0))
    assert subs[0].n_real == 2          # 121 s pick excluded, 120 s kept
    assert subs[1].n_real == 2          # rooted at 120: includes 121
    assert subs[2].n_real == 1


def test_one_subsequence_per_pick(stations, region):
    rng = np.random.default_rng(0)
    times = np.sort(rng.uniform(0, 500, 57))
    subs = list(build_subsequences(mk_picks(times), stations, region,
                                   n_p=8, window_s=120.0))
    assert len(subs) == 57
    assert [s.root_index for s in subs] == list(range(57))


def test_first_np_retained_when_window_overflows(stations, region):
    times = np.linspace(0.0, 10.0, 25)
    subs = list(build_subsequences(mk_picks(times), stations, region,
                                   n_p=6, window_s=120.0))
    assert subs[0].n_real == 6
    assert subs[0].member_indices.tolist() == [0, 1, 2, 3, 4, 5]


def test_rows_sorted_root_first_tnorm_bounds(stations, region):
    rng = np.random.default_rng(5)
    times = np.sort(rng.uniform(0, 300, 40))
    for sub in build_subsequences(mk_picks(times), stations, region,
                                  n_p=12, window_s=120.0):
        t = sub.features[: sub.n_real, 2]
        assert t[0] == 0.0
        assert np.all(np.diff(t) >= 0.0)
        assert np.all(t <= 1.0)
        pads = sub.features[sub.n_real:, 4]
        assert np.all(pads == 1.0)


def test_member_indices_identify_input_picks(stations, region):
    rng = np.random.default_rng(6)
    picks = [Pick(station_index=int(rng.integers(0, len(stations))),
                  time=float(t), phase=Phase(int(rng.integers(0, 2))))
             for t in np.sort(rng.uniform(0, 200, 30))]
    sx, sy = stations.normalized(region)
    for sub in build_subsequences(picks, stations, region, n_p=10, window_s=60.0):
        for row, gi in enumerate(sub.member_indices):
            p = picks[gi]
            assert sub.features[row, 0] == sx[p.station_index]
            assert sub.features[row, 1] == sy[p.station_index]
            assert sub.features[row, 3] == float(p.phase)


def test_unsorted_stream_rejected(stations, region):
    picks = mk_picks([0.0, 5.0, 4.0])
    with pytest.raises(ValueError, match="not sorted"):
        list(build_subsequences(picks, stations, region, n_p=4, window_s=120.0))


def test_featurize_matches_synth_features(stations, region, crust):
    cfg = SynthConfig(n_p=40, false_pick_max=30, seed=3)
    s = generate_subsequence(cfg, stations, region, crust,
                             np.random.default_rng(17))
    if s.empty:
        pytest.skip("empty draw")
    subs = list(build_subsequences(s.picks, stations, region,
                                   n_p=cfg.n_p, window_s=cfg.window_s))
    assert np.array_equal(subs[0].features, s.features)


def test_pick_csv_roundtrip(tmp_path, stations):
    picks = [Pick(0, 1.25, Phase.P, 3), Pick(5, 2.5, Phase.S, None)]
    path = tmp_path / "picks.csv"
    write_picks_csv(path, picks, stations)
    back = read_picks_csv(path, stations)
    assert back == picks

    bad = tmp_path / "bad.csv"
    bad.write_text("station_id,time_epoch_s,phase\nNOPE,1.0,P\n")
    with pytest.raises(ValueError, match="bad.csv:2"):
        read_picks_csv(bad, stations)
