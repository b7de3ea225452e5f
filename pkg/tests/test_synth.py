import numpy as np
import pytest

from transect_miner.synth import (
    HALF_MAX,
    GroundTruth,
    SynthConfig,
    bump,
    generate,
    jaccard,
    mean_surfaces,
    read_truth,
    score_recovery,
    write_truth,
)
from transect_miner.ingest import write_samples


def test_half_max_constant():
    assert bump(np.array([300.0 * HALF_MAX]), [0.0], 300.0, 3.0)[0] == pytest.approx(2.0, rel=1e-12)


def test_amplitude_one_has_no_bump():
    x = np.linspace(0, 12000, 101)
    np.testing.assert_array_equal(bump(x, [6000.0], 300.0, 1.0), 1.0)
    cfg = SynthConfig(seed=4, anomaly_amplitude=1.0)
    plain = mean_surfaces(cfg, x, np.random.default_rng(0))
    table, truth = generate(cfg)
    assert truth.intervals  # truth still describes where the anomaly would be
    assert plain.shape == (101, 20)


def test_same_seed_identical(tmp_path):
    a, ta = generate(SynthConfig(seed=1))
    b, tb = generate(SynthConfig(seed=1))
    assert a == b and ta == tb
    write_samples(a, tmp_path / "a.csv")
    write_samples(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert generate(SynthConfig(seed=2))[0] != a


def test_layout_and_positivity():
    table, truth = generate(SynthConfig(seed=3, n_samples=50, n_elements=20))
    assert len(table) == 50 and len(table.element_names) == 20
    east = [r.easting for r in table.rows]
    assert east[0] == 0.0 and east[-1] == 12000.0 and east == sorted(east)
    assert all(v > 0 for r in table.rows for v in r.concentrations)
    assert len(truth.planted_elements) == 2
    (lo, hi), = truth.intervals
    assert (lo + hi) / 2 == pytest.approx(6000.0)
    assert hi - lo == pytest.approx(2 * 300 * HALF_MAX)


def test_moments_match_tweedie():
    cfg = SynthConfig(seed=0, n_samples=4000, n_elements=1, n_planted=0, level_range=(50.0, 50.0))
    table, _ = generate(cfg)
    y = np.array([r.concentrations[0] for r in table.rows])
    assert y.mean() == pytest.approx(50.0, rel=0.03)
    assert y.var() == pytest.approx(cfg.dispersion * 50.0**cfg.power, rel=0.1)


def test_config_validation():
    for bad in (dict(anomaly_amplitude=0.5), dict(anomaly_width=0.0), dict(baseline="cubic"),
                dict(planted_elements=("X1",)), dict(n_planted=30), dict(anomaly_centers=(20000.0,))):
        with pytest.raises(ValueError):
            SynthConfig(**bad)


def test_jaccard():
    assert jaccard([(0, 1)], [(0, 1)]) == 1.0
    assert jaccard([(0, 1)], [(2, 3)]) == 0.0
    assert jaccard([(0, 2)], [(1, 3)]) == pytest.approx(1 / 3)
    assert jaccard([(0, 1), (0.5, 2)], [(1, 2)]) == pytest.approx(0.5)
    assert jaccard([], []) is None


def test_score_recovery_conventions():
    ranked = [("E01", "E05", 3.0), ("E02", "E03", 2.0), ("E04", "E06", 1.0)]
    empty = GroundTruth((), (), 12000.0)
    m = score_recovery(ranked, empty, 3)
    assert m.fraction == 0.0 and m.jaccard is None
    truth = GroundTruth(("E01", "E02"), ((5000.0, 7000.0),), 12000.0)
    assert score_recovery(ranked, truth, 2).fraction == 1.0
    m = score_recovery(ranked, truth, 3, top_intervals=[(6000.0, 8000.0)])
    assert m.fraction == pytest.approx(2 / 3)
    assert m.jaccard == pytest.approx(1 / 3)


def test_truth_round_trip(tmp_path):
    _, truth = generate(SynthConfig(seed=9, anomaly_centers=(3000.0, 9000.0)))
    write_truth(truth, tmp_path / "t.json")
    assert read_truth(tmp_path / "t.json") == truth
    assert len(truth.intervals) == 2


@pytest.mark.slow
def test_monotone_detectability():
    from transect_miner.pipeline import run_table

    means = {}
    for amp in (1.0, 2.0, 4.0):
        fr = []
        for seed in range(20):
            table, truth = generate(SynthConfig(seed=seed, anomaly_amplitude=amp))
            res = run_table(table, "S1", "soil")
            fr.append(score_recovery(res.ranked, truth, 10).fraction)
        means[amp] = float(np.mean(fr))
    print("mean top-10 recovery by amplitude:", means)
    assert means[4.0] >= means[2.0] >= means[1.0]
