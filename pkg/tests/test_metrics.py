import json

import numpy as np
import pytest

from rmap.metrics import (CD_SCALE, L1_EUCLIDEAN, L2_SQUARED, MetricsReport, chamfer, deviation_distribution, evaluate,
                          fscore, nearest_rank, precision_recall)

import oracles


def test_identity():
    g = np.random.default_rng(0).normal(size=(30, 3))
    r = evaluate(g, g)
    assert r.cd_l1 == 0 and r.cd_l2 == 0 and r.fscore == 1.0
    assert set(r.deviation_percentiles.values()) == {0.0}


def test_three_four_five():
    p, g = [[0, 0, 0]], [[3, 4, 0]]
    assert chamfer(p, g, L1_EUCLIDEAN) == 10.0
    assert chamfer(p, g, L2_SQUARED) == 50.0
    r = evaluate(p, g)
    assert (r.cd_l1, r.cd_l2) == (10000.0, 50000.0)


def test_two_point_fscore():
    p, g = [[0, 0, 0], [1, 0, 0]], [[0, 0, 0]]
    assert precision_recall(p, g, 0.01) == (0.5, 1.0)
    assert fscore(p, g, 0.01) == pytest.approx(2 / 3, abs=1e-15)


def test_fscore_zero_and_strict_threshold():
    assert fscore([[0, 0, 0]], [[5, 0, 0]], 0.01) == 0.0
    assert fscore([[0, 0, 0]], [[0.5, 0, 0]], 0.5) == 0.0
    with pytest.raises(ValueError):
        fscore([[0, 0, 0]], [[0, 0, 0]], 0.0)


def test_shifted_line_deviation():
    g = np.stack([np.linspace(0, 10, 100), np.zeros(100), np.zeros(100)], axis=1)
    dev = deviation_distribution(g + [0, 0.2, 0], g)
    for v in dev.values():
        assert v == pytest.approx(0.2, abs=1e-12)


def test_nearest_rank():
    assert nearest_rank([5, 1, 4, 2, 3], (20, 50, 90, 100)) == {20: 1.0, 50: 3.0, 90: 5.0, 100: 5.0}
    with pytest.raises(ValueError):
        nearest_rank([1.0], (0,))


def test_empty_errors():
    for fn in (chamfer, fscore, deviation_distribution):
        with pytest.raises(ValueError, match="empty"):
            fn(np.empty((0, 3)), [[0, 0, 0]])


@pytest.mark.parametrize("seed", range(5))
def test_random_against_oracle(seed):
    rng = np.random.default_rng(seed)
    p, g = rng.normal(size=(100, 3)), rng.normal(size=(80, 3))
    assert abs(chamfer(p, g, L1_EUCLIDEAN) - oracles.chamfer(p, g)) < 1e-12
    assert abs(chamfer(p, g, L2_SQUARED) - oracles.chamfer(p, g, squared=True)) < 1e-12
    assert fscore(p, g, 0.3) == pytest.approx(oracles.fscore(p, g, 0.3), abs=1e-15)
    assert deviation_distribution(p, g) == oracles.deviation(p, g)


def test_report_round_trip_and_csv():
    r = evaluate([[0, 0, 0], [1, 0, 0]], [[0, 0, 0]], frame="world")
    assert MetricsReport.from_dict(json.loads(r.to_json())) == r
    assert r.csv_row("x").startswith("x,500.000,500.000,0.667,")
    assert r.cd_l1 == pytest.approx(0.5 * CD_SCALE)
    with pytest.raises(ValueError):
        evaluate([[0, 0, 0]], [[0, 0, 0]], frame="camera")
