import math

import numpy as np
import pytest

from percolab.lattice import Window
from percolab.loops import trace_loops
from percolab.regime import (CRITICAL, NEAR_CRITICAL, TRIVIAL, UNDETERMINED, LoopCDF, SweepSpec,
                             TruncationAbort, classify, largest_loop_cdf, near_critical_band,
                             run_sweep, sample_loops)
from percolab.sampler import sample


def _points(values):
    return [(v, v) for v in values]


def test_classify_examples():
    assert classify(_points([10, 100, 1000]), (0.3, 5.0)) == CRITICAL
    assert classify(_points([0.1, 0.03, 0.01]), (0.5, 3.0)) == TRIVIAL
    assert classify(_points([1.0, 1.2, 0.9])) == NEAR_CRITICAL
    # brackets straddling a threshold are never classified
    assert classify([(0.2, 0.4), (0.2, 0.4), (0.2, 0.4)]) == UNDETERMINED
    # sentinel upper ends
    assert classify([(4.0, math.inf)] * 3) == CRITICAL
    with pytest.raises(ValueError):
        classify(_points([1, 1]))


def test_classify_trend_requirements():
    # small but certifiably increasing is not Trivial
    assert classify(_points([0.01, 0.1, 0.2])) == UNDETERMINED
    # large but certifiably decreasing is not Critical
    assert classify(_points([100, 10, 5])) == UNDETERMINED
    # overlap counts as consistent with either trend
    assert classify([(0.1, 0.2), (0.15, 0.25), (0.1, 0.2)]) == TRIVIAL


def test_band_at_unit_spacing_is_exact():
    b = near_critical_band(1.0, 0.05, 0.15)
    assert b.low == (0.55, 0.55) and b.high == (0.65, 0.65)
    assert b.ordered and b.midpoint == pytest.approx(0.6)
    with pytest.raises(ValueError):
        near_critical_band(1.0, 0.1, 0.1)


def test_band_is_ordered_and_seed_consistent():
    bands = [near_critical_band(1 / 16, 0.05, 0.15, seed=s) for s in (1, 2)]
    for b in bands:
        assert b.ordered and 0.5 < b.low[0] and b.high[1] < 1.0
    # independent seeds give overlapping brackets
    (a, b) = bands
    assert a.low[0] <= b.low[1] and b.low[0] <= a.low[1]
    assert a.high[0] <= b.high[1] and b.high[0] <= a.high[1]


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(deltas=(1 / 64, 1 / 32))
    with pytest.raises(ValueError):
        SweepSpec(alpha=0.0, lam=1.0)            # p = 3/2
    with pytest.raises(ValueError):
        SweepSpec(band=(0.2, 0.1))
    assert SweepSpec(lam=-1.0).color_swapped


def test_cdf_degenerate_at_p_one():
    cdf = largest_loop_cdf(1 / 16, 1.0, [0.1, 0.5, 2.0], replicas=20, seed=0)
    assert cdf.n_cond == 0 and cdf.n_none == 20
    assert np.all(cdf.p_uncond == 1.0)
    assert all(math.isnan(P) for _, P, _ in cdf.rows())


def test_cdf_nested_monotone_and_saturates():
    w = Window.unit(1 / 32)
    grid = np.linspace(0.02, 2.0, 30)
    s = sample_loops(w, 0.5, 3, 300, ())
    cdf = LoopCDF.from_sample(s.largest, s.truncated, grid)
    assert np.all(np.diff(cdf.hits_cond) >= 0) and np.all(np.diff(cdf.hits_uncond) >= 0)
    # beyond the window diameter every existing loop is smaller
    assert cdf.hits_cond[-1] == cdf.n_cond
    assert cdf.n_cond + cdf.n_none + cdf.n_truncated == 300


def test_truncation_abort():
    with pytest.raises(TruncationAbort):
        largest_loop_cdf(1 / 16, 0.5, [0.5], replicas=100, seed=0, max_truncation=0.05)


def test_lambda_zero_is_critical():
    spec = SweepSpec(alpha=0.75, lam=0.0, deltas=(1 / 8, 1 / 16, 1 / 32), replicas=20,
                     probe_replicas=64, probe_max_replicas=256, max_truncation=1.0, seed=1)
    rep = run_sweep(spec)
    assert rep.verdict == CRITICAL
    for lv in rep.levels:
        assert lv.p == 0.5 and lv.corr.exceeds
    assert len(rep.level_rows()[0]) == 16


def test_colour_swap_leaves_loops_unchanged():
    # a flipped configuration has the same loops, traversed the other way
    w = Window.unit(1 / 16)
    for r in range(10):
        cfg = sample(w, 0.6, 5, r)
        l1, l2 = trace_loops(cfg), trace_loops(cfg.flipped())
        assert np.allclose(np.sort(l1.all_diameters), np.sort(l2.all_diameters))
        assert np.allclose(np.sort(l1.signed_areas), np.sort(-l2.signed_areas))
