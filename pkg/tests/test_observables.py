import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import philox
from ergomax.errors import OutOfRange, ParameterError, StreamTooShort
from ergomax.observables import (MaxAccumulator, MaxSeries, apply_profile,
                                 capped_power, default_checkpoints, distances,
                                 evaluate, level_radius, max_process,
                                 neg_log_dist, power_dist, sqrt_abs_log_dist,
                                 type_thresholds)


def test_profile_values():
    t = 0.3
    assert evaluate(neg_log_dist(t), t + math.exp(-3.0)) == pytest.approx(3.0)
    assert evaluate(power_dist(2.0, t), t - 0.1) == pytest.approx(100.0)
    assert evaluate(capped_power(5.0, 0.5, t), t + 0.04) == pytest.approx(4.8)
    assert evaluate(sqrt_abs_log_dist(t), t + math.exp(-9.0)) == pytest.approx(3.0)


def test_eps_floor_counts_clamps():
    obs = neg_log_dist(0.5, eps_floor=1e-6)
    vals, clamped = apply_profile(obs, np.array([1e-7, 1e-5, 0.0]))
    assert clamped == 2
    assert vals.max() == pytest.approx(-math.log(1e-6))


def test_distances_1d_and_2d():
    d1 = distances(neg_log_dist(0.3), np.array([0.1, 0.8]))
    np.testing.assert_allclose(d1, [0.2, 0.5])
    d2 = distances(neg_log_dist((0.0, 0.0)), np.array([[3.0, 4.0]]))
    np.testing.assert_allclose(d2, [5.0])
    with pytest.raises(ParameterError):
        distances(neg_log_dist((0.0, 0.0)), np.array([0.1]))


@pytest.mark.parametrize("obs,u_lo,u_hi", [
    (neg_log_dist(0.0), -2.0, 50.0),
    (power_dist(1.7, 0.0), 0.1, 1e6),
    (capped_power(8.0, 0.6, 0.0), -30.0, 7.9),
    (sqrt_abs_log_dist(0.0), 0.1, 20.0),
])
def test_level_radius_inverts_profile(obs, u_lo, u_hi):
    for u in np.linspace(u_lo, u_hi, 23):
        r = level_radius(obs, float(u))
        if r < obs.eps_floor or r >= 1.0:
            continue  # outside psi's decreasing/clamp-free domain
        assert evaluate(obs, obs.target[0] + r) == pytest.approx(u, rel=1e-9)


def test_level_radius_domain_errors():
    with pytest.raises(OutOfRange):
        level_radius(power_dist(1.0, 0.0), 0.0)
    with pytest.raises(OutOfRange):
        level_radius(capped_power(3.0, 1.0, 0.0), 3.0)
    with pytest.raises(OutOfRange):
        level_radius(sqrt_abs_log_dist(0.0), -0.1)


@pytest.mark.parametrize("u,n,alpha,cap", [
    (2.0, 50, 1.7, 7.0),
    (0.5, 1000, 0.6, 2.0),
    (4.0, 10, 1.0, 10.0),
])
def test_threshold_triple_cuts_one_event_set(u, n, alpha, cap):
    # the three profile exceedances must select exactly the same orbit points
    rng = philox(42)
    x = rng.random(10 ** 4)
    d = np.abs(x - 0.3)
    t = type_thresholds(u, n, alpha, cap)
    base = d < t.radius
    v1, _ = apply_profile(neg_log_dist(0.3), d)
    v2, _ = apply_profile(power_dist(alpha, 0.3), d)
    v3, _ = apply_profile(capped_power(cap, alpha, 0.3), d)
    np.testing.assert_array_equal(base, v1 > t.t1)
    np.testing.assert_array_equal(base, v2 > t.t2)
    np.testing.assert_array_equal(base, v3 > t.t3)


def test_threshold_radius_relation():
    t = type_thresholds(2.0, 100, 1.0, 5.0)
    assert t.radius == pytest.approx(math.exp(-2.0) / 100.0)
    assert t.t1 == pytest.approx(2.0 + math.log(100.0))
    with pytest.raises(ParameterError):
        type_thresholds(1.0, 0, 1.0, 5.0)
    with pytest.raises(ParameterError):
        type_thresholds(1.0, 10, -1.0, 5.0)


def test_observable_validation():
    with pytest.raises(ParameterError):
        power_dist(0.0, 0.3)
    with pytest.raises(ParameterError):
        capped_power(None, 1.0, 0.3)
    with pytest.raises(ParameterError):
        neg_log_dist(0.3, eps_floor=2.0)


# --- running maxima -----------------------------------------------------------


def _prefix_max_oracle(values, checkpoints):
    run = np.maximum.accumulate(values)
    vals = run[np.asarray(checkpoints) - 1]
    records = [i + 1 for i, v in enumerate(values)
               if v > (max(values[:i]) if i else -math.inf)]
    return vals, np.array(records, dtype=np.int64)


def test_max_process_matches_prefix_max_oracle():
    rng = philox(7)
    values = rng.standard_normal(10 ** 4)
    cps = np.unique(rng.integers(1, 10 ** 4 + 1, size=40))
    series = max_process(values, cps)
    expect_vals, expect_recs = _prefix_max_oracle(values, cps)
    np.testing.assert_array_equal(series.values, expect_vals)
    np.testing.assert_array_equal(series.record_times, expect_recs)


def test_accumulator_chunking_is_invisible():
    rng = philox(8)
    values = rng.standard_normal(5000)
    cps = np.array([1, 2, 17, 100, 999, 5000])
    whole = max_process(values, cps)
    acc = MaxAccumulator(cps)
    i = 0
    for size in (1, 3, 7, 500, 10000):
        acc.push(values[i:i + size])
        i += size
    chunked = acc.finalize()
    np.testing.assert_array_equal(whole.values, chunked.values)
    np.testing.assert_array_equal(whole.record_times, chunked.record_times)


def test_ties_are_not_records():
    series = max_process(np.array([1.0, 1.0, 2.0, 2.0, 1.5]), [5])
    np.testing.assert_array_equal(series.record_times, [1, 3])


def test_first_observation_is_a_record():
    series = max_process(np.array([-5.0, -6.0, -7.0]), [3])
    np.testing.assert_array_equal(series.record_times, [1])
    assert series.values[0] == -5.0


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False,
                          width=64), min_size=1, max_size=300))
@settings(max_examples=200, deadline=None)
def test_max_process_property(values):
    n = len(values)
    cps = sorted(set([1, max(1, n // 3), n]))
    series = max_process(iter(values), cps)
    for cp, got in zip(series.checkpoints, series.values):
        assert got == max(values[:cp])


def test_stream_too_short():
    with pytest.raises(StreamTooShort):
        max_process(np.array([1.0, 2.0]), [5])


def test_max_series_validation():
    with pytest.raises(ParameterError):
        MaxSeries(np.array([3, 2]), np.array([1.0, 2.0]), np.array([1]))
    with pytest.raises(ParameterError):
        MaxSeries(np.array([1, 2]), np.array([2.0, 1.0]), np.array([1]))


def test_default_checkpoints_shape():
    grid = default_checkpoints(10 ** 4)
    assert grid[0] == 1
    assert grid[-1] == 10 ** 4
    assert np.all(np.diff(grid) > 0)
    assert np.all(grid <= 10 ** 4)
    tiny = default_checkpoints(1)
    np.testing.assert_array_equal(tiny, [1])
    with pytest.raises(ParameterError):
        default_checkpoints(100, ratio=1.0)
