import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from queuesde.timeseries import (CleaningConfig, FormatError, ParseError, QueueSeries, aggregate,
                                 aggregate_sum, centered_mean, clean, load_csv, moving_average, write_csv)

finite_queue = st.floats(min_value=0.0, max_value=200.0, allow_nan=False, allow_infinity=False)
queue_arrays = hnp.arrays(float, st.integers(1, 60), elements=finite_queue)


def _csv(tmp_path, body, name="q.csv"):
    p = tmp_path / name
    p.write_text(body)
    return p


# --- QueueSeries ----------------------------------------------------------------

def test_series_rejects_negative_values():
    with pytest.raises(ValueError):
        QueueSeries(values=[1.0, -0.5])


def test_series_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        QueueSeries(values=[1.0], dt=0)


def test_series_arrays_are_read_only():
    s = QueueSeries(values=[1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 3.0
    assert s.cleaned_mask.shape == s.values.shape and not s.cleaned_mask.any()


def test_times_and_span():
    s = QueueSeries(values=[1, 2, 3], dt=60, start_time=100)
    assert s.times.tolist() == [100, 160, 220]
    assert s.span == 180


# --- load_csv / write_csv -------------------------------------------------------

def test_load_three_rows(tmp_path):
    s = load_csv(_csv(tmp_path, "timestamp,queue_len\n0,5\n120,7\n240,6\n"))
    assert s.dt == 120
    assert s.values.tolist() == [5, 7, 6]
    assert not s.cleaned_mask.any()


def test_missing_row_is_interpolated_and_flagged(tmp_path):
    s = load_csv(_csv(tmp_path, "timestamp,queue_len\n0,5\n240,6\n360,6\n480,6\n"))
    assert s.dt == 120
    assert s.values.tolist() == [5, 5.5, 6, 6, 6]
    assert s.cleaned_mask.tolist() == [False, True, False, False, False]


def test_decreasing_timestamps_is_format_error(tmp_path):
    with pytest.raises(FormatError, match="line 3"):
        load_csv(_csv(tmp_path, "timestamp,queue_len\n120,5\n0,7\n240,6\n"))


def test_jitter_beyond_one_percent_is_format_error(tmp_path):
    with pytest.raises(FormatError):
        load_csv(_csv(tmp_path, "timestamp,queue_len\n0,5\n120,7\n240,6\n363,1\n"))


def test_small_jitter_is_accepted(tmp_path):
    s = load_csv(_csv(tmp_path, "timestamp,queue_len\n0,5\n120,7\n240.5,6\n360,1\n"))
    assert len(s) == 4 and s.dt == 120


def test_malformed_row_names_line(tmp_path):
    with pytest.raises(ParseError, match="line 3"):
        load_csv(_csv(tmp_path, "timestamp,queue_len\n0,5\nabc,7\n"))


def test_missing_column_names_header(tmp_path):
    with pytest.raises(ParseError, match="line 1"):
        load_csv(_csv(tmp_path, "time,q\n0,5\n"))


def test_empty_file_is_parse_error(tmp_path):
    with pytest.raises(ParseError):
        load_csv(_csv(tmp_path, ""))


def test_custom_columns(tmp_path):
    s = load_csv(_csv(tmp_path, "t,extra,len\n0,x,1\n60,y,2\n"), column_spec=("t", "len"))
    assert s.dt == 60 and s.values.tolist() == [1, 2]


def test_write_csv_format(tmp_path):
    p = tmp_path / "o.csv"
    write_csv(QueueSeries(values=[5, 7.25], dt=120, start_time=3600), p)
    assert p.read_text() == "timestamp,queue_len\n3600,5.0\n3720,7.25\n"


@given(queue_arrays, st.sampled_from([60.0, 120.0, 300.0]), st.integers(0, 10 ** 9))
def test_csv_round_trip(tmp_path_factory, values, dt, start):
    p = tmp_path_factory.mktemp("rt") / "s.csv"
    s = QueueSeries(values=values, dt=dt, start_time=float(start))
    write_csv(s, p)
    back = load_csv(p)
    np.testing.assert_allclose(back.values, s.values, rtol=0, atol=1e-9)
    assert back.start_time == s.start_time
    if len(values) > 1:
        assert back.dt == dt


# --- clean -----------------------------------------------------------------------

def test_clean_replaces_with_valid_window_mean():
    s = clean(QueueSeries(values=[23, 12, 55, 18, 20]), CleaningConfig(max_queue=40, window=5))
    assert s.values[2] == 18.25
    assert s.cleaned_mask.tolist() == [False, False, True, False, False]


def test_clean_identity_when_all_valid():
    v = [1.0, 40.0, 3.0]
    s = clean(QueueSeries(values=v))
    assert s.values.tolist() == v and not s.cleaned_mask.any() and s.warnings == ()


def test_clean_all_invalid_warns():
    s = clean(QueueSeries(values=[50, 50, 50]))
    assert s.cleaned_mask.all()
    assert np.all(s.values <= 40)
    assert s.warnings


def test_clean_adjacent_outliers_excluded():
    s = clean(QueueSeries(values=[10, 90, 95, 20, 30]), CleaningConfig(window=3))
    assert s.values[1] == 10.0  # window {10, 90, 95}: only 10 is valid
    assert s.values[2] == 20.0


def test_clean_falls_back_to_series_mean():
    v = [10, 20] + [99] * 7 + [30]
    s = clean(QueueSeries(values=v), CleaningConfig(window=3))
    assert s.values[5] == 20.0
    assert s.warnings


def test_cleaning_config_validation():
    for bad in (dict(window=4), dict(window=1), dict(max_queue=0)):
        with pytest.raises(ValueError):
            CleaningConfig(**bad)


@given(queue_arrays, st.sampled_from([3, 5, 7]))
def test_clean_properties(values, window):
    cfg = CleaningConfig(window=window)
    once = clean(QueueSeries(values=values), cfg)
    assert np.all(once.values <= cfg.max_queue)
    assert np.array_equal(once.cleaned_mask, values > cfg.max_queue)
    keep = values <= cfg.max_queue
    assert np.array_equal(once.values[keep], values[keep])
    twice = clean(once, cfg)
    assert np.array_equal(twice.values, once.values)
    assert np.array_equal(twice.cleaned_mask, once.cleaned_mask)


@given(queue_arrays)
def test_clean_replacements_match_window_oracle(values):
    cfg = CleaningConfig()
    out = clean(QueueSeries(values=values), cfg).values
    valid = values <= cfg.max_queue
    half = cfg.window // 2
    for i in np.flatnonzero(~valid):
        lo, hi = max(0, i - half), min(len(values), i + half + 1)
        w = values[lo:hi][valid[lo:hi]]
        if len(w):
            assert out[i] == pytest.approx(float(np.mean(w)), rel=1e-12)


# --- aggregate ---------------------------------------------------------------------

def test_aggregate_windowed_max():
    s = aggregate(QueueSeries(values=[3, 9, 4, 2], dt=60), 120)
    assert s.values.tolist() == [9, 4] and s.dt == 120


def test_aggregate_identity():
    s = QueueSeries(values=[3, 9, 4], dt=120)
    assert aggregate(s, 120).values.tolist() == [3, 9, 4]


def test_aggregate_non_multiple():
    with pytest.raises(ValueError):
        aggregate(QueueSeries(values=[1, 2, 3]), 180)


def test_aggregate_sum():
    assert aggregate_sum(QueueSeries(values=[3, 9, 4, 2, 1], dt=60), 120).values.tolist() == [12, 6, 1]


@given(queue_arrays, st.integers(1, 7))
def test_aggregate_preserves_max(values, k):
    s = QueueSeries(values=values, dt=60)
    assert aggregate(s, 60 * k).values.max() == values.max()


# --- moving average ----------------------------------------------------------------

def test_moving_average_examples():
    assert moving_average(QueueSeries(values=[0, 10]), 2).values.tolist() == [5, 5]
    v = [1.0, 4.0, 2.0]
    assert moving_average(QueueSeries(values=v), 1).values.tolist() == v
    np.testing.assert_allclose(centered_mean(np.array([1.0, 2, 3, 4, 5]), 3), [1.5, 2, 3, 4, 4.5])


@given(st.floats(0, 100), st.integers(1, 40), st.integers(1, 25))
def test_moving_average_constant(c, n, window):
    out = moving_average(QueueSeries(values=np.full(n, c)), window).values
    assert len(out) == n
    np.testing.assert_allclose(out, c, rtol=1e-12, atol=1e-9)


@given(queue_arrays, st.integers(1, 12))
def test_moving_average_matches_loop_oracle(values, window):
    out = centered_mean(values, window)
    half = window // 2
    ref = [values[max(0, i - half):i + half + 1].mean() for i in range(len(values))]
    np.testing.assert_allclose(out, ref, rtol=1e-9, atol=1e-9)
