import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from queuesde.point_process import (ArrivalProcess, InterarrivalParams, accumulate_cycles,
                                    arrivals_from_interarrivals, gbm_moments, ito_flow_transform,
                                    simulate_interarrivals, write_events_csv)

# exact values: 2 * e and e**1 computed independently
TAU_100_DETERMINISTIC = 5.43656365691809


def test_noiseless_driftless_is_constant():
    tau = simulate_interarrivals(InterarrivalParams(mu_tau=0, sigma_tau=0, tau0=2), 50, seed=1)
    assert np.all(tau == 2.0)


def test_deterministic_growth():
    tau = simulate_interarrivals(InterarrivalParams(mu_tau=0.01, sigma_tau=0, tau0=2), 101, seed=1)
    assert tau[100] == pytest.approx(TAU_100_DETERMINISTIC, rel=1e-12)


def test_log_drift_matches_ito_correction():
    n = 10 ** 5
    tau = simulate_interarrivals(InterarrivalParams(mu_tau=0, sigma_tau=0.1, tau0=2), n, seed=7)
    inc = np.diff(np.log(tau))
    assert abs(inc.mean() - (-0.005)) < 3 * inc.std(ddof=1) / math.sqrt(len(inc))


def test_log_increments_gaussian_moments():
    sig = 0.1
    tau = simulate_interarrivals(InterarrivalParams(mu_tau=1e-4, sigma_tau=sig), 10 ** 5, seed=3)
    inc = np.diff(np.log(tau))
    assert stats.jarque_bera(inc).pvalue > 0.01
    assert abs(inc.var(ddof=1) / sig ** 2 - 1) < 3 * math.sqrt(2 / len(inc))


@pytest.mark.parametrize("mu,sigma,expected", [(0, 0.1, (0.01, -0.1)), (0, 0, (0, 0)), (0.04, 0.2, (0, -0.2))])
def test_ito_flow_transform(mu, sigma, expected):
    f = ito_flow_transform(InterarrivalParams(mu_tau=mu, sigma_tau=sigma))
    assert f.drift_q == pytest.approx(expected[0], abs=1e-15)
    assert f.diffusion_q == pytest.approx(expected[1], abs=1e-15)


def test_pathwise_flow_matches_transformed_law():
    p = InterarrivalParams(mu_tau=0.001, sigma_tau=0.05, tau0=2.0)
    tau = simulate_interarrivals(p, 81, seed=11, paths=10 ** 4)
    q = 1.0 / tau[:, 80]
    fp = ito_flow_transform(p)
    mean, var = gbm_moments(1 / p.tau0, fp.drift_q, fp.diffusion_q, 80)
    n = len(q)
    assert abs(q.mean() - mean) < 3 * q.std(ddof=1) / math.sqrt(n)
    c = q - q.mean()
    se_var = math.sqrt((np.mean(c ** 4) - np.mean(c ** 2) ** 2) / n)
    assert abs(q.var(ddof=1) - var) < 3 * se_var


def test_gbm_moments_at_zero():
    m, v = gbm_moments(3.0, 0.1, 0.2, 0)
    assert m == 3.0 and v == 0.0


@given(st.floats(-0.05, 0.05), st.floats(0, 0.5), st.floats(0.1, 10), st.integers(1, 300), st.integers(0, 2 ** 32))
def test_interarrivals_positive_and_reproducible(mu, sigma, tau0, n, seed):
    p = InterarrivalParams(mu_tau=mu, sigma_tau=sigma, tau0=tau0)
    a = simulate_interarrivals(p, n, seed=seed)
    assert a.shape == (n,) and np.all(a > 0) and a[0] == tau0
    assert np.array_equal(a, simulate_interarrivals(p, n, seed=seed))


def test_param_validation():
    with pytest.raises(ValueError):
        InterarrivalParams(sigma_tau=-1)
    with pytest.raises(ValueError):
        InterarrivalParams(tau0=0)
    with pytest.raises(ValueError):
        simulate_interarrivals(InterarrivalParams(), 0)


def test_arrivals_and_count():
    t = arrivals_from_interarrivals(np.array([2.0, 3.0, 1.0]), t0=5)
    assert t.tolist() == [5, 7, 10]
    proc = ArrivalProcess(event_times=t, amplitudes=[1, 2, 1])
    assert proc.count(5, 10) == 3
    with pytest.raises(ValueError):
        ArrivalProcess(event_times=[1, 1])
    with pytest.raises(ValueError):
        ArrivalProcess(event_times=[1, 2], amplitudes=[1, 0.5])


def test_accumulate_cycles_examples():
    assert accumulate_cycles([10, 50, 130], [1, 1, 1], 120).tolist() == [2, 1]
    assert accumulate_cycles([1, 2, 3], [0.5, 0.25, 2], 120).tolist() == [2.75]
    assert accumulate_cycles([], [], 120).tolist() == []
    # boundary event belongs to the later cycle
    assert accumulate_cycles([0, 120], [1, 1], 120).tolist() == [1, 1]


@given(st.lists(st.floats(0, 1e5), min_size=1, max_size=200), st.floats(1, 1000))
def test_accumulate_conserves_volume(times, T):
    t = np.sort(np.array(times))
    q = np.linspace(0.1, 2.0, len(t))
    x = accumulate_cycles(t, q, T)
    assert x.sum() == pytest.approx(q.sum(), rel=1e-12)
    assert len(x) == int(t[-1] // T) + 1


def test_events_csv(tmp_path):
    p = tmp_path / "e.csv"
    write_events_csv([0.0, 2.0], [2.0, 4.0], [0.5, 0.25], p)
    assert p.read_text() == "t,tau,q\n0.0,2.0,0.5\n2.0,4.0,0.25\n"
