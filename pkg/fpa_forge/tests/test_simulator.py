"""
Unit tests for the SOC alert queue.
Checks the queue discipline, false positive spacing and the M/D/1 steady state.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpa_forge.errors import ConfigError, Unstable
from fpa_forge.soc.simulator import (
    SECONDS_PER_HOUR,
    AlertKind,
    AlertTrace,
    analytic_md1_wq,
    attacked_rate,
    build_trace,
    fp_count_for,
    fp_from_compromised_share,
    gen_fp_arrivals,
    gen_tp_arrivals,
    run_replication,
    simulate_queue,
    tp_rate,
)


def trace_of(tp_times, fp_times=(), horizon=10.0):
    merged = [(t, AlertKind.TP) for t in tp_times] + [(t, AlertKind.FP) for t in fp_times]
    merged.sort(key=lambda item: item[0])
    return AlertTrace(tuple(merged), horizon)


class TestAnalytic:
    """Test suite for the M/D/1 closed form."""

    def test_budget_sweep_value(self):
        """Test rho 0.975 and mu 120 gives 585 seconds."""
        assert analytic_md1_wq(0.975, 120) * SECONDS_PER_HOUR == pytest.approx(585.0)

    def test_half_load(self):
        """Test rho 0.5 and mu 120 gives 15 seconds."""
        assert analytic_md1_wq(0.5, 120) * SECONDS_PER_HOUR == pytest.approx(15.0)

    def test_unstable(self):
        """Test that rho >= 1 has no steady state."""
        with pytest.raises(Unstable):
            analytic_md1_wq(1.0, 120)


class TestArrivals:
    """Test suite for TP and FP arrival generation."""

    def test_tp_rate(self):
        """Test the TP rate and its bounds."""
        assert tp_rate(100, 20) == pytest.approx(80)
        with pytest.raises(ConfigError):
            tp_rate(100, 100)
        with pytest.raises(ConfigError):
            tp_rate(0, 10)

    def test_fp_spacing(self):
        """Test evenly spaced interior points."""
        assert np.allclose(gen_fp_arrivals(3, 4.0), [1.0, 2.0, 3.0])
        assert len(gen_fp_arrivals(0, 0.0)) == 0

    def test_fp_count(self):
        """Test round(eta * fp / 100 * horizon)."""
        assert fp_count_for(116, 8.012, 1.0) == 9
        assert fp_count_for(116, 8.012, 24.0) == 223

    def test_tp_arrivals_sorted_and_bounded(self):
        """Test that arrivals are ordered inside the horizon."""
        times = gen_tp_arrivals(100, 10, 2.0, np.random.default_rng(1))
        assert np.all(np.diff(times) >= 0)
        assert times.min() >= 0 and times.max() <= 2.0

    def test_higher_rate_couples(self):
        """Test that with one seed a higher rate moves arrivals earlier and adds more."""
        low = gen_tp_arrivals(100, 20, 1.0, np.random.default_rng(5))
        high = gen_tp_arrivals(100, 1, 1.0, np.random.default_rng(5))
        assert len(high) >= len(low)
        assert np.all(high[: len(low)] <= low)

    def test_attacked_rate(self):
        """Test that injected FPs come on top of the undisturbed rate."""
        assert attacked_rate(100, 20) == pytest.approx(125)
        assert tp_rate(attacked_rate(100, 20), 20) == pytest.approx(100)
        assert attacked_rate(100, 0) == 100

    def test_tp_stream_shared_across_fp(self):
        """Test that every FP share sees the same genuine alerts for one seed."""
        streams = []
        for fp in (0.0, 0.8012, 16.024):
            trace = build_trace(117, fp, 1.0, np.random.default_rng(3))
            streams.append([t for t, kind in trace.arrivals if kind == AlertKind.TP])
        assert streams[0] == streams[1] == streams[2]

    def test_trace_fp_before_last_tp(self):
        """Test that FP alerts fall before the last TP alert."""
        trace = build_trace(100, 10, 1.0, np.random.default_rng(2))
        last_tp = max(t for t, kind in trace.arrivals if kind == AlertKind.TP)
        assert all(t < last_tp for t, kind in trace.arrivals if kind == AlertKind.FP)
        assert trace.fp_count == 11

    @pytest.mark.parametrize("share,expected", [(1, 0.8012), (5, 4.006), (20, 16.024)])
    def test_compromised_share(self, share, expected):
        """Test the FP share for a fraction of compromised devices."""
        assert fp_from_compromised_share(share) == pytest.approx(expected)


class TestQueue:
    """Test suite for simulate_queue."""

    def test_fcfs_waits(self):
        """Test hand-computed waits with service time 1."""
        result = simulate_queue(trace_of([0.0, 0.5, 0.7]), mu=1.0)
        assert [w for _, w in result.per_alert_wait] == pytest.approx([0.0, 0.5, 1.3])
        assert result.cumulative_tp_wait == pytest.approx(1.8)
        assert result.mean_tp_wait == pytest.approx(0.6)
        assert result.served_count == 3

    def test_two_servers(self):
        """Test that a second analyst removes the queue."""
        result = simulate_queue(trace_of([0.0, 0.5]), mu=1.0, c=2)
        assert result.cumulative_tp_wait == 0.0

    def test_horizon_truncation(self):
        """Test that alerts unserved at the horizon wait until it."""
        result = simulate_queue(trace_of([0.9, 0.95], horizon=1.0), mu=1.0)
        assert result.horizon_truncated_count == 1
        assert result.per_alert_wait[1][1] == pytest.approx(0.05)

    def test_fp_only_wait_excluded(self):
        """Test that FP waits do not count toward the TP totals."""
        result = simulate_queue(trace_of([], [0.0, 0.1]), mu=1.0)
        assert result.cumulative_tp_wait == 0.0
        assert result.mean_tp_wait == 0.0

    def test_invalid_parameters(self):
        """Test that non-positive service rates and servers are refused."""
        with pytest.raises(ConfigError):
            simulate_queue(trace_of([0.0]), mu=0.0)
        with pytest.raises(ConfigError):
            simulate_queue(trace_of([0.0]), mu=1.0, c=0)

    def test_added_fps_never_help(self):
        """Test that adding FP alerts to a fixed TP trace cannot shorten TP waits."""
        rng = np.random.default_rng(9)
        tp = np.sort(rng.uniform(0, 1.0, 110))
        previous = -1.0
        for count in (0, 5, 10, 20, 40):
            fp = gen_fp_arrivals(count, float(tp[-1]))
            wait = simulate_queue(trace_of(tp, fp, horizon=1.0), mu=120).cumulative_tp_wait
            assert wait >= previous
            previous = wait

    def test_converges_to_md1(self):
        """Test the long-run mean wait against the closed form at rho 0.5."""
        result = run_replication(60, 0.0, 120, 2000.0, seed=np.random.SeedSequence(0))
        expected = analytic_md1_wq(0.5, 120)
        assert result.mean_tp_wait == pytest.approx(expected, rel=0.05)

    def test_converges_to_md1_heavy_load(self):
        """Test the mean wait at rho 0.975 and mu 120 against 585 seconds over many seeds."""
        seeds = np.random.SeedSequence(2024).spawn(100)
        waits = [run_replication(117, 0.0, 120, 2000.0, seed=seed).mean_tp_wait for seed in seeds]
        assert np.mean(waits) * SECONDS_PER_HOUR == pytest.approx(585.0, rel=0.05)


def busy_servers(schedule, served, service, t):
    return sum(1 for (_, start), ok in zip(schedule, served) if ok and start <= t < start + service)


class TestQueueProperties:
    """Property tests over random alert traces."""

    @settings(max_examples=150, deadline=None)
    @given(
        times=st.lists(st.floats(min_value=0.0, max_value=10.0, allow_nan=False), max_size=40),
        kinds=st.lists(st.sampled_from([AlertKind.TP, AlertKind.FP]), min_size=40, max_size=40),
        mu=st.sampled_from([0.5, 1.0, 4.0]),
        c=st.integers(min_value=1, max_value=3),
        horizon=st.floats(min_value=0.5, max_value=12.0),
    )
    def test_conservation(self, times, kinds, mu, c, horizon):
        """Test that every alert is served or truncated, FCFS order, and no server idles while one waits."""
        arrivals = tuple(sorted(zip(sorted(times), kinds), key=lambda item: item[0]))
        result = simulate_queue(AlertTrace(arrivals, horizon), mu=mu, c=c)
        service = 1.0 / mu

        assert result.served_count + result.horizon_truncated_count == len(arrivals)
        assert len(result.schedule) == len(result.per_alert_wait) == len(arrivals)
        assert all(wait >= 0 for _, wait in result.per_alert_wait)
        tp_total = sum(w for kind, w in result.per_alert_wait if kind == AlertKind.TP)
        assert result.cumulative_tp_wait == pytest.approx(tp_total)

        starts = [start for _, start in result.schedule]
        assert starts == sorted(starts)
        served = [start < horizon for start in starts]
        assert sum(served) == result.served_count
        for (arrival, start), ok in zip(result.schedule, served):
            if not ok or start == arrival:
                continue
            # the wait ends exactly when a server frees up
            assert any(s + service == start for (_, s), o in zip(result.schedule, served) if o)
            # every instant the busy count can change inside the wait sees all servers busy
            checkpoints = [arrival] + [
                s + service for (_, s), o in zip(result.schedule, served) if o and arrival < s + service < start
            ]
            for t in checkpoints:
                assert busy_servers(result.schedule, served, service, t) == c
