"""Alert queue of a SOC team as an M/D/c/FCFS system.

Times are in hours throughout; rates are alerts per hour.
"""

from __future__ import annotations

import enum
import heapq
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from fpa_forge.errors import ConfigError, Unstable

logger = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0
# Lowest false positive rate among the evaluated NIDSs under attack, in percent.
MIN_ATTACK_FPR = 80.12


class AlertKind(str, enum.Enum):
    TP = "TP"
    FP = "FP"


@dataclass(frozen=True)
class AlertTrace:
    arrivals: Tuple[Tuple[float, AlertKind], ...]
    horizon: float

    @property
    def tp_count(self) -> int:
        return sum(1 for _, kind in self.arrivals if kind == AlertKind.TP)

    @property
    def fp_count(self) -> int:
        return len(self.arrivals) - self.tp_count


@dataclass
class QueueResult:
    per_alert_wait: List[Tuple[AlertKind, float]] = field(default_factory=list)
    cumulative_tp_wait: float = 0.0
    mean_tp_wait: float = 0.0
    served_count: int = 0
    horizon_truncated_count: int = 0
    # (arrival, service start) per alert, in arrival order
    schedule: List[Tuple[float, float]] = field(default_factory=list)


def tp_rate(eta: float, fp_pct: float) -> float:
    """True positive arrival rate once fp_pct percent of all alerts are false."""
    if eta <= 0:
        raise ConfigError(f"alert arrival rate must be positive, got {eta}")
    if not 0 <= fp_pct < 100:
        raise ConfigError(f"false positive share must be in [0, 100), got {fp_pct}")
    return eta * (1 - fp_pct / 100)


def gen_tp_arrivals(eta: float, fp_pct: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous Poisson arrivals of rate eta*(1 - fp/100) on [0, horizon].

    Unit-rate epochs are rescaled by the rate, so one seed couples the paths of
    all rates: a higher rate moves every arrival earlier and only adds more.
    """
    lam = tp_rate(eta, fp_pct)
    if horizon <= 0:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    span = lam * horizon
    chunk = int(span + 4 * np.sqrt(span)) + 16
    epochs = np.cumsum(rng.standard_exponential(chunk))
    while epochs[-1] < span:
        epochs = np.concatenate([epochs, epochs[-1] + np.cumsum(rng.standard_exponential(chunk))])
    return epochs[epochs < span] / lam


def gen_fp_arrivals(count: int, T: float) -> np.ndarray:
    """count points evenly spaced inside (0, T): k*T/(count+1) for k = 1..count."""
    if count < 0:
        raise ConfigError("false positive count cannot be negative")
    if count and T <= 0:
        raise ConfigError(f"interval end must be positive, got {T}")
    return np.arange(1, count + 1) * (T / (count + 1))


def fp_count_for(eta: float, fp_pct: float, horizon: float) -> int:
    return int(round(eta * fp_pct / 100 * horizon))


def attacked_rate(eta: float, fp_pct: float) -> float:
    """Total alert rate once injected FPs make up fp_pct percent of all alerts on top of eta genuine ones."""
    tp_rate(eta, fp_pct)
    return eta / (1 - fp_pct / 100)


def fp_from_compromised_share(share_pct: float, min_fpr: float = MIN_ATTACK_FPR) -> float:
    """False positive share of all alerts when share_pct percent of devices are compromised."""
    if not 0 <= share_pct <= 100:
        raise ConfigError(f"compromised share must be in [0, 100], got {share_pct}")
    return share_pct * min_fpr / 100


def build_trace(eta: float, fp_pct: float, horizon: float, rng: np.random.Generator) -> AlertTrace:
    """Genuine alerts at rate eta plus injected FPs evenly spread up to the last TP.

    eta is the alert rate of the undisturbed SOC. Under attack the total rate is
    attacked_rate(eta, fp_pct), of which fp_pct percent are false, so the TP
    stream drawn from rng is the same for every fp_pct.
    """
    tp = gen_tp_arrivals(eta, 0.0, horizon, rng)
    T = float(tp[-1]) if len(tp) else horizon
    fp = gen_fp_arrivals(fp_count_for(attacked_rate(eta, fp_pct), fp_pct, horizon), T)
    merged = [(float(t), AlertKind.TP) for t in tp] + [(float(t), AlertKind.FP) for t in fp]
    # stable sort keeps a TP ahead of an FP arriving at the same instant
    merged.sort(key=lambda item: item[0])
    return AlertTrace(tuple(merged), horizon)


def simulate_queue(trace: AlertTrace, mu: float, c: int = 1) -> QueueResult:
    """Serve alerts first come first served on c analysts with service time 1/mu.

    Alerts that cannot start before the horizon accrue waiting time up to the
    horizon and are counted as truncated.
    """
    if mu <= 0:
        raise ConfigError(f"service rate must be positive, got {mu}")
    if c < 1:
        raise ConfigError(f"need at least one server, got {c}")
    service = 1.0 / mu
    free_at = [0.0] * c
    heapq.heapify(free_at)
    result = QueueResult()
    tp_waits: List[float] = []

    for arrival, kind in trace.arrivals:
        earliest = heapq.heappop(free_at)
        start = max(arrival, earliest)
        if start >= trace.horizon:
            wait = max(trace.horizon - arrival, 0.0)
            result.horizon_truncated_count += 1
            heapq.heappush(free_at, earliest)
        else:
            wait = start - arrival
            result.served_count += 1
            heapq.heappush(free_at, start + service)
        result.per_alert_wait.append((kind, wait))
        result.schedule.append((arrival, start))
        if kind == AlertKind.TP:
            tp_waits.append(wait)

    result.cumulative_tp_wait = float(sum(tp_waits))
    result.mean_tp_wait = result.cumulative_tp_wait / len(tp_waits) if tp_waits else 0.0
    if result.horizon_truncated_count:
        logger.warning("%d alerts still queued at the horizon", result.horizon_truncated_count)
    return result


def analytic_md1_wq(rho: float, mu: float) -> float:
    """Steady-state mean queueing delay of M/D/1, in hours."""
    if rho >= 1:
        raise Unstable(f"traffic intensity {rho} >= 1 has no steady state")
    if rho < 0 or mu <= 0:
        raise ConfigError("rho must be non-negative and mu positive")
    return rho / (2 * mu * (1 - rho))


def run_replication(
    eta: float,
    fp_pct: float,
    mu: float,
    horizon: float,
    c: int = 1,
    seed: Optional[np.random.SeedSequence] = None,
) -> QueueResult:
    rng = np.random.default_rng(seed)
    return simulate_queue(build_trace(eta, fp_pct, horizon, rng), mu, c)
