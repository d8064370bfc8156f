"""Sweeps of the alert queue over false positive shares, arrival rates and budgets."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fpa_forge.errors import ConfigError, Unstable
from fpa_forge.soc.simulator import (
    SECONDS_PER_HOUR,
    AlertKind,
    analytic_md1_wq,
    attacked_rate,
    fp_count_for,
    run_replication,
    tp_rate,
)

logger = logging.getLogger(__name__)

MODES = ("eta_sweep", "budget_sweep")
PAIRINGS = ("crossed", "zipped")
FP_LEVELS = (0.8012, 4.006, 8.012, 12.018, 16.024)

RESULT_COLUMNS = [
    "fp",
    "eta",
    "mu",
    "servers",
    "horizon_h",
    "rho",
    "attacked_rho",
    "repeats",
    "mean_tp_count",
    "fp_count",
    "mean_cum_wait_s",
    "mean_wait_s",
    "mean_cum_wait_h",
    "mean_truncated",
    "md1_wq_s",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep. eta is the alert rate of the undisturbed SOC and must keep eta / (mu * servers) below 1."""

    mode: str = "eta_sweep"
    eta: Tuple[float, ...] = (115, 116, 117, 118, 119)
    mu: Tuple[float, ...] = (120,)
    rho: Optional[float] = None
    fp: Tuple[float, ...] = FP_LEVELS
    horizon: float = 1.0
    repeats: int = 10
    servers: int = 1
    seed: int = 0
    pairing: str = "crossed"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.pairing not in PAIRINGS:
            raise ConfigError(f"pairing must be one of {PAIRINGS}, got {self.pairing!r}")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.servers < 1:
            raise ConfigError("servers must be at least 1")
        if self.horizon <= 0:
            raise ConfigError("horizon must be positive")
        if not self.fp:
            raise ConfigError("at least one false positive level is required")
        for value in self.fp:
            tp_rate(1.0, value)
        if any(m <= 0 for m in self.mu):
            raise ConfigError("service rates must be positive")
        if self.mode == "budget_sweep" and self.rho is None:
            raise ConfigError("budget_sweep needs a traffic intensity rho")

    def cells(self) -> List[Tuple[float, float, float]]:
        """(fp, eta, mu) triples to simulate."""
        self.validate()
        if self.mode == "eta_sweep":
            if len(self.mu) != 1:
                raise ConfigError("eta_sweep takes a single service rate")
            mu = self.mu[0]
            rates = [(eta, mu) for eta in self.eta]
        else:
            rates = [(self.rho * mu, mu) for mu in self.mu]
        if self.pairing == "zipped":
            if len(rates) != len(self.fp):
                raise ConfigError(f"zipped pairing needs {len(rates)} fp values, got {len(self.fp)}")
            cells = [(fp, eta, mu) for fp, (eta, mu) in zip(self.fp, rates)]
        else:
            cells = [(fp, eta, mu) for eta, mu in rates for fp in self.fp]
        for _, eta, mu in cells:
            if eta / (mu * self.servers) >= 1:
                raise ConfigError(f"traffic intensity {eta / (mu * self.servers):.3f} >= 1 (eta={eta}, mu={mu})")
        return cells


# Fixed-budget and fixed-intensity sweeps, each over one hour and one day.
# The fixed-budget sweeps raise eta together with the FP share.
PRESETS: Dict[str, ExperimentConfig] = {
    "eta_sweep_1h": ExperimentConfig(mode="eta_sweep", horizon=1.0, pairing="zipped"),
    "eta_sweep_1d": ExperimentConfig(mode="eta_sweep", horizon=24.0, pairing="zipped"),
    "budget_sweep_1h": ExperimentConfig(mode="budget_sweep", mu=(60, 80, 120, 240), rho=0.975, eta=(), horizon=1.0),
    "budget_sweep_1d": ExperimentConfig(mode="budget_sweep", mu=(60, 80, 120, 240), rho=0.975, eta=(), horizon=24.0),
}


def _cell_row(
    cfg: ExperimentConfig,
    fp: float,
    eta: float,
    mu: float,
    seeds: Sequence[np.random.SeedSequence],
) -> Dict[str, float]:
    results = [run_replication(eta, fp, mu, cfg.horizon, cfg.servers, seed) for seed in seeds]
    cum = np.array([r.cumulative_tp_wait for r in results])
    mean = np.array([r.mean_tp_wait for r in results])
    tp_counts = [sum(1 for kind, _ in r.per_alert_wait if kind == AlertKind.TP) for r in results]
    rho = eta / (mu * cfg.servers)
    try:
        md1 = analytic_md1_wq(rho, mu) * SECONDS_PER_HOUR if cfg.servers == 1 else float("nan")
    except Unstable:
        md1 = float("nan")
    return {
        "fp": fp,
        "eta": eta,
        "mu": mu,
        "servers": cfg.servers,
        "horizon_h": cfg.horizon,
        "rho": rho,
        "attacked_rho": attacked_rate(eta, fp) / (mu * cfg.servers),
        "repeats": len(results),
        "mean_tp_count": float(np.mean(tp_counts)),
        "fp_count": fp_count_for(attacked_rate(eta, fp), fp, cfg.horizon),
        "mean_cum_wait_s": float(cum.mean() * SECONDS_PER_HOUR),
        "mean_wait_s": float(mean.mean() * SECONDS_PER_HOUR),
        "mean_cum_wait_h": float(cum.mean()),
        "mean_truncated": float(np.mean([r.horizon_truncated_count for r in results])),
        "md1_wq_s": md1,
    }


def run_experiment(cfg: ExperimentConfig, max_workers: Optional[int] = None) -> Dict[str, object]:
    """Average every cell over cfg.repeats replications.

    Replication r of every cell uses the same child seed, so cells differ only
    in their parameters.
    """
    started = time.time()
    cells = cfg.cells()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.repeats)
    workers = max_workers or min(len(cells), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(lambda cell: _cell_row(cfg, *cell, seeds), cells))
    table = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    elapsed_ms = (time.time() - started) * 1000.0
    logger.info("Simulated %d cells x %d repeats in %.0f ms", len(cells), cfg.repeats, elapsed_ms)

    import psutil

    process = psutil.Process(os.getpid())
    memory_usage_mb = process.memory_info().rss / 1024 / 1024

    return {
        "table": table,
        "stats": {
            "time_ms": elapsed_ms,
            "memory_usage_mb": memory_usage_mb,
            "cells": len(cells),
            "repeats": cfg.repeats,
        },
    }


def write_results_csv(table: pd.DataFrame, path) -> None:
    table.to_csv(path, index=False, lineterminator="\n")
    logger.info("Wrote %d result rows to %s", len(table), path)


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Copy of cfg with every non-None override applied."""
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
