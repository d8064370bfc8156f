#!/usr/bin/env python3
"""Benchmark runner for the SOC alert-queue sweeps.

Runs every named preset (fixed-budget and fixed-intensity sweeps over one hour
and one day) and saves a CSV with one row per (preset, fp, eta, mu) cell,
including the M/D/1 steady-state reference and run statistics.

Parameters at top of file are easily configurable.
"""
from __future__ import annotations

import csv
import datetime
import fcntl
import json
import os
import pathlib
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict
from typing import Any, Dict, List

repo_root = pathlib.Path(__file__).resolve().parent
if str(repo_root) not in sys.path:
    sys.path.insert(0, str(repo_root))

from fpa_forge.soc.experiment import PRESETS, RESULT_COLUMNS, run_experiment, with_overrides  # noqa: E402

# -------------------- Configurable parameters --------------------
# Presets to run (all by default)
PRESET_NAMES = list(PRESETS)
# Replications per cell
REPEATS = 10
# Output CSV file
OUTPUT_CSV = "soc_results.csv"
# Top-level results folder
RESULTS_ROOT = "results"
# Thread pool max workers (one preset per worker)
MAX_WORKERS = 4
# Random seed for reproducibility
RANDOM_SEED = 9871
# -----------------------------------------------------------------


def main():
    print(f"Benchmark plan: presets {', '.join(PRESET_NAMES)}, repeats={REPEATS}, seed={RANDOM_SEED}")

    print_lock = threading.Lock()

    def safe_print(*args, **kwargs):
        with print_lock:
            print(*args, **kwargs)

    timestamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S")
    results_dir = os.path.join(RESULTS_ROOT, timestamp)
    os.makedirs(results_dir, exist_ok=True)
    out_path = os.path.abspath(os.path.join(results_dir, OUTPUT_CSV))

    header = ["preset"] + RESULT_COLUMNS + ["time_ms", "memory_usage_mb"]
    with open(out_path, "w", newline="") as fh:
        csv.DictWriter(fh, fieldnames=header).writeheader()

    def append_rows(rows: List[Dict[str, Any]]):
        with open(out_path, "a", newline="") as fh:
            try:
                fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
                writer = csv.DictWriter(fh, fieldnames=header)
                for row in rows:
                    writer.writerow({k: row.get(k, "") for k in header})
                fh.flush()
                os.fsync(fh.fileno())
            finally:
                fcntl.flock(fh.fileno(), fcntl.LOCK_UN)

    meta = {
        "generated_at": timestamp,
        "presets": {name: asdict(PRESETS[name]) for name in PRESET_NAMES},
        "repeats": REPEATS,
        "random_seed": RANDOM_SEED,
    }
    with open(os.path.join(results_dir, "metadata.json"), "w") as mf:
        json.dump(meta, mf, indent=2)

    def run_preset(name: str, idx: int, total: int):
        cfg = with_overrides(PRESETS[name], repeats=REPEATS, seed=RANDOM_SEED)
        started = time.time()
        # one worker per preset; cells inside a preset run sequentially
        result = run_experiment(cfg, max_workers=1)
        stats = result["stats"]
        rows = []
        for row in result["table"].to_dict(orient="records"):
            row.update({"preset": name, "time_ms": stats["time_ms"], "memory_usage_mb": stats["memory_usage_mb"]})
            rows.append(row)
        append_rows(rows)
        safe_print(f"[{idx}/{total}] {name}: {len(rows)} cells in {time.time() - started:.1f}s [OK]")

    with ThreadPoolExecutor(max_workers=MAX_WORKERS) as executor:
        futures = [
            executor.submit(run_preset, name, idx, len(PRESET_NAMES))
            for idx, name in enumerate(PRESET_NAMES, start=1)
        ]
        for fut in as_completed(futures):
            try:
                fut.result()
            except Exception as e:
                safe_print("Preset failed:", e)

    safe_print(f"Benchmark finished. Results written to {out_path}")


if __name__ == "__main__":
    main()
