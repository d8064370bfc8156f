"""SOC alert-queue simulation."""

from .experiment import PRESETS, ExperimentConfig, run_experiment
from .simulator import analytic_md1_wq, run_replication, simulate_queue

__all__ = [
    "PRESETS",
    "ExperimentConfig",
    "analytic_md1_wq",
    "run_experiment",
    "run_replication",
    "simulate_queue",
]
