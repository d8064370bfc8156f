"""SVG figures for SOC sweep results and crafted-vs-reference metric reports."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402

logger = logging.getLogger(__name__)

sns.set_style("whitegrid")
plt.rcParams["figure.figsize"] = (12, 8)
plt.rcParams["font.size"] = 10

SOC_COLUMNS = {"fp", "eta", "mu", "mean_cum_wait_s"}
METRIC_COLUMNS = {"class", "cosine", "euclidean", "mahalanobis"}


def get_output_dir(csv_path: Union[str, Path]) -> Path:
    """graphs/ next to the CSV."""
    graphs_dir = Path(csv_path).parent / "graphs"
    graphs_dir.mkdir(exist_ok=True)
    return graphs_dir


def _save(output_dir: Path, name: str) -> Path:
    path = output_dir / name
    plt.tight_layout()
    plt.savefig(path, format="svg", dpi=300)
    plt.close()
    logger.info("Created %s", path.name)
    return path


def plot_waiting_times(df: pd.DataFrame, output_dir: Path, prefix: str = "soc") -> List[Path]:
    """Cumulative and mean TP waiting time against the FP share, one line per rate."""
    # eta sweeps vary eta at one mu; budget sweeps vary mu at one rho
    hue = "eta" if df["mu"].nunique() == 1 else "mu"
    # zipped sweeps have one FP level per rate and form a single curve
    if df.groupby(hue)["fp"].nunique().max() == 1:
        hue = None
    created = []
    for column, label, name in (
        ("mean_cum_wait_s", "Cumulative TP waiting time (s)", "cumulative_wait"),
        ("mean_wait_s", "Mean TP waiting time (s)", "mean_wait"),
    ):
        plt.figure(figsize=(12, 7))
        ax = sns.lineplot(data=df, x="fp", y=column, hue=hue, marker="o", palette="husl" if hue else None)
        ax.set_xlabel("False positive share of alerts (%)", fontweight="bold")
        ax.set_ylabel(label, fontweight="bold")
        horizon = df["horizon_h"].iloc[0]
        ax.set_title(f"{label} over a {horizon:g} h horizon", fontweight="bold", fontsize=14)
        if hue:
            ax.legend(title=hue)
        created.append(_save(output_dir, f"{prefix}_{name}.svg"))
    return created


def plot_metric_report(df: pd.DataFrame, output_dir: Path, prefix: str = "metrics") -> List[Path]:
    """One bar chart per metric across comparison classes."""
    created = []
    metrics = [c for c in ("cosine", "pearson", "euclidean", "mahalanobis", "kl_feature_mean", "kl_pca") if c in df]
    for metric in metrics:
        plt.figure(figsize=(12, 7))
        ax = sns.barplot(data=df, x="class", y=metric, color="steelblue", alpha=0.8)
        ax.set_xlabel("Class", fontweight="bold")
        ax.set_ylabel(metric, fontweight="bold")
        ax.set_title(f"{metric} against the reference traffic", fontweight="bold", fontsize=14)
        ax.tick_params(axis="x", rotation=45)
        ax.grid(axis="y", alpha=0.3)
        created.append(_save(output_dir, f"{prefix}_{metric}.svg"))
    return created


def plot_results(csv_path: Union[str, Path]) -> List[Path]:
    """Pick the figure set from the CSV's columns."""
    df = pd.read_csv(csv_path)
    output_dir = get_output_dir(csv_path)
    columns = set(df.columns)
    stem = Path(csv_path).stem
    if SOC_COLUMNS <= columns:
        return plot_waiting_times(df, output_dir, stem)
    if METRIC_COLUMNS <= columns:
        return plot_metric_report(df, output_dir, stem)
    raise ValueError(f"{csv_path} is neither a simulation nor a metric report table")
