"""Crafted-vs-reference comparison tables over encoded feature matrices."""

from __future__ import annotations

import logging
import os
import time
from typing import Dict, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from fpa_forge.analysis.metrics import (
    GridSpec,
    ReferenceDistribution,
    cosine,
    kl_pca_joint,
    kl_per_feature,
    pearson,
)
from fpa_forge.analysis.surrogate import EncoderVocab, encode_matrix, fit_encoder
from fpa_forge.errors import DimMismatch, MetricError, ZeroVariance, ZeroVector
from fpa_forge.features.schema import BY_NAME, LABEL_COLUMNS

logger = logging.getLogger(__name__)

DISTANCE_MODES = ("centroid", "pairwise")
MAX_PAIRWISE_ROWS = 500

REPORT_COLUMNS = [
    "class",
    "samples",
    "cosine",
    "pearson",
    "euclidean",
    "mahalanobis",
    "mahalanobis_squared",
    "kl_feature_mean",
    "kl_feature_max",
    "kl_pca",
]


def metric_encoder(reference: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> EncoderVocab:
    """Strict encoder fitted on the reference: one-hot strings, z-scored numerics."""
    labels = {c.name for c in LABEL_COLUMNS}
    columns = [c for c in (columns or reference.columns) if c in reference.columns and c not in labels]
    categorical = [c for c in columns if c in BY_NAME and not BY_NAME[c].numeric]
    numeric = [c for c in columns if c not in categorical]
    return fit_encoder(reference, categorical, numeric, mode="strict")


def _rows(matrix: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if len(matrix) <= MAX_PAIRWISE_ROWS:
        return matrix
    return matrix[rng.choice(len(matrix), MAX_PAIRWISE_ROWS, replace=False)]


def _pairwise_mean(a: np.ndarray, b: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Mean squared distance under ``metric`` over every (a_i, b_j) pair."""
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,kl,ijl->ij", diff, metric, diff)


def _similarity(fn, u, v) -> float:
    try:
        return fn(u, v)
    except (ZeroVector, ZeroVariance):
        return float("nan")


def compare_class(
    name: str,
    crafted: np.ndarray,
    reference: np.ndarray,
    ref: ReferenceDistribution,
    mode: str = "centroid",
    kl_components: int = 2,
    grid: GridSpec = GridSpec(),
    seed: int = 0,
) -> Dict[str, object]:
    if crafted.shape[1] != reference.shape[1]:
        raise DimMismatch(f"crafted has {crafted.shape[1]} columns, reference has {reference.shape[1]}")
    if len(crafted) == 0:
        raise MetricError(f"class {name!r} has no samples")
    class_mean = crafted.mean(axis=0)

    if mode == "centroid":
        diff = crafted - ref.mean
        eu_sq = np.sum(diff * diff, axis=1)
        ma_sq = np.einsum("ik,kl,il->i", diff, ref.inverse_covariance, diff)
    elif mode == "pairwise":
        rng = np.random.default_rng(seed)
        a, b = _rows(crafted, rng), _rows(reference, rng)
        eu_sq = _pairwise_mean(a, b, np.eye(a.shape[1]))
        ma_sq = _pairwise_mean(a, b, ref.inverse_covariance)
    else:
        raise MetricError(f"distance mode must be one of {DISTANCE_MODES}, got {mode!r}")
    ma_sq = np.maximum(ma_sq, 0.0)

    kl = kl_per_feature(crafted, reference, grid) if len(crafted) > 1 else np.full(crafted.shape[1], np.nan)
    try:
        kl_joint = kl_pca_joint(crafted, reference, kl_components)
    except MetricError as exc:
        logger.warning("No joint KL for class %s: %s", name, exc)
        kl_joint = float("nan")

    return {
        "class": name,
        "samples": len(crafted),
        "cosine": _similarity(cosine, class_mean, ref.mean),
        "pearson": _similarity(pearson, class_mean, ref.mean),
        "euclidean": float(np.mean(np.sqrt(np.maximum(eu_sq, 0.0)))),
        "mahalanobis": float(np.mean(np.sqrt(ma_sq))),
        "mahalanobis_squared": float(np.mean(ma_sq)),
        "kl_feature_mean": float(np.nanmean(kl)) if np.any(np.isfinite(kl)) else float("nan"),
        "kl_feature_max": float(np.nanmax(kl)) if np.any(np.isfinite(kl)) else float("nan"),
        "kl_pca": kl_joint,
    }


def metric_report(
    reference: pd.DataFrame,
    classes: Mapping[str, pd.DataFrame],
    columns: Optional[Sequence[str]] = None,
    mode: str = "centroid",
    kl_components: int = 2,
    seed: int = 0,
) -> Dict[str, object]:
    """One row per comparison class against the reference feature set."""
    started = time.time()
    vocab = metric_encoder(reference, columns)
    ref_matrix = encode_matrix(vocab, reference)
    ref = ReferenceDistribution.fit(ref_matrix)
    rows = []
    for name, frame in classes.items():
        rows.append(compare_class(name, encode_matrix(vocab, frame), ref_matrix, ref, mode, kl_components, seed=seed))
        logger.info("Compared class %s (%d samples)", name, len(frame))
    table = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    elapsed_ms = (time.time() - started) * 1000.0

    import psutil

    process = psutil.Process(os.getpid())
    memory_usage_mb = process.memory_info().rss / 1024 / 1024

    return {
        "table": table,
        "dimension": vocab.dimension,
        "stats": {
            "time_ms": elapsed_ms,
            "memory_usage_mb": memory_usage_mb,
            "regularization_epsilon": ref.regularization_epsilon,
            "mode": mode,
        },
    }
