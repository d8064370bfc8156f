"""Similarity, distance and divergence metrics, and classifier-output statistics."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Union

import numpy as np
from scipy import integrate, stats
from sklearn.decomposition import PCA
from sklearn.neighbors import KernelDensity

from fpa_forge.errors import (
    DegenerateSamples,
    DimMismatch,
    MetricError,
    SingularCovariance,
    ZeroVariance,
    ZeroVector,
)

logger = logging.getLogger(__name__)

HIGH_CONFIDENCE = 0.9
LOW_ENTROPY = 0.5
HIGH_ENTROPY = 1.5
DENSITY_FLOOR = 1e-12
PROB_TOLERANCE = 1e-9
MAX_GRID_DIM = 3

Bandwidth = Union[str, float]


def _pair(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimMismatch(f"shapes {u.shape} and {v.shape} differ")
    return u, v


# ---------------------------------------------------------------------------
# Similarity and distance


def cosine(u, v) -> float:
    u, v = _pair(u, v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def pearson(u, v) -> float:
    u, v = _pair(u, v)
    cu, cv = u - u.mean(), v - v.mean()
    if not np.any(cu) or not np.any(cv):
        raise ZeroVariance("Pearson correlation needs non-constant inputs")
    return cosine(cu, cv)


def euclidean(u, v) -> float:
    u, v = _pair(u, v)
    return float(np.linalg.norm(u - v))


@dataclass(frozen=True)
class ReferenceDistribution:
    mean: np.ndarray
    covariance: np.ndarray
    inverse_covariance: np.ndarray
    regularization_epsilon: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.mean)

    @classmethod
    def from_moments(cls, mean, covariance, regularize: bool = True) -> "ReferenceDistribution":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(covariance, dtype=float))
        if cov.shape != (len(mean), len(mean)):
            raise DimMismatch(f"covariance {cov.shape} does not match mean of length {len(mean)}")
        cov = (cov + cov.T) / 2
        eps = 0.0
        if regularize:
            trace = float(np.trace(cov))
            eps = 1e-6 * trace / len(mean) if trace > 0 else 1e-6
            cov = cov + eps * np.eye(len(mean))
        try:
            inverse = np.linalg.inv(cov)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance("covariance matrix is singular") from exc
        if not np.all(np.isfinite(inverse)) or np.linalg.cond(cov) > 1 / np.finfo(float).eps:
            raise SingularCovariance("covariance matrix is numerically singular")
        return cls(mean, cov, inverse, eps)

    @classmethod
    def fit(cls, samples, regularize: bool = True) -> "ReferenceDistribution":
        """Sample mean and covariance, with eps*I added where eps = 1e-6 * trace / dim."""
        x = np.asarray(samples, dtype=float)
        if x.ndim != 2 or len(x) < 2:
            raise DegenerateSamples("need a 2-D sample matrix with at least two rows")
        return cls.from_moments(x.mean(axis=0), np.cov(x, rowvar=False), regularize)


def mahalanobis(x, ref: ReferenceDistribution, squared: bool = False) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != ref.mean.shape:
        raise DimMismatch(f"vector of shape {x.shape} against reference of dimension {ref.dim}")
    d = x - ref.mean
    value = max(float(d @ ref.inverse_covariance @ d), 0.0)
    return value if squared else float(np.sqrt(value))


def mahalanobis_pair(x, y, ref: ReferenceDistribution, squared: bool = False) -> float:
    """Distance between two samples under the reference covariance."""
    x, y = _pair(x, y)
    d = x - y
    value = max(float(d @ ref.inverse_covariance @ d), 0.0)
    return value if squared else float(np.sqrt(value))


# ---------------------------------------------------------------------------
# Densities and divergence


class KdeDensity:
    """Gaussian kernel density with an isotropic absolute bandwidth."""

    def __init__(self, samples: np.ndarray, bandwidth: float) -> None:
        self.samples = samples
        self.bandwidth = bandwidth
        self._kde = KernelDensity(kernel="gaussian", bandwidth=bandwidth).fit(samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def log_pdf(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(-1, 1) if pts.ndim == 1 and self.dim == 1 else np.atleast_2d(pts)
        return self._kde.score_samples(pts)

    def __call__(self, points) -> np.ndarray:
        return np.exp(self.log_pdf(points))


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def _rule_bandwidth(x: np.ndarray, rule: str) -> float:
    n, d = x.shape
    if rule == "scott":
        factor = n ** (-1.0 / (d + 4))
    elif rule == "silverman":
        factor = (n * (d + 2) / 4.0) ** (-1.0 / (d + 4))
    else:
        raise MetricError(f"unknown bandwidth rule {rule!r}")
    sigma = float(np.mean(x.std(axis=0, ddof=1)))
    if sigma <= 0:
        raise DegenerateSamples(f"{rule} rule needs samples with non-zero spread")
    return factor * sigma


def kde_pdf(samples, bandwidth: Bandwidth = "scott") -> KdeDensity:
    """Fit a Gaussian KDE; bandwidth is an absolute width or 'scott' / 'silverman'."""
    x = _as_samples(samples)
    if len(x) < 2:
        raise DegenerateSamples("KDE needs at least two samples")
    if not np.all(np.isfinite(x)):
        raise DegenerateSamples("samples contain NaN or infinite values")
    if isinstance(bandwidth, str):
        h = _rule_bandwidth(x, bandwidth)
    else:
        h = float(bandwidth)
        if h <= 0:
            raise MetricError(f"bandwidth must be positive, got {h}")
    return KdeDensity(x, h)


@dataclass(frozen=True)
class GridSpec:
    points: int = 512
    # grid extends this many bandwidths beyond the pooled sample range
    pad: float = 4.0
    bandwidth: Bandwidth = "scott"


def kl_divergence(p_samples, q_samples, grid: GridSpec = GridSpec()) -> float:
    """KL(p || q) between KDE estimates, integrated on a regular grid of up to three dimensions."""
    p = _as_samples(p_samples)
    q = _as_samples(q_samples)
    if p.shape[1] != q.shape[1]:
        raise DimMismatch(f"sample dimensions {p.shape[1]} and {q.shape[1]} differ")
    dim = p.shape[1]
    if dim > MAX_GRID_DIM:
        raise DimMismatch(f"grid integration supports at most {MAX_GRID_DIM} dimensions, got {dim}")
    p_kde = kde_pdf(p, grid.bandwidth)
    q_kde = kde_pdf(q, grid.bandwidth)
    pooled = np.vstack([p, q])
    margin = grid.pad * max(p_kde.bandwidth, q_kde.bandwidth)
    per_axis = grid.points if dim == 1 else max(int(round(grid.points ** (1.0 / dim))), 16)
    axes = [np.linspace(pooled[:, k].min() - margin, pooled[:, k].max() + margin, per_axis) for k in range(dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    pd_ = np.maximum(p_kde(mesh), DENSITY_FLOOR)
    qd = np.maximum(q_kde(mesh), DENSITY_FLOOR)
    integrand = (pd_ * np.log(pd_ / qd)).reshape([per_axis] * dim)
    value = integrand
    for axis in reversed(axes):
        value = integrate.trapezoid(value, axis, axis=-1)
    return float(value)


def discrete_kl(p, q) -> float:
    """KL(P || Q) in nats between two probability vectors (normalized first)."""
    p, q = _pair(p, q)
    if p.sum() <= 0 or q.sum() <= 0 or np.any(p < 0) or np.any(q < 0):
        raise MetricError("probability vectors must be non-negative with positive mass")
    p = p / p.sum()
    q = np.maximum(q / q.sum(), DENSITY_FLOOR)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def histogram_kl(p_samples, q_samples, bins: Union[int, Sequence[float]] = 30) -> float:
    """KL between histograms of two 1-D samples over shared bin edges."""
    p = np.ravel(np.asarray(p_samples, dtype=float))
    q = np.ravel(np.asarray(q_samples, dtype=float))
    edges = np.histogram_bin_edges(np.concatenate([p, q]), bins=bins)
    hp, _ = np.histogram(p, bins=edges)
    hq, _ = np.histogram(q, bins=edges)
    return discrete_kl(hp, hq)


def _value_kl(p: np.ndarray, q: np.ndarray) -> float:
    values = np.union1d(p, q)
    hp = np.array([np.sum(p == v) for v in values], dtype=float)
    hq = np.array([np.sum(q == v) for v in values], dtype=float)
    return discrete_kl(hp, hq)


def kl_per_feature(p_matrix, q_matrix, grid: GridSpec = GridSpec()) -> np.ndarray:
    """One KL value per column: KDE where both columns vary, value frequencies otherwise."""
    p, q = _pair_matrices(p_matrix, q_matrix)
    out = np.empty(p.shape[1])
    for k in range(p.shape[1]):
        pk, qk = p[:, k], q[:, k]
        if len(np.unique(pk)) > 2 and len(np.unique(qk)) > 2:
            out[k] = kl_divergence(pk, qk, grid)
        else:
            out[k] = _value_kl(pk, qk)
    return out


def kl_pca_joint(p_matrix, q_matrix, components: int = 2, grid: GridSpec = GridSpec(points=4096)) -> float:
    """KL of a joint KDE in the principal subspace of the pooled samples."""
    p, q = _pair_matrices(p_matrix, q_matrix)
    components = min(components, p.shape[1], MAX_GRID_DIM)
    pca = PCA(n_components=components).fit(np.vstack([p, q]))
    return kl_divergence(pca.transform(p), pca.transform(q), grid)


def _pair_matrices(p_matrix, q_matrix):
    p = _as_samples(p_matrix)
    q = _as_samples(q_matrix)
    if p.shape[1] != q.shape[1]:
        raise DimMismatch(f"column counts {p.shape[1]} and {q.shape[1]} differ")
    return p, q


# ---------------------------------------------------------------------------
# Classifier outputs


@dataclass(frozen=True)
class ConfidenceEntropy:
    confidence: float
    entropy: float

    @property
    def high_confidence(self) -> bool:
        return self.confidence > HIGH_CONFIDENCE

    @property
    def low_entropy(self) -> bool:
        return self.entropy < LOW_ENTROPY

    @property
    def high_entropy(self) -> bool:
        return self.entropy > HIGH_ENTROPY

    @property
    def overconfident(self) -> bool:
        return self.high_confidence and self.low_entropy


def check_prob_vector(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOLERANCE:
        raise MetricError("not a probability vector")
    return p


def confidence_entropy(p) -> ConfidenceEntropy:
    """Maximum class probability and Shannon entropy in nats."""
    p = check_prob_vector(p)
    return ConfidenceEntropy(float(p.max()), float(stats.entropy(p)))


def attack_success_rate(predictions: Sequence, n_attack: int, benign_label="Normal") -> float:
    """Percentage of crafted samples predicted as anything but benign."""
    if n_attack <= 0:
        raise MetricError("n_attack must be positive")
    misclassified = sum(1 for label in predictions if label != benign_label)
    return 100.0 * misclassified / n_attack


def _gmean(values: np.ndarray) -> float:
    if len(values) == 0:
        return float("nan")
    if np.any(values <= 0):
        return 0.0
    return float(stats.gmean(values))


def prediction_report(
    probabilities,
    class_labels: Sequence,
    benign_label="Normal",
) -> Dict[str, object]:
    """Per misclassified class: counts, arithmetic and geometric mean confidence and entropy.

    ``probabilities`` holds one ProbVector per crafted sample, columns ordered as
    ``class_labels``.
    """
    probs = np.atleast_2d(np.asarray(probabilities, dtype=float))
    if probs.shape[1] != len(class_labels):
        raise DimMismatch(f"{probs.shape[1]} probability columns for {len(class_labels)} labels")
    scored = [confidence_entropy(row) for row in probs]
    predicted = [class_labels[i] for i in probs.argmax(axis=1)]

    per_class = {}
    for label in dict.fromkeys(predicted):
        if label == benign_label:
            continue
        idx = [i for i, p in enumerate(predicted) if p == label]
        conf = np.array([scored[i].confidence for i in idx])
        ent = np.array([scored[i].entropy for i in idx])
        per_class[label] = {
            "count": len(idx),
            "confidence_mean": float(conf.mean()),
            "confidence_gmean": _gmean(conf),
            "entropy_mean": float(ent.mean()),
            "entropy_gmean": _gmean(ent),
            "high_confidence": sum(scored[i].high_confidence for i in idx),
            "low_entropy": sum(scored[i].low_entropy for i in idx),
            "high_entropy": sum(scored[i].high_entropy for i in idx),
            "overconfident": sum(scored[i].overconfident for i in idx),
        }

    total = sum(c["count"] for c in per_class.values())
    weighted = {}
    for key in ("confidence_mean", "confidence_gmean", "entropy_mean", "entropy_gmean"):
        weighted[key] = (
            sum(c[key] * c["count"] for c in per_class.values()) / total if total else float("nan")
        )
    return {
        "asr": attack_success_rate(predicted, len(predicted), benign_label) if predicted else 0.0,
        "misclassified": total,
        "per_class": per_class,
        "weighted": weighted,
        "confidence_mean": float(np.mean([s.confidence for s in scored])) if scored else float("nan"),
        "entropy_mean": float(np.mean([s.entropy for s in scored])) if scored else float("nan"),
    }
