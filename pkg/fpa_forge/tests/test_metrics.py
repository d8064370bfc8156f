"""
Unit tests for similarity, divergence and classifier-output metrics.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from fpa_forge.analysis.metrics import (
    GridSpec,
    ReferenceDistribution,
    attack_success_rate,
    confidence_entropy,
    cosine,
    discrete_kl,
    euclidean,
    histogram_kl,
    kde_pdf,
    kl_divergence,
    kl_pca_joint,
    kl_per_feature,
    mahalanobis,
    mahalanobis_pair,
    pearson,
    prediction_report,
)
from fpa_forge.errors import (
    DegenerateSamples,
    DimMismatch,
    MetricError,
    SingularCovariance,
    ZeroVariance,
    ZeroVector,
)


class TestSimilarity:
    """Test suite for cosine, Pearson and Euclidean."""

    def test_cosine(self):
        """Test a 45 degree angle."""
        assert cosine([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2))

    def test_cosine_zero_vector(self):
        """Test that a zero vector is refused."""
        with pytest.raises(ZeroVector):
            cosine([0, 0], [1, 0])

    def test_pearson_is_centered_cosine(self):
        """Test Pearson against scipy and centered cosine."""
        from scipy.stats import pearsonr

        u, v = np.array([1.0, 2.0, 4.0, 7.0]), np.array([2.0, 1.0, 5.0, 6.0])
        assert pearson(u, v) == pytest.approx(cosine(u - u.mean(), v - v.mean()))
        assert pearson(u, v) == pytest.approx(pearsonr(u, v)[0])

    def test_pearson_constant(self):
        """Test that a constant input has no correlation."""
        with pytest.raises(ZeroVariance):
            pearson([1, 1, 1], [1, 2, 3])

    def test_dim_mismatch(self):
        """Test that vectors of different length are refused."""
        with pytest.raises(DimMismatch):
            euclidean([1, 2], [1, 2, 3])


class TestMahalanobis:
    """Test suite for the Mahalanobis distance."""

    def test_diagonal(self):
        """Test a diagonal covariance by hand."""
        ref = ReferenceDistribution.from_moments([0, 0], np.diag([4.0, 1.0]), regularize=False)
        assert mahalanobis([2, 0], ref) == pytest.approx(1.0)
        assert mahalanobis([2, 2], ref, squared=True) == pytest.approx(5.0)

    def test_identity_is_euclidean(self):
        """Test that the identity covariance reduces to Euclidean distance."""
        ref = ReferenceDistribution.from_moments([1, 2, 3], np.eye(3), regularize=False)
        assert mahalanobis([4, 6, 3], ref) == pytest.approx(euclidean([4, 6, 3], [1, 2, 3]))
        assert mahalanobis_pair([0, 0, 0], [3, 4, 0], ref) == pytest.approx(5.0)

    def test_singular_without_regularization(self):
        """Test that a rank-deficient covariance is refused."""
        with pytest.raises(SingularCovariance):
            ReferenceDistribution.from_moments([0, 0], [[1, 1], [1, 1]], regularize=False)

    def test_regularized_fit(self):
        """Test that a constant column is absorbed by the ridge."""
        samples = np.column_stack([np.arange(10.0), np.zeros(10)])
        ref = ReferenceDistribution.fit(samples)
        assert ref.regularization_epsilon > 0
        assert np.isfinite(mahalanobis([1.0, 0.0], ref))

    def test_fit_needs_rows(self):
        """Test that one sample is not enough."""
        with pytest.raises(DegenerateSamples):
            ReferenceDistribution.fit([[1.0, 2.0]])


class TestDivergence:
    """Test suite for KDE and KL estimates."""

    def test_discrete(self):
        """Test a two-outcome KL by hand."""
        assert discrete_kl([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.14384, abs=1e-5)
        assert discrete_kl([1, 2, 3], [1, 2, 3]) == pytest.approx(0.0)

    def test_discrete_bad_mass(self):
        """Test that negative entries are refused."""
        with pytest.raises(MetricError):
            discrete_kl([1, -1], [1, 1])

    def test_kde_integrates_to_one(self):
        """Test the density mass on a wide grid."""
        kde = kde_pdf(np.random.default_rng(0).normal(size=300))
        xs = np.linspace(-8, 8, 2001)
        assert integrate.trapezoid(kde(xs), xs) == pytest.approx(1.0, abs=1e-3)

    def test_rule_bandwidth(self):
        """Test Scott's factor times the sample deviation."""
        x = np.random.default_rng(1).normal(size=(400, 1))
        assert kde_pdf(x).bandwidth == pytest.approx(400 ** (-1 / 5) * x.std(ddof=1))

    def test_bad_bandwidth(self):
        """Test unknown rules and non-positive widths."""
        with pytest.raises(MetricError):
            kde_pdf([1.0, 2.0, 3.0], "wide")
        with pytest.raises(MetricError):
            kde_pdf([1.0, 2.0, 3.0], 0.0)

    def test_gaussian_shift(self):
        """Test KL between unit Gaussians one apart against 0.5."""
        rng = np.random.default_rng(2)
        value = kl_divergence(rng.normal(0, 1, 2000), rng.normal(1, 1, 2000))
        assert value == pytest.approx(0.5, rel=0.15)

    def test_identical_samples(self):
        """Test that identical samples have zero divergence."""
        x = np.random.default_rng(3).normal(size=500)
        assert kl_divergence(x, x) == pytest.approx(0.0, abs=1e-9)

    def test_histogram(self):
        """Test that shifted samples diverge and equal samples do not."""
        rng = np.random.default_rng(4)
        x = rng.normal(size=1000)
        assert histogram_kl(x, x) == pytest.approx(0.0)
        assert histogram_kl(x, x + 3) > 1.0

    def test_per_feature_mixes_estimators(self):
        """Test a continuous column beside a binary one."""
        rng = np.random.default_rng(5)
        p = np.column_stack([rng.normal(size=400), np.repeat([0, 1], 200)])
        q = np.column_stack([rng.normal(size=400), np.repeat([0, 1], [300, 100])])
        values = kl_per_feature(p, q, GridSpec(points=256))
        assert values.shape == (2,)
        assert values[0] < 0.1
        assert values[1] == pytest.approx(discrete_kl([0.5, 0.5], [0.75, 0.25]))

    def test_pca_joint(self):
        """Test the joint estimate on a shifted cloud."""
        rng = np.random.default_rng(6)
        p = rng.normal(size=(300, 5))
        q = rng.normal(size=(300, 5)) + 2.0
        assert kl_pca_joint(p, q, components=2, grid=GridSpec(points=1024)) > 1.0

    def test_grid_dimension_limit(self):
        """Test that grid integration stops at three dimensions."""
        x = np.random.default_rng(7).normal(size=(50, 4))
        with pytest.raises(DimMismatch):
            kl_divergence(x, x)


class TestOutputs:
    """Test suite for confidence, entropy and attack success."""

    def test_confidence_entropy(self):
        """Test a two-class vector at the confidence threshold."""
        score = confidence_entropy([0.9, 0.1])
        assert score.confidence == pytest.approx(0.9)
        assert score.entropy == pytest.approx(0.3251, abs=1e-4)
        assert not score.high_confidence
        assert score.low_entropy

    def test_uniform_entropy(self):
        """Test the maximum entropy over fifteen classes."""
        score = confidence_entropy(np.full(15, 1 / 15))
        assert score.entropy == pytest.approx(math.log(15))
        assert score.high_entropy

    def test_not_a_distribution(self):
        """Test that vectors not summing to one are refused."""
        with pytest.raises(MetricError):
            confidence_entropy([0.5, 0.6])

    def test_attack_success_rate(self):
        """Test the share of crafted samples predicted as attacks."""
        predictions = ["DDoS_UDP"] * 66570 + ["Normal"] * (83016 - 66570)
        assert attack_success_rate(predictions, 83016) == pytest.approx(80.19, abs=0.01)

    def test_prediction_report(self):
        """Test per-class aggregation over misclassified samples."""
        probs = [[0.1, 0.9, 0.0], [0.2, 0.8, 0.0], [0.9, 0.05, 0.05], [0.0, 0.0, 1.0]]
        report = prediction_report(probs, ["Normal", "DDoS_UDP", "XSS"])
        assert report["asr"] == pytest.approx(75.0)
        assert report["misclassified"] == 3
        assert report["per_class"]["DDoS_UDP"]["count"] == 2
        assert report["per_class"]["DDoS_UDP"]["confidence_mean"] == pytest.approx(0.85)
        assert report["per_class"]["XSS"]["overconfident"] == 1
        assert report["per_class"]["XSS"]["entropy_gmean"] == 0.0
