"""
Unit tests for crafted-vs-reference metric tables.
"""

import numpy as np
import pandas as pd
import pytest

from fpa_forge.analysis.report import REPORT_COLUMNS, metric_encoder, metric_report
from fpa_forge.errors import MetricError

TOPICS = ["Building1/Floor3/Sensor1", "Building1/Floor3/Sensor2", "Building1/Floor3/Door"]


@pytest.fixture
def reference():
    rng = np.random.default_rng(0)
    n = 200
    return pd.DataFrame({
        "mqtt.topic": [TOPICS[i % 3] for i in range(n)],
        "tcp.len": rng.normal(40, 4, n).round(),
        "mqtt.len": rng.normal(38, 4, n).round(),
        "Attack_type": ["Normal"] * n,
    })


@pytest.fixture
def padded(reference):
    k = np.arange(len(reference)) % 20 + 1
    return reference.assign(
        **{
            "mqtt.topic": [t + " " * int(n) for t, n in zip(reference["mqtt.topic"], k)],
            "tcp.len": reference["tcp.len"] + k,
            "mqtt.len": reference["mqtt.len"] + k,
        }
    )


class TestEncoder:
    """Test suite for metric_encoder."""

    def test_column_roles(self, reference):
        """Test that strings are one-hot and labels are dropped."""
        vocab = metric_encoder(reference)
        assert list(vocab.categories) == ["mqtt.topic"]
        assert set(vocab.numeric) == {"tcp.len", "mqtt.len"}
        assert vocab.dimension == 5
        assert vocab.mode == "strict"

    def test_column_subset(self, reference):
        """Test restricting the encoded columns."""
        assert metric_encoder(reference, ["tcp.len", "not.there"]).dimension == 1


class TestMetricReport:
    """Test suite for metric_report."""

    def test_table(self, reference, padded):
        """Test one row per class with every metric column."""
        result = metric_report(reference, {"same": reference, "padded": padded})
        table = result["table"]
        assert list(table.columns) == REPORT_COLUMNS
        assert list(table["class"]) == ["same", "padded"]
        assert result["dimension"] == 5
        assert result["stats"]["regularization_epsilon"] > 0

    def test_identical_class(self, reference):
        """Test that the reference compared with itself is similar and not divergent."""
        row = metric_report(reference, {"same": reference})["table"].iloc[0]
        assert row["cosine"] == pytest.approx(1.0)
        assert row["pearson"] == pytest.approx(1.0)
        assert row["kl_feature_mean"] == pytest.approx(0.0, abs=1e-9)
        assert row["kl_pca"] == pytest.approx(0.0, abs=1e-9)

    def test_padding_moves_samples(self, reference, padded):
        """Test that padded samples sit further from the reference."""
        table = metric_report(reference, {"same": reference, "padded": padded})["table"].set_index("class")
        assert table.loc["padded", "mahalanobis"] > table.loc["same", "mahalanobis"]
        assert table.loc["padded", "kl_feature_max"] > table.loc["same", "kl_feature_max"]
        assert table.loc["padded", "mahalanobis_squared"] >= table.loc["padded", "mahalanobis"] ** 2

    def test_pairwise(self, reference, padded):
        """Test the pairwise distance mode."""
        table = metric_report(reference, {"padded": padded}, mode="pairwise")["table"]
        assert table.loc[0, "euclidean"] > 0
        assert np.isfinite(table.loc[0, "mahalanobis"])

    def test_bad_mode(self, reference):
        """Test that unknown distance modes are refused."""
        with pytest.raises(MetricError):
            metric_report(reference, {"same": reference}, mode="nearest")
