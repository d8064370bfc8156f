"""
End-to-end tests for the command-line interface.
Each test calls run() with an argv list and checks exit codes and outputs.
"""

import pandas as pd
import pytest

from fpa_forge.cli import build_parser, run


@pytest.fixture
def campaign_yaml(tmp_path):
    path = tmp_path / "campaign.yaml"
    path.write_text("publish_count: 6\ntopic_pad_range: [1, 5]\npayload_pad_counts: [0, 3]\n")
    return path


def craft(tmp_path, name, *extra):
    out = tmp_path / f"{name}.pcap"
    assert run(["-q", "craft", "--out", str(out), *extra]) == 0
    return out


class TestUsage:
    """Test suite for argument handling."""

    def test_no_command(self):
        """Test that a missing subcommand is a usage error."""
        assert run([]) == 2

    def test_unknown_option(self):
        """Test that bad options exit with 2."""
        assert run(["craft", "--bogus"]) == 2

    def test_bad_list(self, tmp_path):
        """Test that malformed comma lists are usage errors."""
        assert run(["simulate", "--eta", "1,x", "--out", str(tmp_path / "r.csv")]) == 2

    def test_subcommands(self):
        """Test that every subcommand is registered."""
        parser = build_parser()
        for argv in (["craft", "--out", "x"], ["extract", "--in", "a", "--out", "b"], ["plot", "r.csv"],
                     ["surrogate", "eval", "--model", "m", "--crafted", "c"]):
            assert callable(parser.parse_args(argv).handler)


class TestCraft:
    """Test suite for craft and extract."""

    def test_deterministic_pcap(self, tmp_path, campaign_yaml, capsys):
        """Test that the same seed writes the same bytes."""
        a = craft(tmp_path, "a", "--config", str(campaign_yaml), "--seed", "5")
        b = craft(tmp_path, "b", "--config", str(campaign_yaml), "--seed", "5")
        assert a.read_bytes() == b.read_bytes()
        assert '"PUBLISH": 6' in capsys.readouterr().out

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        """Test that $FPA_FORGE_SEED applies without a flag."""
        monkeypatch.setenv("FPA_FORGE_SEED", "9")
        a = craft(tmp_path, "env")
        b = craft(tmp_path, "flag", "--seed", "9")
        assert a.read_bytes() == b.read_bytes()

    def test_features_alongside(self, tmp_path):
        """Test the labelled CSV written next to the pcap."""
        csv = tmp_path / "f.csv"
        craft(tmp_path, "c", "--csv", str(csv), "--label", "Normal")
        df = pd.read_csv(csv)
        assert len(df.columns) == 63
        assert set(df["Attack_type"]) == {"Normal"}

    def test_extract(self, tmp_path):
        """Test extracting a profile from a crafted pcap."""
        pcap = craft(tmp_path, "e")
        out = tmp_path / "e.csv"
        assert run(["-q", "extract", "--in", str(pcap), "--out", str(out), "--profile", "nids18"]) == 0
        assert len(pd.read_csv(out).columns) == 11

    def test_missing_input(self, tmp_path):
        """Test that an absent pcap is a runtime error."""
        assert run(["-q", "extract", "--in", str(tmp_path / "none.pcap"), "--out", str(tmp_path / "o.csv")]) == 1

    def test_invalid_campaign(self, tmp_path):
        """Test that a topic outside the ACL fails with 1."""
        path = tmp_path / "bad.yaml"
        path.write_text("base_topic: Elsewhere/Sensor\n")
        assert run(["-q", "craft", "--config", str(path), "--out", str(tmp_path / "x.pcap")]) == 1


class TestSimulate:
    """Test suite for simulate and plot."""

    def test_eta_sweep(self, tmp_path):
        """Test a small sweep written as CSV."""
        out = tmp_path / "r.csv"
        assert run(["-q", "simulate", "--eta", "100,110", "--fp", "1,16", "--repeats", "2", "--horizon", "1h", "--out", str(out)]) == 0
        assert len(pd.read_csv(out)) == 4

    def test_budget_from_rho(self, tmp_path):
        """Test that --rho alone selects a budget sweep."""
        out = tmp_path / "b.csv"
        assert run(["-q", "simulate", "--rho", "0.9", "--budget", "60,120", "--fp", "4.006", "--repeats", "1", "--out", str(out)]) == 0
        df = pd.read_csv(out)
        assert list(df["eta"]) == pytest.approx([54.0, 108.0])

    def test_unstable(self, tmp_path):
        """Test that rho >= 1 is a runtime error."""
        assert run(["-q", "simulate", "--eta", "130", "--out", str(tmp_path / "u.csv")]) == 1

    def test_plot(self, tmp_path):
        """Test SVG figures next to the results."""
        out = tmp_path / "p.csv"
        assert run(["-q", "simulate", "--eta", "100", "--fp", "1,8", "--repeats", "1", "--out", str(out)]) == 0
        assert run(["-q", "plot", str(out)]) == 0
        assert list((tmp_path / "graphs").glob("*.svg"))

    def test_plot_zipped_preset(self, tmp_path):
        """Test figures for a sweep with one FP level per rate."""
        out = tmp_path / "z.csv"
        assert run(["-q", "simulate", "--preset", "eta_sweep_1h", "--repeats", "1", "--out", str(out)]) == 0
        assert len(pd.read_csv(out)) == 5
        assert run(["-q", "plot", str(out)]) == 0
        assert len(list((tmp_path / "graphs").glob("z_*.svg"))) == 2


class TestAnalysis:
    """Test suite for analyze and the surrogate commands."""

    @pytest.fixture
    def feature_csvs(self, tmp_path, campaign_yaml):
        plain = tmp_path / "plain.yaml"
        plain.write_text("publish_count: 20\ntopic_pad_range: [0, 0]\n")
        normal, attack, padded = tmp_path / "normal.csv", tmp_path / "attack.csv", tmp_path / "padded.csv"
        craft(tmp_path, "n", "--config", str(plain), "--csv", str(normal), "--label", "Normal", "--seed", "1")
        craft(tmp_path, "a", "--config", str(campaign_yaml), "--csv", str(attack), "--label", "DDoS_TCP", "--seed", "2")
        craft(tmp_path, "p", "--config", str(campaign_yaml), "--csv", str(padded), "--label", "Normal", "--seed", "3")
        return normal, attack, padded

    def test_analyze(self, tmp_path, feature_csvs):
        """Test the metric report CSV."""
        normal, _, padded = feature_csvs
        out = tmp_path / "report.csv"
        assert run(["-q", "analyze", "--reference", str(normal), "--crafted", f"padded={padded}", "--out", str(out)]) == 0
        assert list(pd.read_csv(out)["class"]) == ["padded"]

    def test_surrogate_fit_and_eval(self, tmp_path, feature_csvs):
        """Test training on two labels and scoring crafted traffic."""
        normal, attack, padded = feature_csvs
        train = tmp_path / "train.csv"
        pd.concat([pd.read_csv(normal), pd.read_csv(attack)]).to_csv(train, index=False)
        model = tmp_path / "model.txt"
        assert run(["-q", "surrogate", "fit", "--train", str(train), "--epochs", "50", "--out", str(model)]) == 0
        report = tmp_path / "eval.json"
        assert run(["-q", "surrogate", "eval", "--model", str(model), "--crafted", str(padded), "--out", str(report)]) == 0
        assert '"asr"' in report.read_text()

    def test_unlabelled_training(self, tmp_path, feature_csvs):
        """Test that training data needs Attack_type."""
        normal, _, _ = feature_csvs
        bare = tmp_path / "bare.csv"
        pd.read_csv(normal).drop(columns=["Attack_type"]).to_csv(bare, index=False)
        assert run(["-q", "surrogate", "fit", "--train", str(bare), "--out", str(tmp_path / "m.txt")]) == 1
