"""
Pytest configuration file.
Puts the repository root on the Python path and provides shared fixtures.
"""

import sys
from pathlib import Path

import pytest

repo_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(repo_root))

from fpa_forge.craft.campaign import CraftSpec  # noqa: E402


@pytest.fixture
def spec():
    """Small QoS 1 campaign with topic padding."""
    return CraftSpec(publish_count=4, topic_pad_range=(0, 3), payload_pad_counts=(0, 2))


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv("FPA_FORGE_SEED", raising=False)
