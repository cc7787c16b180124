from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # genmm, diagnostic_fixtures

from megamodels import harness

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN_DIR


@pytest.fixture
def scenario_defs():
    """Load bundled scenario files by name, freshly parsed per test."""

    def load(*names: str):
        return harness.load_scenario_defs(names)

    return load


@pytest.fixture
def runtime():
    """Fresh logical-clock runtime wired to a mock system."""

    def build(*scenario_names: str, **kwargs):
        defs = harness.load_scenario_defs(scenario_names) if scenario_names else []
        kwargs.setdefault("clock", "logical")
        return harness.build_runtime(defs, **kwargs)

    return build
