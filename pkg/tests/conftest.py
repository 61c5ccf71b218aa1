"""Fixtures for bayes-primer tests."""
from __future__ import annotations

from collections.abc import Callable
import json
from pathlib import Path
from typing import Any

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"
MODELS = FIXTURES / "models"


def load_json_fixture(filename: str) -> Any:
    """Load a JSON fixture file."""
    return json.loads((FIXTURES / filename).read_text(encoding="utf-8"))


def fixture_path(*parts: str) -> Path:
    """Absolute path of a fixture file."""
    return FIXTURES.joinpath(*parts)


@pytest.fixture(name="normal_sample")
def normal_sample_fixture() -> np.ndarray:
    """Seeded N(5, 2^2) sample of 50 values."""
    return np.random.default_rng(20240501).normal(5.0, 2.0, size=50)


@pytest.fixture(name="write_csv")
def write_csv_fixture(tmp_path: Path) -> Callable[[str, str], Path]:
    """Write CSV text into the test's temporary directory."""

    def write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture(autouse=True)
def clear_seed_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep a developer's BAYES_PRIMER_SEED out of the tests."""
    monkeypatch.delenv("BAYES_PRIMER_SEED", raising=False)
