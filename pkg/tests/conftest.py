from __future__ import annotations

from pathlib import Path

import pytest

from corank.fixtures import make_oracle_pair_set

GOLDEN_DIR = Path(__file__).resolve().parent / "fixtures" / "golden"


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    assert GOLDEN_DIR.is_dir(), "run tests/fixtures/generate_fixtures.py first"
    return GOLDEN_DIR


@pytest.fixture(scope="session")
def golden_manifest(golden_dir) -> Path:
    return golden_dir / "fixture-rumor.json"


@pytest.fixture(scope="session")
def oracle_pairs_manifest(tmp_path_factory) -> Path:
    """100 synthetic oracle pairs, built once per session."""
    out = tmp_path_factory.mktemp("oracle_pairs")
    return make_oracle_pair_set(out, n_pairs=100, seed=2024)
