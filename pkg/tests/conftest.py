"""Shared pytest fixtures for trade-design tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from trade_design.models import Environment, SearchConfig


@pytest.fixture
def env_e1() -> Environment:
    """Two values, zero costs: every floor equals the guarantee."""
    return Environment((1.0, 2.0), (0.5, 0.5), (0.0, 0.0), "e1")


@pytest.fixture
def env_e2() -> Environment:
    """Two values with affine costs c(v) = v / 2."""
    return Environment((1.0, 2.0), (0.5, 0.5), (0.5, 1.0), "e2")


@pytest.fixture
def env_e3() -> Environment:
    """Trading the low value destroys surplus."""
    return Environment((1.0, 2.0), (0.5, 0.5), (3.0, 0.0), "e3")


@pytest.fixture
def env_non_affine() -> Environment:
    """Three values whose costs bend."""
    return Environment((1.0, 2.0, 3.0), (0.3, 0.3, 0.4), (0.0, 0.8, 1.0), "bent")


@pytest.fixture
def cheap_search() -> SearchConfig:
    """Small floor search that keeps randomized suites fast."""
    return SearchConfig(segments=3, restarts=1, bisection_steps=20, parallel=False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def _write_env(path: Path, values, probs, costs) -> Path:
    path.write_text(f"values: {list(values)}\nprobs: {list(probs)}\ncosts: {list(costs)}\n")
    return path


@pytest.fixture
def e1_file(tmp_path: Path) -> Path:
    return _write_env(tmp_path / "e1.yaml", [1, 2], [0.5, 0.5], [0, 0])


@pytest.fixture
def e2_file(tmp_path: Path) -> Path:
    return _write_env(tmp_path / "e2.yaml", [1, 2], [0.5, 0.5], [0.5, 1])


@pytest.fixture
def e3_file(tmp_path: Path) -> Path:
    return _write_env(tmp_path / "e3.yaml", [1, 2], [0.5, 0.5], [3, 0])


@pytest.fixture
def bent_file(tmp_path: Path) -> Path:
    return _write_env(tmp_path / "bent.yaml", [1, 2, 3], [0.3, 0.3, 0.4], [0, 0.8, 1])

