"""
Pytest fixtures and configuration for fastcmh tests.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Add repository root (package) and tests dir (`from conftest import ...`) to path
TESTS_DIR = Path(__file__).parent
REPO_ROOT = TESTS_DIR.parent
sys.path.insert(0, str(REPO_ROOT))
sys.path.insert(0, str(TESTS_DIR))

from fastcmh.interval_miner import Dataset  # noqa: E402
from fastcmh.stats_core import StratifiedCounts  # noqa: E402

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES_DIR / name


def random_counts(rng: np.random.Generator, K: int, max_n: int) -> StratifiedCounts:
    """Random design with every n^i in [1, max_n]."""
    n = rng.integers(1, max_n + 1, size=K)
    n1 = np.array([rng.integers(0, ni + 1) for ni in n])
    return StratifiedCounts(tuple(n.tolist()), tuple(n1.tolist()))


def random_region_support(rng: np.random.Generator, counts: StratifiedCounts) -> tuple:
    """Supports inside x^i <= min(n1^i, n^i - n1^i)."""
    return tuple(int(rng.integers(0, cap + 1)) for cap in counts.cap)


def random_dataset(seed: int, n: int = 40, L: int = 50, K: int = 2, p1: float = 0.3) -> Dataset:
    """Unstructured random dataset with both labels in every category."""
    rng = np.random.default_rng(seed)
    covariate = np.arange(n) % K
    labels = (np.arange(n) // K) % 2
    bits = (rng.random((n, L)) < p1).astype(np.uint8)
    # an enriched column so that some intervals are testable
    column = int(rng.integers(0, L))
    bits[:, column] = np.where(labels == 1, rng.random(n) < 0.8, rng.random(n) < 0.2)
    return Dataset(bits, labels, covariate)


@pytest.fixture
def counts_factory():
    """Factory fixture to build StratifiedCounts from margins."""
    def _create(n, n1):
        return StratifiedCounts(tuple(n), tuple(n1))
    return _create


@pytest.fixture
def separating_dataset():
    """40 samples, K=2 of 20 (10 cases each), L=3; position 1 is 1 exactly for the cases."""
    covariate = np.repeat([0, 1], 20)
    labels = np.tile(np.r_[np.ones(10), np.zeros(10)], 2).astype(np.uint8)
    bits = np.zeros((40, 3), dtype=np.uint8)
    bits[:, 1] = labels
    return Dataset(bits, labels, covariate)


@pytest.fixture
def separating_files():
    """Paths of the 40-sample toy dataset files."""
    return {
        "data": fixture_path("separating.data.txt"),
        "labels": fixture_path("separating.labels.txt"),
        "covariates": fixture_path("separating.covariates.txt"),
    }


@pytest.fixture
def tiny_files():
    """Paths of the 3-sample toy dataset files."""
    return {
        "data": fixture_path("tiny.data.txt"),
        "labels": fixture_path("tiny.labels.txt"),
        "covariates": fixture_path("tiny.covariates.txt"),
    }


@pytest.fixture
def chi2_oracle():
    with open(fixture_path("chi2_sf_oracle.json")) as f:
        return json.load(f)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
