"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def well_posed_square(n: int, seed: int) -> np.ndarray:
    """A deterministic, well-conditioned square matrix (diagonally loaded)."""
    g = np.random.default_rng(seed)
    a = g.standard_normal((n, n)) + 3.0 * np.eye(n)
    return a / np.linalg.norm(a, axis=0, keepdims=True)
