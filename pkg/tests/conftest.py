"""
Pytest configuration and shared fixtures for nahkit tests.
"""

import json
import random
import tempfile
from fractions import Fraction
from pathlib import Path

import pytest

from nahkit.linalg import det
from nahkit.norms import DiagNorm
from nahkit.scalars import PrimePlace


@pytest.fixture
def temp_dir():
    """Provide a temporary directory that's cleaned up after the test."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def project_root():
    """Return the project root directory."""
    return Path(__file__).parent.parent


@pytest.fixture
def rng():
    """Seeded generator so that property tests are reproducible."""
    return random.Random(20240611)


@pytest.fixture
def p2():
    return PrimePlace(2)


@pytest.fixture
def make_norm():
    """Build a DiagNorm from plain ints: basis rows, weights, prime."""

    def _make(weights, basis=None, p=2):
        dim = len(weights)
        if basis is None:
            basis = [[int(i == j) for j in range(dim)] for i in range(dim)]
        return DiagNorm(
            PrimePlace(p),
            tuple(tuple(Fraction(x) for x in row) for row in basis),
            tuple(Fraction(w) for w in weights),
        )

    return _make


@pytest.fixture
def write_model(temp_dir):
    """Write a model document as JSON and return its path."""

    def _write(name, document):
        path = temp_dir / name
        path.write_text(json.dumps(document))
        return path

    return _write


@pytest.fixture
def random_norm(rng):
    """Sampler of random norms: invertible integer basis, small rational weights."""

    def _sample(dim, p, max_den=6, spread=3):
        while True:
            basis = tuple(
                tuple(Fraction(rng.randint(-3, 3)) for _ in range(dim))
                for _ in range(dim)
            )
            if det(basis) == 0:
                continue
            weights = tuple(
                Fraction(
                    rng.randint(-spread * max_den, spread * max_den),
                    rng.randint(1, max_den),
                )
                for _ in range(dim)
            )
            return DiagNorm(PrimePlace(p), basis, weights)

    return _sample


@pytest.fixture
def random_invertible(rng):
    """Sampler of invertible rational matrices with small integer entries."""

    def _sample(dim, lo=-2, hi=2):
        while True:
            m = tuple(
                tuple(Fraction(rng.randint(lo, hi)) for _ in range(dim))
                for _ in range(dim)
            )
            if det(m) != 0:
                return m

    return _sample
