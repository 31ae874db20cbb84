"""Seeded random Hermitian samples.

Each verification case draws from its own generator,
``PCG64(SeedSequence(seed, spawn_key=(case,)))``, so any single case is
reproducible from ``(seed, case_id)`` alone.
"""

from __future__ import annotations

import numpy as np

from .operators import HermitianOperator, as_operator

SAMPLING_NOTE = (
    "entries i.i.d. complex standard normal, symmetrized (A + A*)/2, "
    "then rescaled to the requested relative norm ||H^-1/2 X H^-1/2||"
)


def case_rng(seed: int, case: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(case,))))


def random_hermitian(rng: np.random.Generator, dim: int) -> HermitianOperator:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator._trusted((g + g.conj().T) / 2)


def random_perturbation(rng: np.random.Generator, h, norm: float) -> HermitianOperator:
    """Random Hermitian X with ``relative_norm(X, h) == norm``."""
    from .perturbation import relative_norm

    h = as_operator(h)
    x = random_hermitian(rng, h.dim)
    n = relative_norm(x, h)
    while n == 0.0:  # measure-zero, but keep the contract
        x = random_hermitian(rng, h.dim)
        n = relative_norm(x, h)
    return x * (norm / n)


def random_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)
