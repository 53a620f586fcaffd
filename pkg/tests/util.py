"""Shared helpers for the test suite."""

import numpy as np


def random_density(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank density matrix (Hermitian, PSD, unit trace)."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_hermitian_unit_trace(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian matrix normalized to unit trace (not necessarily PSD)."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = 0.5 * (a + a.conj().T)
    tr = np.trace(h).real
    if abs(tr) < 1e-3:
        h = h + np.eye(dim)
        tr = np.trace(h).real
    return h / tr


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    d = 0.5 * (d + d.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(d)).sum())
