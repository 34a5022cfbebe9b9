"""Seeded random matrices for experiments and tests."""

from __future__ import annotations

import numpy as np


def rng_from(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_hermitian(D: int, seed=None, scale: float = 1.0) -> np.ndarray:
    rng = rng_from(seed)
    A = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    return scale * 0.5 * (A + A.conj().T) / np.sqrt(D)


def random_isometry(D: int, k: int, seed=None) -> np.ndarray:
    """D x k matrix with orthonormal columns (Haar-like via QR)."""
    rng = rng_from(seed)
    Z = rng.standard_normal((D, k)) + 1j * rng.standard_normal((D, k))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_projector(D: int, k: int, seed=None) -> np.ndarray:
    V = random_isometry(D, k, seed)
    P = V @ V.conj().T
    return 0.5 * (P + P.conj().T)


def random_real_spectrum(D: int, seed=None, spread: float = 3.0):
    """S diag(E) S^-1 with real E; returns (H0, E, S)."""
    rng = rng_from(seed)
    E = np.sort(rng.uniform(-spread, spread, D))
    S = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    return S @ np.diag(E) @ np.linalg.inv(S), E, S
