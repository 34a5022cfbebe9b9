"""Overlap matrix, bi-orthogonal dual basis and the completeness projector.

Two indexing schemes are supported:

* ``hermitian``: states are paired with their own conjugates,
  R[a, b] = <right_a | right_b>, bras are right_a^dagger;
* ``nonhermitian``: each state carries its own left co-vector,
  R[a, b] = left_a . right_b, bras are the lefts.

In both cases the dual co-vectors are D = R^-1 Bras and the dual kets are
Phi R^-1 (Phi = columns of rights), so that D Phi = 1 and Bras Dk = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import DimensionError, InputError, RankDeficientError

Scheme = Literal["hermitian", "nonhermitian"]
SCHEMES = ("hermitian", "nonhermitian")
MAX_CONDITION = 1e8


def _rights_lefts(states) -> tuple[np.ndarray, np.ndarray]:
    if len(states) == 0:
        raise InputError("empty state set")
    dims = {len(s.right) for s in states}
    if len(dims) != 1:
        raise DimensionError(f"states have mixed dimensions {sorted(dims)}")
    Phi = np.column_stack([np.asarray(s.right, dtype=complex) for s in states])
    lefts = np.vstack([np.asarray(s.left, dtype=complex) for s in states])
    return Phi, lefts


def state_matrices(states, scheme: Scheme = "hermitian") -> tuple[np.ndarray, np.ndarray]:
    """(Phi, Bras): rights as columns, and the scheme's bra rows."""
    if scheme not in SCHEMES:
        raise InputError(f"unknown scheme {scheme!r}")
    Phi, lefts = _rights_lefts(states)
    return Phi, (Phi.conj().T if scheme == "hermitian" else lefts)


@dataclass(frozen=True)
class OverlapMatrix:
    entries: np.ndarray
    scheme: str
    condition: float
    tol_rank: float = MAX_CONDITION
    singular_values: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def smallest_singular_value(self) -> float:
        return float(self.singular_values.min())


def overlap_matrix(states: Sequence, scheme: Scheme = "hermitian", tol_rank: float = MAX_CONDITION) -> OverlapMatrix:
    Phi, Bras = state_matrices(states, scheme)
    dim, n = Phi.shape
    if n > dim:
        raise RankDeficientError(
            f"{n} states in dimension {dim}: the overlap matrix cannot be invertible", 0.0
        )
    R = Bras @ Phi
    if scheme == "hermitian":
        R = 0.5 * (R + R.conj().T)
    sv = np.linalg.svd(R, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    return OverlapMatrix(R, scheme, cond, tol_rank, sv)


@dataclass(frozen=True)
class DualBasis:
    """Dual co-vectors (rows of ``bras``) and dual kets (columns of ``kets``)."""

    bras: np.ndarray  # (|A|, dim)
    kets: np.ndarray  # (dim, |A|)
    states: tuple = field(repr=False)
    overlap: OverlapMatrix = field(repr=False)

    @property
    def scheme(self) -> str:
        return self.overlap.scheme

    def __len__(self):
        return self.bras.shape[0]


def dual_basis(states: Sequence, R: OverlapMatrix | None = None, scheme: Scheme = "hermitian") -> DualBasis:
    if R is None:
        R = overlap_matrix(states, scheme)
    if not R.condition <= R.tol_rank:
        smin = R.smallest_singular_value
        raise RankDeficientError(
            f"overlap matrix is rank deficient (condition {R.condition:.3e} > {R.tol_rank:.1e}, "
            f"smallest singular value {smin:.3e}); the state set is redundant",
            smin,
        )
    Phi, Bras = state_matrices(states, R.scheme)
    if R.entries.shape != (Phi.shape[1], Phi.shape[1]):
        raise DimensionError("overlap matrix does not match the state set")
    D = np.linalg.solve(R.entries, Bras)
    Dk = np.linalg.solve(R.entries.T, Phi.T).T
    return DualBasis(D, Dk, tuple(states), R)


def _pair(states, duals) -> tuple[np.ndarray, np.ndarray]:
    Phi, _ = _rights_lefts(states)
    D = duals.bras if isinstance(duals, DualBasis) else np.asarray(duals, dtype=complex)
    if D.shape != Phi.shape[::-1]:
        raise DimensionError(f"duals {D.shape} do not pair with {Phi.shape[1]} states of dimension {Phi.shape[0]}")
    return Phi, D


def completeness_projector(states, duals) -> np.ndarray:
    """Pi = sum_a right_a dual_a (identity when the states span the space)."""
    Phi, D = _pair(states, duals)
    return Phi @ D


def biorthonormality_residual(states, duals) -> float:
    Phi, D = _pair(states, duals)
    return float(np.max(np.abs(D @ Phi - np.eye(Phi.shape[1]))))


def double_sum_projector(states, scheme: Scheme = "hermitian") -> np.ndarray:
    """sum_{a,b} right_a (R^-1)_{ab} bra_b with R^-1 formed explicitly."""
    Phi, Bras = state_matrices(states, scheme)
    Rinv = np.linalg.inv(Bras @ Phi)
    out = np.zeros((Phi.shape[0], Phi.shape[0]), dtype=complex)
    for a in range(Phi.shape[1]):
        for b in range(Phi.shape[1]):
            out += Rinv[a, b] * np.outer(Phi[:, a], Bras[b])
    return out


def projector_defects(states, duals) -> dict[str, float]:
    """Idempotency and reproduction errors of Pi (max-abs norms)."""
    Phi, D = _pair(states, duals)
    Pi = Phi @ D
    out = {
        "idempotency": float(np.max(np.abs(Pi @ Pi - Pi))),
        "right_reproduction": float(np.max(np.abs(Pi @ Phi - Phi))),
        "dual_reproduction": float(np.max(np.abs(D @ Pi - D))),
    }
    if Phi.shape[0] == Phi.shape[1]:
        out["identity"] = float(np.max(np.abs(Pi - np.eye(Phi.shape[0]))))
    return out
