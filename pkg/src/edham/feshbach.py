"""Exact energy-dependent reduction of a Hermitian Hamiltonian onto range(P).

Eliminating the Q = 1 - P component of  H_R psi = E psi  gives

    H_eff(E) = H_PP + H_PQ (E - H_QQ)^-1 H_QP

in coordinates of an orthonormal basis of range(P).  Its self-consistent
spectrum reproduces every eigenvalue of H_R whose eigenvector has a nonzero
P-component and which does not coincide with an eigenvalue of H_QQ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, DimensionError, PoleError
from .models import REAL_LINE, Domain, EDHamiltonian, is_hermitian

POLE_TOL = 1e-8
PROJECTION_TOL = 1e-10
PROJECTOR_TOL = 1e-12


@dataclass(frozen=True)
class FeshbachModel:
    H_R: np.ndarray
    P: np.ndarray
    p_basis: np.ndarray
    q_basis: np.ndarray
    pole_tol: float = POLE_TOL
    projection_tol: float = PROJECTION_TOL
    # eigenvalues of H_QQ, ascending
    poles: np.ndarray = field(default=None, repr=False)
    block_cache: tuple = field(default=(), repr=False, compare=False)

    @property
    def D(self) -> int:
        return self.H_R.shape[0]

    @property
    def rank(self) -> int:
        return self.p_basis.shape[1]

    @property
    def Q(self) -> np.ndarray:
        return np.eye(self.D) - self.P

    def blocks(self):
        """(H_PP, H_PQ, H_QP, H_QQ) in basis coordinates."""
        if self.block_cache:
            return self.block_cache
        Pb, Qb, H = self.p_basis, self.q_basis, self.H_R
        return Pb.conj().T @ H @ Pb, Pb.conj().T @ H @ Qb, Qb.conj().T @ H @ Pb, Qb.conj().T @ H @ Qb


def _validate_hermitian(H_R):
    H_R = np.asarray(H_R, dtype=complex)
    if H_R.ndim != 2 or H_R.shape[0] != H_R.shape[1]:
        raise DimensionError(f"H_R must be square, got {H_R.shape}")
    if not is_hermitian(H_R):
        raise ConfigError("H_R must be Hermitian")
    return H_R


def _finish(H_R, P, p_basis, q_basis, pole_tol, projection_tol) -> FeshbachModel:
    for a in (H_R, P, p_basis, q_basis):
        a.setflags(write=False)
    if q_basis.shape[1]:
        H_QQ = q_basis.conj().T @ H_R @ q_basis
        poles = np.linalg.eigvalsh(0.5 * (H_QQ + H_QQ.conj().T))
    else:
        poles = np.zeros(0)
    poles.setflags(write=False)
    m = FeshbachModel(H_R, P, p_basis, q_basis, pole_tol, projection_tol, poles)
    blocks = m.blocks()
    for blk in blocks:
        blk.setflags(write=False)
    return FeshbachModel(H_R, P, p_basis, q_basis, pole_tol, projection_tol, poles, blocks)


def from_projector(H_R, P, pole_tol: float = POLE_TOL, projection_tol: float = PROJECTION_TOL) -> FeshbachModel:
    """Model from an orthogonal projector P (P^2 = P = P^dagger, rank >= 1)."""
    H_R = _validate_hermitian(H_R)
    P = np.asarray(P, dtype=complex)
    if P.shape != H_R.shape:
        raise DimensionError(f"P has shape {P.shape}, H_R has {H_R.shape}")
    if np.max(np.abs(P @ P - P)) > PROJECTOR_TOL or not is_hermitian(P, PROJECTOR_TOL):
        raise ConfigError("P must be an orthogonal projector (P^2 = P = P^dagger)")
    w, V = np.linalg.eigh(P)
    keep = w > 0.5
    if not keep.any():
        raise ConfigError("P must have rank >= 1")
    # prefer coordinate vectors when P is diagonal so that bases are canonical
    if np.max(np.abs(P - np.diag(np.diag(P)))) == 0.0:
        d = np.diag(P).real > 0.5
        eye = np.eye(P.shape[0], dtype=complex)
        return _finish(H_R, P, eye[:, d], eye[:, ~d], pole_tol, projection_tol)
    return _finish(H_R, P, V[:, keep], V[:, ~keep], pole_tol, projection_tol)


def from_basis(H_R, p_basis, pole_tol: float = POLE_TOL, projection_tol: float = PROJECTION_TOL) -> FeshbachModel:
    """Model whose P projects onto the span of the orthonormal columns of ``p_basis``."""
    H_R = _validate_hermitian(H_R)
    Pb = np.asarray(p_basis, dtype=complex)
    if Pb.ndim != 2 or Pb.shape[0] != H_R.shape[0] or Pb.shape[1] < 1:
        raise DimensionError(f"p_basis must be D x k with k >= 1, got {Pb.shape}")
    if np.max(np.abs(Pb.conj().T @ Pb - np.eye(Pb.shape[1]))) > 1e-12:
        raise ConfigError("p_basis columns must be orthonormal")
    P = Pb @ Pb.conj().T
    full = sla.null_space(Pb.conj().T) if Pb.shape[1] < Pb.shape[0] else np.zeros((Pb.shape[0], 0))
    return _finish(H_R, P, Pb, full.astype(complex), pole_tol, projection_tol)


def coordinate_projector(D: int, indices) -> np.ndarray:
    P = np.zeros((D, D), dtype=complex)
    for i in indices:
        P[i, i] = 1.0
    return P


def _check_pole(m: FeshbachModel, E: float) -> None:
    if len(m.poles):
        gap = np.min(np.abs(E - m.poles))
        if gap < m.pole_tol:
            raise PoleError(f"E={E!r} is within {gap:.3e} of an eigenvalue of H_QQ")


def feshbach_reduce(m: FeshbachModel, E: float) -> np.ndarray:
    """k x k effective Hamiltonian at real energy E (p_basis coordinates)."""
    E = float(E)
    _check_pole(m, E)
    H_PP, H_PQ, H_QP, H_QQ = m.blocks()
    if m.q_basis.shape[1] == 0:
        return H_PP.copy()
    A = -H_QQ
    A.flat[:: A.shape[0] + 1] += E
    H = H_PP + H_PQ @ np.linalg.solve(A, H_QP)
    return 0.5 * (H + H.conj().T)


def feshbach_reduce_full(m: FeshbachModel, E: float) -> np.ndarray:
    """The same operator acting on the full D-dimensional space.

    Uses P H P + P H Q M^-1 Q H P with M = Q (E - H_R) Q + P, which is
    invertible on the whole space and equals E - H_QQ on range(Q); no
    Q-space basis is involved.
    """
    E = float(E)
    _check_pole(m, E)
    P, Q, H = m.P, m.Q, m.H_R
    M = Q @ (E * np.eye(m.D) - H) @ Q + P
    return P @ H @ P + P @ H @ Q @ np.linalg.solve(M, Q @ H @ P)


def feshbach_model_as_ed(m: FeshbachModel, label: str = "feshbach") -> EDHamiltonian:
    domain = Domain((REAL_LINE,), poles=tuple(float(p) for p in m.poles), pole_tol=m.pole_tol)
    return EDHamiltonian(
        dim=m.rank,
        domain=domain,
        hermitian_each_z=True,
        evaluator=lambda z: feshbach_reduce(m, z),
        label=label,
    )


@dataclass(frozen=True)
class Recoverability:
    eigenvalue: float
    recoverable: bool
    reason: str  # "ok" | "zero_projection" | "pole_collision"
    projection_norm: float
    pole_gap: Optional[float]


def recoverable_spectrum(m: FeshbachModel) -> list[Recoverability]:
    """Which eigenvalues of H_R the self-consistent reduced problem can return."""
    w, V = np.linalg.eigh(m.H_R)
    out = []
    for E_i, psi in zip(w, V.T):
        proj = float(np.linalg.norm(m.P @ psi))
        gap = float(np.min(np.abs(E_i - m.poles))) if len(m.poles) else None
        if not proj > m.projection_tol:
            reason = "zero_projection"
        elif gap is not None and not gap > m.pole_tol:
            reason = "pole_collision"
        else:
            reason = "ok"
        out.append(Recoverability(float(E_i), reason == "ok", reason, proj, gap))
    return out
