"""Energy-independent representatives of a set of self-consistent states.

From states right_a with energies E_a and their duals,

    K = sum_a right_a E_a dual_a          (acts like H(E_a) on right_a)
    L = sum_a dualket_a E_a bra_a          (acts like H(E_a) on bra_a, from the left)

together with the metrics that intertwine them: xi (Hermitian scheme) and
mu, nu (non-Hermitian scheme).  All operators live on the full space and
vanish on the complement of the state span.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import biortho, models, nlevp
from .biortho import DualBasis
from .errors import InputError, UnsupportedSpectrumError

BIORTHO_GATE = 1e-8
REAL_SPECTRUM_TOL = 1e-10
POSITIVITY_TOL = 1e-12


def _maxabs(M) -> float:
    return float(np.max(np.abs(M))) if np.size(M) else 0.0


def _energies(states) -> np.ndarray:
    return np.array([s.energy for s in states], dtype=float)


def _checked(states, duals: DualBasis):
    if len(states) != len(duals):
        raise InputError(f"{len(states)} states but {len(duals)} duals")
    res = biortho.biorthonormality_residual(states, duals)
    if not res <= BIORTHO_GATE:
        raise InputError(f"states and duals are not bi-orthonormal (residual {res:.3e})")
    Phi, Bras = biortho.state_matrices(states, duals.scheme)
    return Phi, Bras


def build_K(states: Sequence, duals: DualBasis) -> np.ndarray:
    Phi, _ = _checked(states, duals)
    return (Phi * _energies(states)) @ duals.bras


def build_L(states: Sequence, duals: DualBasis) -> np.ndarray:
    _, Bras = _checked(states, duals)
    return (duals.kets * _energies(states)) @ Bras


def metric_xi(states: Sequence, duals: Optional[DualBasis] = None) -> tuple[np.ndarray, np.ndarray]:
    """xi = sum right right^dagger and its inverse on the span, sum dualket dual."""
    if duals is None:
        duals = biortho.dual_basis(states, scheme="hermitian")
    Phi, _ = biortho.state_matrices(states, "hermitian")
    xi = Phi @ Phi.conj().T
    xi_inv = duals.kets @ duals.bras
    return 0.5 * (xi + xi.conj().T), 0.5 * (xi_inv + xi_inv.conj().T)


def metrics_mu_nu(states: Sequence, duals: DualBasis) -> dict[str, np.ndarray]:
    """mu = sum dual^dagger dual and nu = sum bra^dagger bra, with span inverses."""
    Phi, Bras = biortho.state_matrices(states, duals.scheme)
    D, Dk = duals.bras, duals.kets

    def herm(M):
        return 0.5 * (M + M.conj().T)

    return {
        "mu": herm(D.conj().T @ D),
        "nu": herm(Bras.conj().T @ Bras),
        "mu_inv": herm(Phi @ Phi.conj().T),
        "nu_inv": herm(Dk @ Dk.conj().T),
    }


@dataclass(frozen=True)
class LinearizedPair:
    K: np.ndarray
    L: np.ndarray
    scheme: str
    Pi: np.ndarray = field(repr=False)
    xi: Optional[np.ndarray] = field(default=None, repr=False)
    xi_inv: Optional[np.ndarray] = field(default=None, repr=False)
    mu: Optional[np.ndarray] = field(default=None, repr=False)
    nu: Optional[np.ndarray] = field(default=None, repr=False)
    mu_inv: Optional[np.ndarray] = field(default=None, repr=False)
    nu_inv: Optional[np.ndarray] = field(default=None, repr=False)
    residuals: dict = field(default_factory=dict)

    def matrices(self) -> dict[str, np.ndarray]:
        names = ("K", "L", "xi", "xi_inv", "mu", "nu", "mu_inv", "nu_inv")
        return {k: getattr(self, k) for k in names if getattr(self, k) is not None}


def intertwining_residuals(pair: LinearizedPair) -> dict[str, float]:
    K, L, Pi = pair.K, pair.L, pair.Pi
    out: dict[str, float] = {}
    if pair.xi is not None:
        xi, xi_inv = pair.xi, pair.xi_inv
        out["r1"] = _maxabs(xi @ L - K @ xi)
        out["r2"] = _maxabs(L @ xi_inv - xi_inv @ K)
        out["xi_xi_inv_minus_Pi"] = _maxabs(xi @ xi_inv - Pi)
        out["K_minus_L_dagger"] = _maxabs(K - L.conj().T)
    if pair.mu is not None:
        mu, nu, mu_inv, nu_inv = pair.mu, pair.nu, pair.mu_inv, pair.nu_inv
        out["r3"] = _maxabs(K.conj().T @ mu - mu @ K)
        out["r4"] = _maxabs(nu @ L - L.conj().T @ nu)
        out["r3_inv"] = _maxabs(K @ mu_inv - mu_inv @ K.conj().T)
        out["r4_inv"] = _maxabs(L @ nu_inv - nu_inv @ L.conj().T)
        out["mu_inv_mu_minus_Pi"] = _maxabs(mu_inv @ mu - Pi)
        out["nu_inv_nu_minus_Pi"] = _maxabs(nu_inv @ nu - Pi)
    return out


def action_residuals(states: Sequence, pair: LinearizedPair) -> dict[str, float]:
    """max_a |K right_a - E_a right_a| / (1 + |E_a|) and the same for bra_a L."""
    Phi, Bras = biortho.state_matrices(states, pair.scheme)
    E = _energies(states)
    scale = 1.0 + np.abs(E)
    right = np.abs(pair.K @ Phi - Phi * E).max(axis=0) / scale
    left = np.abs(Bras @ pair.L - E[:, None] * Bras).max(axis=1) / scale
    return {"K_right_action": float(right.max()), "L_left_action": float(left.max())}


def linearize(states: Sequence, duals: Optional[DualBasis] = None, scheme: str = "hermitian") -> LinearizedPair:
    """K, L, the scheme's metrics, and every residual, in one pass."""
    if duals is None:
        duals = biortho.dual_basis(states, scheme=scheme)
    K = build_K(states, duals)
    L = build_L(states, duals)
    Pi = biortho.completeness_projector(states, duals)
    extra: dict = {}
    if duals.scheme == "hermitian":
        extra["xi"], extra["xi_inv"] = metric_xi(states, duals)
    else:
        extra.update(metrics_mu_nu(states, duals))
    pair = LinearizedPair(K=K, L=L, scheme=duals.scheme, Pi=Pi, **extra)
    res = intertwining_residuals(pair)
    res.update(action_residuals(states, pair))
    # positivity of xi on the span: the nonzero spectrum of Phi Phi^dagger is that of Phi^dagger Phi
    Phi, _ = biortho.state_matrices(states, "hermitian")
    gram_min = float(np.linalg.eigvalsh(Phi.conj().T @ Phi).min())
    res["metric_min_eig_on_span"] = gram_min
    res["metric_positive"] = bool(gram_min >= POSITIVITY_TOL)
    if Phi.shape[0] == Phi.shape[1]:
        brute = Phi @ np.diag(_energies(states)) @ np.linalg.inv(Phi)
        res["K_brute_force"] = _maxabs(K - brute)
    res.update(biortho.projector_defects(states, duals))
    res["biorthonormality"] = biortho.biorthonormality_residual(states, duals)
    return LinearizedPair(K=K, L=L, scheme=duals.scheme, Pi=Pi, residuals=res, **extra)


@dataclass(frozen=True)
class NonHermitianDecomposition:
    states: tuple
    eta: np.ndarray
    eta_inv: np.ndarray
    residuals: dict

    def __iter__(self):
        return iter((self.states, self.eta, self.eta_inv, self.residuals))


def spectral_decomposition_nonhermitian(H0) -> NonHermitianDecomposition:
    """Bi-orthonormal eigen-sets of a diagonalizable H0 with real spectrum.

    Rights are unit vectors, lefts are scaled so left_n . right_n = 1.
    Unpacks as ``(states, eta, eta_inv, residuals)``.
    """
    H0 = np.asarray(H0, dtype=complex)
    # the general eig path even for Hermitian input, so lefts come from H0 itself
    model = replace(models.make_constant(H0, label="H0"), hermitian_each_z=False)
    dec = nlevp.decompose(model, 0.0)
    worst = float(np.max(np.abs(dec.values.imag)))
    if worst > REAL_SPECTRUM_TOL:
        raise UnsupportedSpectrumError(f"H0 has complex eigenvalues (max |Im E| = {worst:.3e})")
    E = dec.values.real
    states = tuple(
        nlevp.make_bound_state(model, (n, 1), E[n], dec.rights[:, n], dec.lefts[n]) for n in range(len(E))
    )
    Phi, Lm = biortho.state_matrices(states, "nonhermitian")
    eye = np.eye(H0.shape[0])
    eta = Lm.conj().T @ Lm
    eta = 0.5 * (eta + eta.conj().T)
    eta_inv = Phi @ Phi.conj().T
    eta_inv = 0.5 * (eta_inv + eta_inv.conj().T)
    eig_eta = np.linalg.eigvalsh(eta)
    residuals = {
        "reconstruction": _maxabs((Phi * E) @ Lm - H0),
        "completeness": _maxabs(Phi @ Lm - eye),
        "biorthonormality": _maxabs(Lm @ Phi - np.eye(len(E))),
        "eta_intertwining": _maxabs(H0.conj().T @ eta - eta @ H0),
        "eta_inv_intertwining": _maxabs(H0 @ eta_inv - eta_inv @ H0.conj().T),
        "eta_eta_inv_minus_I": _maxabs(eta @ eta_inv - eye),
        "eta_min_eig": float(eig_eta.min()),
        "eta_positive_definite": bool(eig_eta.min() > 0),
    }
    return NonHermitianDecomposition(states, eta, eta_inv, residuals)
