import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edham import biortho, feshbach, linearize, models, nlevp, sampling
from edham.errors import InputError, NonDiagonalizableError, UnsupportedSpectrumError

S2 = 1 / math.sqrt(2)


def states_from(rights, energies):
    H = models.make_constant(np.eye(len(rights[0])))
    return [
        nlevp.make_bound_state(H, (i, 1), e, np.asarray(r, float), np.conj(np.asarray(r, float)))
        for i, (r, e) in enumerate(zip(rights, energies))
    ]


def test_orthonormal_k_and_l():
    st_ = states_from([[1, 0], [0, 1]], [1.0, 3.0])
    d = biortho.dual_basis(st_)
    K, L = linearize.build_K(st_, d), linearize.build_L(st_, d)
    assert np.allclose(K, np.diag([1, 3])) and np.allclose(L, K)


def test_skewed_k_and_l():
    st_ = states_from([[1, 0], [S2, S2]], [1.0, 2.0])
    d = biortho.dual_basis(st_)
    K, L = linearize.build_K(st_, d), linearize.build_L(st_, d)
    assert np.allclose(K, [[1, 1], [0, 2]], atol=1e-14)
    assert np.allclose(L, [[1, 0], [1, 2]], atol=1e-14)


def test_single_state_k_and_l():
    st_ = states_from([[1, 0]], [5.0])
    d = biortho.dual_basis(st_)
    assert np.allclose(linearize.build_K(st_, d), np.diag([5, 0]))
    assert np.allclose(linearize.build_L(st_, d), np.diag([5, 0]))


def test_build_rejects_inconsistent_duals():
    st_ = states_from([[1, 0], [S2, S2]], [1.0, 2.0])
    d = biortho.dual_basis(st_)
    bad = biortho.DualBasis(d.bras + 1e-3, d.kets, d.states, d.overlap)
    with pytest.raises(InputError):
        linearize.build_K(st_, bad)
    with pytest.raises(InputError):
        linearize.build_L(st_[:1], d)


def test_metric_xi_examples():
    xi, xi_inv = linearize.metric_xi(states_from([[1, 0], [0, 1]], [1.0, 3.0]))
    assert np.allclose(xi, np.eye(2)) and np.allclose(xi_inv, np.eye(2))
    xi, _ = linearize.metric_xi(states_from([[1, 0], [S2, S2]], [1.0, 2.0]))
    assert np.allclose(xi, [[1.5, 0.5], [0.5, 0.5]])
    st_ = states_from([[1, 0]], [5.0])
    xi, xi_inv = linearize.metric_xi(st_)
    assert np.allclose(xi, np.diag([1, 0])) and np.allclose(xi_inv, np.diag([1, 0]))
    Pi = biortho.completeness_projector(st_, biortho.dual_basis(st_))
    assert np.allclose(xi @ xi_inv, Pi)


def test_intertwining_examples():
    pair = linearize.linearize(states_from([[1, 0], [0, 1]], [1.0, 3.0]))
    assert all(pair.residuals[k] <= 1e-12 for k in ("r1", "r2"))
    pair = linearize.linearize(states_from([[1, 0], [S2, S2]], [1.0, 2.0]))
    assert pair.residuals["r1"] <= 1e-10 and pair.residuals["r2"] <= 1e-10
    L = pair.L.copy()
    L[0, 1] += 1e-4
    perturbed = linearize.LinearizedPair(pair.K, L, pair.scheme, pair.Pi, xi=pair.xi, xi_inv=pair.xi_inv)
    assert linearize.intertwining_residuals(perturbed)["r1"] >= 1e-5


def test_nonhermitian_worked_example():
    states, eta, eta_inv, res = linearize.spectral_decomposition_nonhermitian([[1, 1], [0, 2]])
    assert np.allclose(eta, [[1, -1], [-1, 3]], atol=1e-12)
    H0 = np.array([[1, 1], [0, 2]])
    assert np.allclose(eta @ H0, H0.T @ eta)
    assert res["eta_positive_definite"]
    assert res["reconstruction"] <= 1e-10 and res["completeness"] <= 1e-10


def test_nonhermitian_hermitian_input(rng):
    H0 = sampling.random_hermitian(4, rng)
    _, eta, _, res = linearize.spectral_decomposition_nonhermitian(H0)
    assert np.allclose(eta, np.eye(4), atol=1e-10)
    assert res["eta_intertwining"] <= 1e-10


def test_nonhermitian_errors():
    with pytest.raises(UnsupportedSpectrumError):
        linearize.spectral_decomposition_nonhermitian([[0, 1], [-1, 0]])
    with pytest.raises(NonDiagonalizableError):
        linearize.spectral_decomposition_nonhermitian([[2, 1], [0, 2]])


def feshbach_states(seed, D=6, k=3):
    rng = np.random.default_rng(seed)
    m = feshbach.from_basis(sampling.random_hermitian(D, rng), sampling.random_isometry(D, k, rng))
    states = nlevp.solve_all(feshbach.feshbach_model_as_ed(m), (-3.0, 3.0), 48)
    return [s for s in states if s.alpha[1] == 1]


@given(st.integers(0, 2**32 - 1))
def test_energy_dependent_pipeline_properties(seed):
    st_ = feshbach_states(seed)
    R = biortho.overlap_matrix(st_)
    if not st_ or R.condition > 1e8:
        return
    pair = linearize.linearize(st_)
    r = pair.residuals
    assert r["K_right_action"] <= 1e-9 and r["L_left_action"] <= 1e-9
    assert r["K_minus_L_dagger"] <= 1e-10
    assert r["r1"] <= 1e-10 and r["r2"] <= 1e-10
    assert r["metric_positive"]
    assert np.max(np.abs(pair.xi - pair.xi.conj().T)) <= 1e-12
    if len(st_) == st_[0].dim:
        assert r["K_brute_force"] <= 1e-10
    # order independence of the spectral sums
    rev = linearize.linearize(st_[::-1])
    assert np.max(np.abs(rev.K - pair.K)) <= 1e-12 and np.max(np.abs(rev.L - pair.L)) <= 1e-12


@given(st.integers(0, 2**32 - 1))
def test_nonhermitian_random_spectra(seed):
    H0, E, _ = sampling.random_real_spectrum(5, seed)
    states, eta, eta_inv, res = linearize.spectral_decomposition_nonhermitian(H0)
    assert res["reconstruction"] <= 1e-9 and res["eta_intertwining"] <= 1e-9
    assert res["eta_positive_definite"]
    pair = linearize.linearize(list(states), scheme="nonhermitian")
    for k in ("r3", "r4", "r3_inv", "r4_inv"):
        assert pair.residuals[k] <= 1e-9
    assert np.max(np.abs(pair.mu - pair.mu.conj().T)) <= 1e-12
    assert np.max(np.abs(pair.K - H0)) <= 1e-9 * max(1.0, np.abs(H0).max())
