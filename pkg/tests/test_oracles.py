import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from edham import models, oracles
from edham.errors import ConfigError, DivergenceError
from edham.models import Grid1D, LinearMass, OscillatorParams


def params(lam):
    return OscillatorParams(mass_law=LinearMass(1.0, lam))


def test_ho_roots_constant_mass():
    assert oracles.ho_analytic_roots(0, params(0.0)) == [0.5]
    assert oracles.ho_analytic_roots(3, params(0.0)) == [3.5]


def test_ho_roots_linear_mass():
    (z0,) = oracles.ho_analytic_roots(0, params(1.0))
    assert z0 == pytest.approx(0.4196433776, abs=1e-9)
    (z1,) = oracles.ho_analytic_roots(1, params(1.0))
    assert z1**2 * (1 + z1) == pytest.approx(2.25, abs=1e-12)
    assert z1 == pytest.approx(1.0481249034, abs=1e-9)


def test_ho_roots_keep_positive_mass_only():
    # lam < 0: m(z) > 0 only for z < 1/|lam|
    p = params(-0.1)
    for n in range(4):
        for z in oracles.ho_analytic_roots(n, p):
            assert p.mass_law(z) > 0
            assert z**2 * (1 - 0.1 * z) == pytest.approx((n + 0.5) ** 2, rel=1e-10)


def test_ho_roots_need_parametric_law():
    with pytest.raises(ConfigError):
        oracles.ho_analytic_roots(0, OscillatorParams(mass_law=lambda z: 1.0))


@pytest.mark.parametrize("b", [0, 1, Fraction(1, 2), 2])
def test_qes_ground_sector(b):
    sol = oracles.qes_sextic_construct(0, b)
    b = Fraction(b)
    assert sol.A_N == b * b - 5
    assert sol.energies == pytest.approx((float(3 * b),))
    assert sol.poly_coeffs == ((1.0,),)


def test_qes_n1_energies():
    sol = oracles.qes_sextic_construct(1, 1)
    assert sol.A_N == -8
    assert sol.energies == pytest.approx((5 - 2 * math.sqrt(7), 5 + 2 * math.sqrt(7)), abs=1e-12)


def test_qes_n2_energies():
    sol = oracles.qes_sextic_construct(2, 1)
    assert sol.A_N == -12
    assert sol.energies == pytest.approx((-4.528, 6.106, 19.422), abs=2e-3)


@pytest.mark.parametrize("N", [0, 1, 2, 3])
def test_qes_residual_is_exactly_zero(N):
    sol = oracles.qes_sextic_construct(N, 1)
    for j in range(N + 1):
        assert oracles.qes_residual(sol, j).is_zero


def test_qes_residual_energy_perturbation():
    sol = oracles.qes_sextic_construct(0, 1)
    res = oracles.qes_residual(sol, 0, energy_shift=Fraction(1, 1000))
    assert not res.is_zero
    # -dE * r (the polynomial factor of u)
    assert res.coefficients() == {1: sp.Rational(-1, 1000)}


def test_qes_residual_a_perturbation():
    sol = oracles.qes_sextic_construct(0, 1)
    res = oracles.qes_residual(sol, 0, A_shift=Fraction(1, 100))
    assert res.coefficients() == {3: sp.Rational(1, 100)}


def test_qes_unsupported_degree():
    with pytest.raises(ConfigError):
        oracles.qes_sextic_construct(4, 1)


def test_qes_as_dict():
    d = oracles.qes_sextic_construct(1, 1).as_dict()
    assert d["A_N"] == "-8" and d["B"] == "2" and len(d["energies"]) == 2


def test_gamma_moment_examples():
    assert oracles.gamma_moment(0, 0.0) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)
    assert oracles.gamma_moment(0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert oracles.gamma_moment(1, 0.0) == pytest.approx(math.sqrt(math.pi) / 4, rel=1e-15)


def test_gamma_moment_divergence():
    with pytest.raises(DivergenceError):
        oracles.gamma_moment(0, -1.0)
    with pytest.raises(DivergenceError):
        oracles.gamma_moment_quadrature(0, -2.0)


@given(st.integers(0, 10), st.floats(-0.9, 3.0))
def test_gamma_moment_matches_quadrature(n, c):
    g = oracles.gamma_moment(n, c)
    assert abs(oracles.gamma_moment_quadrature(n, c) - g) <= 1e-12 * max(1.0, g)


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_hermite_norms(n):
    exact = math.sqrt(math.pi) * 2**n * math.factorial(n)
    assert oracles.hermite_norm_from_moments(n) == pytest.approx(exact, rel=1e-14)
    H = np.polynomial.hermite.Hermite.basis(n)
    quad, _ = integrate.quad(lambda x: H(x) ** 2 * math.exp(-x * x), -np.inf, np.inf, epsabs=0, epsrel=1e-12)
    assert abs(quad - exact) <= 1e-8 * exact


@pytest.mark.parametrize("n", [0, 1, 2])
def test_grid_states_match_moment_normalized_hermite(n):
    grid = Grid1D(-8, 8, 801)
    H = models.make_ed_mass_oscillator(OscillatorParams(grid=grid))
    w, V = np.linalg.eigh(H(0.0).real)
    x, h = grid.interior(), grid.spacing
    psi = np.polynomial.hermite.Hermite.basis(n)(x) * np.exp(-x * x / 2)
    psi /= math.sqrt(oracles.hermite_norm_from_moments(n))
    overlap = abs(np.sum(V[:, n] * psi) * math.sqrt(h))
    assert overlap == pytest.approx(1.0, abs=1e-4)
