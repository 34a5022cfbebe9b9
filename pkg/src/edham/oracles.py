"""Independent analytic ground truths.

* self-consistent energies of the harmonic oscillator with mass m0 (1 + lam z),
* the sextic quasi-exactly solvable (QES) sector construction, verified in exact
  rational arithmetic,
* Gaussian moments  int_0^inf exp(-x^2) x^(c+2n) dx  through the Gamma function.

Nothing in here calls the numerical solvers; these are the values the solvers
are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any

import numpy as np
import sympy as sp
from scipy import integrate

from .errors import ConfigError, DivergenceError
from .models import LinearMass, OscillatorParams

_r, _E, _A = sp.symbols("r E A")

SUPPORTED_QES_DEGREES = (0, 1, 2, 3)


# --------------------------------------------------------------------------
# harmonic oscillator with energy-dependent mass


def _bisect(f, a: float, b: float) -> float:
    fa = f(a)
    for _ in range(200):
        m = 0.5 * (a + b)
        if m in (a, b):
            break
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def ho_analytic_roots(n: int, params: OscillatorParams, samples: int = 20001) -> list[float]:
    """Self-consistent energies of branch ``n`` for m(z) = m0 (1 + lam z).

    The branch energy is (n + 1/2) hbar sqrt(2 g / m(z)) > 0, so the fixed
    points are the positive roots of  m0 z^2 (1 + lam z) = 2 g hbar^2 (n + 1/2)^2
    with m(z) > 0.  Found by dense bracketing of the cubic plus bisection.
    """
    law = params.mass_law
    if not isinstance(law, LinearMass):
        raise ConfigError("ho_analytic_roots needs the parametric mass law m0 (1 + lam z)")
    m0, lam = law.m0, law.lam
    c = 2.0 * params.g * params.hbar**2 * (n + 0.5) ** 2
    if lam == 0:
        return [(n + 0.5) * params.hbar * math.sqrt(2.0 * params.g / m0)]

    def cubic(z):
        return m0 * z * z * (1.0 + lam * z) - c

    upper = math.sqrt(c / m0) if lam > 0 else -1.0 / lam
    zs = np.linspace(0.0, upper, samples)[1:]
    vals = np.array([cubic(z) for z in zs])
    roots = []
    for i in range(len(zs) - 1):
        if vals[i] == 0.0:
            roots.append(float(zs[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(_bisect(cubic, float(zs[i]), float(zs[i + 1])))
    if vals[-1] == 0.0:
        roots.append(float(zs[-1]))
    return [z for z in roots if law(z) > 0]


# --------------------------------------------------------------------------
# sextic QES construction


def _as_fraction(b) -> Fraction:
    if isinstance(b, Fraction):
        return b
    if isinstance(b, str):
        return Fraction(b)
    if isinstance(b, (int, float)) and math.isfinite(b):
        return Fraction(b)
    raise ConfigError(f"b must be a finite rational number, got {b!r}")


def _weight_exponent(b: sp.Rational) -> sp.Expr:
    return -_r**4 / 4 - b * _r**2 / 2


def _reduced_action(v: sp.Expr, A: sp.Expr, b: sp.Rational, E: sp.Expr) -> sp.Expr:
    """q(r) with  [-d^2/dr^2 + A r^2 + 2b r^4 + r^6 - E] (v e^W) = q e^W."""
    W = _weight_exponent(b)
    u = v * sp.exp(W)
    expr = -sp.diff(u, _r, 2) + (A * _r**2 + 2 * b * _r**4 + _r**6 - E) * u
    return sp.expand(sp.powsimp(sp.expand(expr * sp.exp(-W))))


@dataclass(frozen=True)
class QESSolution:
    """Exact QES sector N of  -u'' + (A_N r^2 + 2b r^4 + r^6) u = E u.

    ``u(r) = r p(r^2) exp(-r^4/4 - b r^2/2)`` with ``p = sum_k c_k r^(2k)``.
    ``energies`` are sorted ascending; ``poly_coeffs[j]`` holds c_0..c_N for
    ``energies[j]`` with c_0 = 1.  The exact fields keep everything as
    rational polynomials in the energy symbol.
    """

    N: int
    b: Fraction
    A_N: Fraction
    energies: tuple[float, ...]
    poly_coeffs: tuple[tuple[float, ...], ...]
    matrix: Any = field(repr=False, compare=False)
    charpoly: Any = field(repr=False, compare=False)
    coeff_polys: tuple = field(repr=False, compare=False)
    exact_energies: tuple = field(repr=False, compare=False)

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "b": str(self.b),
            "A_N": str(self.A_N),
            "B": str(2 * self.b),
            "C": "1",
            "charpoly": str(self.charpoly.as_expr()),
            "energies": list(self.energies),
            "poly_coeffs": [list(c) for c in self.poly_coeffs],
        }


def qes_sextic_construct(N: int, b=1) -> QESSolution:
    if N not in SUPPORTED_QES_DEGREES:
        raise ConfigError(f"QES degree N={N!r} not supported (use one of {SUPPORTED_QES_DEGREES})")
    return _construct(int(N), _as_fraction(b))


@lru_cache(maxsize=64)
def _construct(N: int, bq: Fraction) -> QESSolution:
    bs = sp.Rational(bq.numerator, bq.denominator)

    # action of the operator on each odd monomial r^(2k+1), A still symbolic
    actions = [sp.Poly(_reduced_action(_r ** (2 * k + 1), _A, bs, 0), _r) for k in range(N + 1)]
    top = actions[N].coeff_monomial(_r ** (2 * N + 3))
    (A_N,) = sp.solve(sp.Eq(top, 0), _A)
    A_N = sp.Rational(A_N)

    M = sp.zeros(N + 1, N + 1)
    for k, act in enumerate(actions):
        poly = sp.Poly(act.as_expr().subs(_A, A_N), _r)
        for (power,), coeff in poly.terms():
            if coeff == 0:
                continue
            if power % 2 != 1 or power > 2 * N + 1:
                raise AssertionError(f"unexpected r^{power} term in the power matching")
            M[(power - 1) // 2, k] = coeff
    chi = M.charpoly(_E)

    # null vector of (M - E) with c_0 = 1 as polynomials in E (M is tridiagonal)
    c = [sp.Integer(1)]
    for k in range(N):
        acc = _E * c[k] - sum(M[k, j] * c[j] for j in range(k + 1))
        c.append(sp.expand(acc / M[k, k + 1]))
    coeff_polys = tuple(sp.Poly(ck, _E, domain="QQ") for ck in c)

    roots = tuple(sp.Poly(chi.as_expr(), _E).real_roots())
    if len(roots) != N + 1:
        raise AssertionError(f"expected {N + 1} real QES energies, found {len(roots)}")
    energies = tuple(float(sp.N(x, 30)) for x in roots)
    coeffs = tuple(tuple(float(sp.N(p.as_expr().subs(_E, x), 30)) for p in coeff_polys) for x in roots)
    return QESSolution(
        N=N,
        b=bq,
        A_N=Fraction(int(A_N.p), int(A_N.q)),
        energies=energies,
        poly_coeffs=coeffs,
        matrix=M,
        charpoly=chi,
        coeff_polys=coeff_polys,
        exact_energies=roots,
    )


@dataclass(frozen=True)
class QESResidual:
    """Residual polynomial q(r), coefficients reduced in Q[E]/(minpoly(E_j))."""

    poly: Any
    minpoly: Any
    energy: Any

    @property
    def is_zero(self) -> bool:
        return self.poly.is_zero

    def coefficients(self) -> dict[int, Any]:
        return {int(m[0]): c for m, c in self.poly.terms() if c != 0}

    def numeric(self) -> dict[int, float]:
        return {k: float(sp.N(c.subs(_E, self.energy), 30)) for k, c in self.coefficients().items()}


def qes_residual(sol: QESSolution, j: int, energy_shift=0, A_shift=0) -> QESResidual:
    """Exact residual of QES state ``j`` (0-based index into ``sol.energies``).

    The state is re-differentiated from u = r p(r^2) exp(W) directly, not from
    the recurrence used in the construction.  Optional rational shifts of E
    and A produce the (nonzero) residual of a perturbed problem.
    """
    root = sol.exact_energies[j]
    minpoly = sp.Poly(sp.minimal_polynomial(root, _E), _E, domain="QQ")
    bs = sp.Rational(sol.b.numerator, sol.b.denominator)
    A = sp.Rational(sol.A_N.numerator, sol.A_N.denominator) + sp.nsimplify(A_shift, rational=True)
    dE = sp.nsimplify(energy_shift, rational=True)
    v = _r * sum(p.as_expr() * _r ** (2 * k) for k, p in enumerate(sol.coeff_polys))
    q = sp.Poly(_reduced_action(v, A, bs, _E + dE), _r)
    reduced = {}
    for (power,), coeff in q.terms():
        rem = sp.Poly(coeff, _E, domain="QQ").rem(minpoly)
        if not rem.is_zero:
            reduced[(power,)] = rem.as_expr()
    poly = sp.Poly.from_dict(reduced, _r, domain="EX") if reduced else sp.Poly(0, _r)
    return QESResidual(poly=poly, minpoly=minpoly, energy=root)


# --------------------------------------------------------------------------
# Gaussian moments


def gamma_moment(n: int, c: float) -> float:
    """int_0^inf exp(-x^2) x^(c + 2n) dx = Gamma((c + 2n + 1)/2) / 2."""
    if not c > -1:
        raise DivergenceError(f"moment diverges at the origin for c={c!r} <= -1")
    return math.gamma((c + 2 * n + 1) / 2.0) / 2.0


def gamma_moment_quadrature(n: int, c: float) -> float:
    """Same integral by adaptive QUADPACK quadrature.

    The x^p factor on [0, 1] goes through the algebraic-weight rule so that
    fractional powers do not cost accuracy at the origin.
    """
    if not c > -1:
        raise DivergenceError(f"moment diverges at the origin for c={c!r} <= -1")
    p = c + 2 * n
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    head, _ = integrate.quad(lambda x: math.exp(-x * x), 0.0, 1.0, weight="alg", wvar=(p, 0.0), **opts)
    tail, _ = integrate.quad(lambda x: math.exp(-x * x) * x**p, 1.0, math.inf, **opts)
    return head + tail


def hermite_norm_from_moments(n: int) -> float:
    """int_R H_n(x)^2 exp(-x^2) dx assembled as a finite sum of Gamma moments.

    H_n^2 is an even polynomial sum_k a_k x^(2k), so the integral reduces to
    2 sum_k a_k gamma_moment(k, 0).  Equals sqrt(pi) 2^n n! exactly.
    """
    coeffs = np.polynomial.hermite.herm2poly([0] * n + [1])
    sq = np.polynomial.polynomial.polymul(coeffs, coeffs)
    return float(sum(2.0 * sq[2 * k] * gamma_moment(k, 0.0) for k in range(len(sq) // 2 + 1) if 2 * k < len(sq)))
