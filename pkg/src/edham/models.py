"""Energy-dependent Hamiltonians H(z) and the concrete model families.

An :class:`EDHamiltonian` is an immutable wrapper around a deterministic map
``z -> H(z)`` together with the set of real energies on which the map is
defined.  Finite-difference models additionally expose their tridiagonal
bands so that the eigen-solvers can skip the dense path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, EvaluationError, PoleError

HERMITIAN_TOL = 1e-12
# open interval ends are sampled this far (relative) inside the interval
OPEN_EDGE = 1e-12


@dataclass(frozen=True)
class Interval:
    """Real interval with independently open or closed ends.

    The default is the half-open window ``(lo, hi]`` used by step models.
    """

    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = True

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"empty interval ({self.lo}, {self.hi})")

    def contains(self, z: float) -> bool:
        above = z >= self.lo if self.lo_closed else z > self.lo
        below = z <= self.hi if self.hi_closed else z < self.hi
        return bool(above and below and math.isfinite(z))

    def inner_bounds(self, lo: float, hi: float) -> Optional[tuple[float, float]]:
        """Closed sub-interval of ``[lo, hi]`` that lies inside this interval."""
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a == self.lo and not self.lo_closed:
            a += OPEN_EDGE * max(1.0, abs(a))
        if b == self.hi and not self.hi_closed:
            b -= OPEN_EDGE * max(1.0, abs(b))
        if not a <= b:
            return None
        return a, b


REAL_LINE = Interval(-math.inf, math.inf, False, False)


@dataclass(frozen=True)
class Segment:
    """A closed sampling interval; ``*_pole`` is the adjacent pole, if any."""

    lo: float
    hi: float
    left_pole: Optional[float] = None
    right_pole: Optional[float] = None


@dataclass(frozen=True)
class Domain:
    intervals: tuple[Interval, ...] = (REAL_LINE,)
    poles: tuple[float, ...] = ()
    pole_tol: float = 0.0
    violation: type = DomainError

    def check(self, z: float) -> None:
        if not any(iv.contains(z) for iv in self.intervals):
            raise self.violation(f"z={z!r} is outside the model domain")
        for p in self.poles:
            if abs(z - p) < self.pole_tol:
                raise PoleError(f"z={z!r} is within {self.pole_tol:g} of the pole {p!r}")

    def contains(self, z: float) -> bool:
        try:
            self.check(z)
        except DomainError:
            return False
        return True

    def segments(self, lo: float, hi: float) -> list[Segment]:
        """Split ``[lo, hi]`` into pole-free closed pieces inside the domain."""
        margin = 1.01 * self.pole_tol
        out = []
        for iv in sorted(self.intervals, key=lambda iv: iv.lo):
            bounds = iv.inner_bounds(lo, hi)
            if bounds is None:
                continue
            a, b = bounds
            left_pole = None
            for p in sorted(self.poles):
                if p + margin <= a or p - margin > b:
                    continue
                if p - margin > a:
                    out.append(Segment(a, p - margin, left_pole, p))
                a, left_pole = p + margin, p
            if a <= b:
                out.append(Segment(a, b, left_pole, None))
        return out


@dataclass(frozen=True)
class EDHamiltonian:
    """Matrix-valued function ``z -> H(z)`` of fixed dimension.

    ``evaluator`` must be pure.  ``tridiagonal``, when given, returns the real
    ``(diagonal, off_diagonal)`` bands of the same (real symmetric) matrix.
    """

    dim: int
    domain: Domain
    hermitian_each_z: bool
    evaluator: Callable[[float], np.ndarray] = field(repr=False)
    label: str = ""
    tridiagonal: Optional[Callable[[float], tuple[np.ndarray, np.ndarray]]] = field(
        default=None, repr=False
    )

    def __call__(self, z: float) -> np.ndarray:
        return evaluate(self, z)


def evaluate(H: EDHamiltonian, z: float) -> np.ndarray:
    """Dense complex matrix H(z); raises :class:`DomainError` outside the domain."""
    z = float(z)
    H.domain.check(z)
    M = np.asarray(H.evaluator(z), dtype=complex)
    if M.shape != (H.dim, H.dim):
        raise DimensionError(f"evaluator returned shape {M.shape}, expected {(H.dim, H.dim)}")
    return M


eval = evaluate  # noqa: A001  (models.eval(H, z) reads naturally)


def bands(H: EDHamiltonian, z: float) -> tuple[np.ndarray, np.ndarray]:
    z = float(z)
    H.domain.check(z)
    return H.tridiagonal(z)


def apply(H: EDHamiltonian, z: float, v: np.ndarray) -> np.ndarray:
    """``H(z) @ v`` without densifying tridiagonal models."""
    if H.tridiagonal is None:
        return evaluate(H, z) @ v
    d, e = bands(H, z)
    out = d * v
    out[:-1] += e * v[1:]
    out[1:] += e * v[:-1]
    return out


def apply_left(H: EDHamiltonian, z: float, w: np.ndarray) -> np.ndarray:
    """Row vector ``w @ H(z)``."""
    if H.tridiagonal is None:
        return w @ evaluate(H, z)
    return apply(H, z, w)  # real symmetric


def norm_estimate(H: EDHamiltonian, z: float) -> float:
    """Cheap upper bound on ||H(z)||_2 (max absolute row sum)."""
    if H.tridiagonal is None:
        return float(np.abs(evaluate(H, z)).sum(axis=1).max())
    d, e = bands(H, z)
    row = np.abs(d).copy()
    row[:-1] += np.abs(e)
    row[1:] += np.abs(e)
    return float(row.max())


def is_hermitian(M: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol)


def _square(M, what="matrix") -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DimensionError(f"{what} must be a non-empty square matrix, got shape {M.shape}")
    return M


def _tridiagonal_dense(d: np.ndarray, e: np.ndarray) -> np.ndarray:
    M = np.diag(d.astype(complex))
    idx = np.arange(len(e))
    M[idx, idx + 1] = e
    M[idx + 1, idx] = e
    return M


# --------------------------------------------------------------------------
# constant and step families


def make_constant(H0, label: str = "constant") -> EDHamiltonian:
    H0 = _square(H0, "H0")
    H0.setflags(write=False)
    return EDHamiltonian(
        dim=H0.shape[0],
        domain=Domain(),
        hermitian_each_z=is_hermitian(H0),
        evaluator=lambda z: H0.copy(),
        label=label,
    )


@dataclass(frozen=True)
class StepSegment:
    """Matrix active on the half-open window ``(lo, hi]``."""

    lo: float
    hi: float
    matrix: np.ndarray

    @property
    def window(self) -> Interval:
        return Interval(self.lo, self.hi, lo_closed=False, hi_closed=not math.isinf(self.hi))


def make_step(segments: Sequence[StepSegment], label: str = "step") -> EDHamiltonian:
    if not segments:
        raise ConfigError("a step model needs at least one segment")
    segs = sorted(segments, key=lambda s: s.lo)
    mats = [_square(s.matrix, "segment matrix") for s in segs]
    dim = mats[0].shape[0]
    if any(m.shape[0] != dim for m in mats):
        raise DimensionError("all step segments must share one dimension")
    windows = [s.window for s in segs]
    for left, right in zip(windows, windows[1:]):
        if right.lo < left.hi:
            raise ConfigError(f"overlapping step windows {left} and {right}")
    for m in mats:
        m.setflags(write=False)

    def evaluator(z):
        for w, m in zip(windows, mats):
            if w.contains(z):
                return m.copy()
        raise DomainError(f"z={z!r} lies in no step window")

    return EDHamiltonian(
        dim=dim,
        domain=Domain(tuple(windows)),
        hermitian_each_z=all(is_hermitian(m) for m in mats),
        evaluator=evaluator,
        label=label,
    )


# --------------------------------------------------------------------------
# harmonic oscillator with an energy-dependent mass


@dataclass(frozen=True)
class LinearMass:
    """m(z) = m0 (1 + lam z)."""

    m0: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not self.m0 > 0:
            raise ConfigError("m0 must be positive")

    def __call__(self, z: float) -> float:
        return self.m0 * (1.0 + self.lam * z)

    def positive_interval(self) -> Interval:
        if self.lam > 0:
            return Interval(-1.0 / self.lam, math.inf, False, False)
        if self.lam < 0:
            return Interval(-math.inf, -1.0 / self.lam, False, False)
        return REAL_LINE


@dataclass(frozen=True)
class Grid1D:
    x_min: float = -8.0
    x_max: float = 8.0
    points: int = 801

    def __post_init__(self):
        if self.points < 3:
            raise ConfigError("a grid needs at least 3 points")
        if not self.x_min < self.x_max:
            raise ConfigError("x_min must be smaller than x_max")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.points - 1)

    def interior(self) -> np.ndarray:
        """Unknown nodes; both end nodes carry the Dirichlet condition."""
        return np.linspace(self.x_min, self.x_max, self.points)[1:-1]


@dataclass(frozen=True)
class OscillatorParams:
    hbar: float = 1.0
    g: float = 0.5
    mass_law: Callable[[float], float] = field(default_factory=LinearMass)
    grid: Grid1D = field(default_factory=Grid1D)

    def __post_init__(self):
        if not self.hbar > 0:
            raise ConfigError("hbar must be positive")
        if not self.g > 0:
            raise ConfigError("g must be positive")


def make_ed_mass_oscillator(p: OscillatorParams, label: str = "ed_mass_oscillator") -> EDHamiltonian:
    x = p.grid.interior()
    h2 = p.grid.spacing**2
    potential = p.g * x**2
    n = len(x)

    def tri(z):
        m = p.mass_law(z)
        if not m > 0:
            raise EvaluationError(f"mass m({z!r}) = {m!r} is not positive")
        a = p.hbar**2 / (2.0 * m)
        return 2.0 * a / h2 + potential, np.full(n - 1, -a / h2)

    law = p.mass_law
    if isinstance(law, LinearMass):
        domain = Domain((law.positive_interval(),), violation=EvaluationError)
    else:
        domain = Domain(violation=EvaluationError)
    return EDHamiltonian(
        dim=n,
        domain=domain,
        hermitian_each_z=True,
        evaluator=lambda z: _tridiagonal_dense(*tri(z)),
        label=label,
        tridiagonal=tri,
    )


# --------------------------------------------------------------------------
# sextic quasi-exactly solvable oscillator


@dataclass(frozen=True)
class RadialGrid:
    r_max: float = 6.0
    points: int = 1500

    def __post_init__(self):
        if not self.r_max > 0:
            raise ConfigError("r_max must be positive")
        if self.points < 3:
            raise ConfigError("a grid needs at least 3 points")

    @property
    def spacing(self) -> float:
        return self.r_max / (self.points + 1)

    def nodes(self) -> np.ndarray:
        """Interior nodes; u(0) = u(r_max) = 0 at the excluded end nodes."""
        return self.spacing * np.arange(1, self.points + 1)


@dataclass(frozen=True)
class SexticParams:
    N: int = 0
    b: Fraction | float | str = 1
    radial_grid: RadialGrid = field(default_factory=RadialGrid)
    # None: (min QES energy - 1, max QES energy + 1]
    sector_window: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise ConfigError("N must be a non-negative integer")


def sextic_potential_coefficients(N: int, b) -> tuple[Fraction, Fraction, Fraction]:
    """(A_N, B, C) of A_N r^2 + B r^4 + C r^6 with B = 2b and C = 1."""
    from .oracles import qes_sextic_construct

    sol = qes_sextic_construct(N, b)
    return sol.A_N, 2 * sol.b, Fraction(1)


def make_sextic_qes(p: SexticParams, label: str = "") -> EDHamiltonian:
    from .oracles import qes_sextic_construct

    sol = qes_sextic_construct(p.N, p.b)
    A, B = float(sol.A_N), float(2 * sol.b)
    r = p.radial_grid.nodes()
    h2 = p.radial_grid.spacing**2
    d = 2.0 / h2 + A * r**2 + B * r**4 + r**6
    e = np.full(len(r) - 1, -1.0 / h2)
    d.setflags(write=False)
    e.setflags(write=False)
    if p.sector_window is None:
        lo, hi = min(sol.energies) - 1.0, max(sol.energies) + 1.0
    else:
        lo, hi = p.sector_window
    window = Interval(float(lo), float(hi), lo_closed=False, hi_closed=True)
    return EDHamiltonian(
        dim=len(r),
        domain=Domain((window,)),
        hermitian_each_z=True,
        evaluator=lambda z: _tridiagonal_dense(d, e),
        label=label or f"sextic_qes(N={p.N}, b={sol.b})",
        tridiagonal=lambda z: (d.copy(), e.copy()),
    )
