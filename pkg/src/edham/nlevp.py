"""Self-consistent solutions of H(z) psi = z psi.

Eigenvalue branches E^(n)(z) are traced over a z-grid by eigenvector-overlap
matching; the fixed points z = E^(n)(z) are bracketed by sign changes of
E^(n)(z) - z and refined by bisection.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from . import models
from .errors import AmbiguityError, ComplexBranchError, DomainError, NonDiagonalizableError
from .models import EDHamiltonian, Segment

DEFECT_TOL = 1e-10
COMPLEX_TOL = 1e-10
AMBIGUITY_THRESHOLD = 0.7
# steps are halved until overlaps reach this, as long as MAX_REFINE allows;
# below it a match is only accepted, never trusted blindly
REFINE_TARGET = 0.98
MAX_REFINE = 24
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Decomposition:
    """Eigen-decomposition at one z: ``lefts @ rights`` is the identity."""

    z: float
    values: np.ndarray  # (k,)
    rights: np.ndarray  # (dim, k), unit columns
    lefts: np.ndarray  # (k, dim), rows are co-vectors

    def __len__(self):
        return len(self.values)


def _fix_phase(V: np.ndarray) -> np.ndarray:
    """Unit columns whose leading large component is real and positive."""
    V = V / np.linalg.norm(V, axis=0)
    mags = np.abs(V)
    lead = np.argmax(mags >= (1 - 1e-8) * mags.max(axis=0), axis=0)
    ph = V[lead, np.arange(V.shape[1])]
    return V * (np.abs(ph) / ph)


def _sort_order(values: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(values), initial=0.0)))
    return np.lexsort((values.imag, np.round(values.real / scale, 12)))


def decompose(H: EDHamiltonian, z: float, count: Optional[int] = None, phase: bool = True) -> Decomposition:
    """Lowest ``count`` eigenpairs of H(z) by real part (all when None).

    ``phase=False`` skips the phase convention on Hermitian paths; callers
    that only compare |overlaps| use it to save time.
    """
    k = H.dim if count is None else min(count, H.dim)
    if H.hermitian_each_z:
        if H.tridiagonal is not None:
            d, e = models.bands(H, z)
            if k == H.dim:
                w, V = sla.eigh_tridiagonal(d, e)
            else:
                w, V = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
            V = V.astype(complex)
        else:
            M = models.evaluate(H, z)
            if k == H.dim:
                w, V = np.linalg.eigh(M)
            else:
                w, V = sla.eigh(M, subset_by_index=(0, k - 1))
        if phase:
            V = _fix_phase(V)
        return Decomposition(float(z), w.astype(float), V, V.conj().T)

    M = models.evaluate(H, z)
    w, VL, VR = sla.eig(M, left=True, right=True)
    order = _sort_order(w)
    w, VL, VR = w[order], VL[:, order], VR[:, order]
    VR = _fix_phase(VR)
    S = VL.conj().T @ VR
    smin = np.linalg.svd(S, compute_uv=False).min() / max(1.0, np.abs(S).max())
    if not smin >= DEFECT_TOL:
        raise NonDiagonalizableError(
            f"H({z!r}) is not diagonalizable: left/right pairing degenerates ({smin:.3e})"
        )
    lefts = np.linalg.solve(S, VL.conj().T)
    return Decomposition(float(z), w[:k], VR[:, :k], lefts[:k])


def eigen_at(H: EDHamiltonian, z: float) -> list[tuple[complex, np.ndarray, np.ndarray]]:
    """Full decomposition as ``(value, right, left)`` triples, ascending by real part."""
    dec = decompose(H, z)
    return [(dec.values[i], dec.rights[:, i], dec.lefts[i]) for i in range(len(dec))]


# --------------------------------------------------------------------------
# branch tracing


def _greedy_match(prev: np.ndarray, cand: np.ndarray) -> tuple[np.ndarray, float]:
    """Assign each tracked column of ``prev`` to a column of ``cand``.

    Greedy on |prev^H cand|: the largest remaining overlap is fixed first.
    Returns the chosen candidate index per tracked branch and the smallest
    overlap among the chosen pairs.
    """
    O = np.abs(prev.conj().T @ cand)
    nb, m = O.shape
    # distinct row maxima: no row is ever blocked, greedy gives the same answer
    best = O.argmax(axis=1)
    if len(set(best.tolist())) == nb:
        return best, float(O[np.arange(nb), best].min())
    perm = np.full(nb, -1)
    work = O.copy()
    quality = math.inf
    for _ in range(nb):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        perm[i] = j
        quality = min(quality, O[i, j])
        work[i, :] = -1.0
        work[:, j] = -1.0
    return perm, float(quality)


@dataclass(frozen=True)
class BranchTable:
    """Eigenvalue branches of one continuity segment.

    ``values[k, n]``, ``rights[k, :, n]`` and ``lefts[k, n, :]`` belong to
    branch n at ``grid[k]``.  ``match_quality[k]`` is the smallest matched
    overlap between ``grid[k]`` and ``grid[k + 1]``.
    """

    hamiltonian: EDHamiltonian = field(repr=False)
    grid: np.ndarray
    values: np.ndarray
    rights: np.ndarray = field(repr=False)
    lefts: np.ndarray = field(repr=False)
    match_quality: np.ndarray
    n_candidates: Optional[int] = None
    threshold: float = AMBIGUITY_THRESHOLD

    @property
    def n_branches(self) -> int:
        return self.values.shape[1]

    def min_quality(self) -> float:
        return float(self.match_quality.min()) if len(self.match_quality) else 1.0

    def nearest(self, z: float) -> int:
        return int(np.argmin(np.abs(self.grid - z)))


def trace_branches(
    H: EDHamiltonian,
    grid: Sequence[float],
    n_branches: Optional[int] = None,
    threshold: float = AMBIGUITY_THRESHOLD,
    workers: int = 1,
    refine: bool = True,
) -> BranchTable:
    """Follow eigenvalue branches continuously across ``grid``.

    With ``n_branches`` only the lowest branches are tracked (two spare
    eigenpairs are computed for matching).  An ambiguous step is bisected
    until the overlaps clear ``threshold``; with ``refine=False`` or once the
    step reaches rounding level an :class:`AmbiguityError` is raised instead.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("trace_branches needs at least two grid points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    for z in grid:
        H.domain.check(float(z))

    nb = H.dim if n_branches is None else min(n_branches, H.dim)
    count = None if nb == H.dim else min(H.dim, nb + 2)

    def dec(z):
        return decompose(H, float(z), count)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            decs = list(pool.map(dec, grid))
    else:
        decs = [dec(z) for z in grid]

    first = decs[0]
    zs = [first.z]
    vals = [first.values[:nb]]
    rights = [first.rights[:, :nb]]
    lefts = [first.lefts[:nb]]
    quality = []
    for target in decs[1:]:
        pending = [target]
        min_step = (target.z - zs[-1]) / 2**MAX_REFINE
        while pending:
            cand = pending[-1]
            perm, q = _greedy_match(rights[-1], cand.rights)
            zl = zs[-1]
            step = cand.z - zl
            floor = max(min_step, 64 * EPS * max(1.0, abs(zl), abs(cand.z)))
            can_refine = refine and step > floor
            if q >= threshold and (q >= REFINE_TARGET or not can_refine):
                zs.append(cand.z)
                vals.append(cand.values[perm])
                rights.append(cand.rights[:, perm])
                lefts.append(cand.lefts[perm])
                quality.append(q)
                pending.pop()
                continue
            if not can_refine:
                raise AmbiguityError(
                    f"ambiguous branch matching between z={zl!r} and z={cand.z!r} "
                    f"(best overlap {q:.12g} < {threshold}); refine the grid",
                    zl,
                    cand.z,
                    q,
                )
            pending.append(dec(zl + 0.5 * step))

    return BranchTable(
        hamiltonian=H,
        grid=np.array(zs),
        values=np.array(vals),
        rights=np.array(rights),
        lefts=np.array(lefts),
        match_quality=np.array(quality),
        n_candidates=count,
        threshold=threshold,
    )


# --------------------------------------------------------------------------
# fixed points


def accuracy_floor(H: EDHamiltonian, z: float) -> float:
    """Smallest |E(z) - z| resolvable given eigenvalue rounding at H(z)."""
    return 64 * EPS * max(1.0, models.norm_estimate(H, z), abs(z))


@dataclass(frozen=True)
class _Root:
    z: float
    value: complex
    right: np.ndarray
    left: np.ndarray
    residual: float


def _pick(dec: Decomposition, ref: np.ndarray) -> int:
    return int(np.argmax(np.abs(ref.conj() @ dec.rights)))


def _check_real(table: BranchTable, n: int) -> None:
    if not 0 <= n < table.n_branches:
        raise IndexError(f"branch {n} does not exist (table has {table.n_branches})")
    vals = table.values[:, n]
    if np.iscomplexobj(vals) and np.max(np.abs(vals.imag)) > COMPLEX_TOL:
        raise ComplexBranchError(f"branch {n} is complex on the grid", branch=n)


def _branch_roots(table: BranchTable, n: int, tol: float) -> list[_Root]:
    _check_real(table, n)
    H = table.hamiltonian
    zs = table.grid
    f = table.values[:, n].real - zs
    roots: list[_Root] = []
    for i in range(len(zs)):
        if f[i] == 0.0:
            roots.append(_Root(float(zs[i]), table.values[i, n], table.rights[i, :, n], table.lefts[i, n], 0.0))
            continue
        if i + 1 < len(zs) and f[i] * f[i + 1] < 0:
            root = _bisect_branch(table, n, i, tol)
            if root is not None:
                roots.append(root)
    roots.sort(key=lambda r: r.z)
    out: list[_Root] = []
    for r in roots:
        if out and abs(r.z - out[-1].z) <= 10 * tol:
            continue
        out.append(r)
    return out


def _bisect_branch(table: BranchTable, n: int, i: int, tol: float) -> Optional[_Root]:
    H = table.hamiltonian
    a, b = float(table.grid[i]), float(table.grid[i + 1])
    fa = table.values[i, n].real - a
    # match the whole tracked set, exactly as the tracer does
    ref = table.rights[i]
    best = None
    while True:
        m = 0.5 * (a + b)
        dec = decompose(H, m, table.n_candidates, phase=False)
        perm, _ = _greedy_match(ref, dec.rights)
        j = int(perm[n])
        fm = float(dec.values[j].real) - m
        cand = _Root(m, dec.values[j], dec.rights[:, j], dec.lefts[j], abs(fm))
        if best is None or cand.residual < best.residual:
            best = cand
        if abs(fm) <= tol or not a < m < b:
            break
        if (fm < 0) == (fa < 0):
            a, fa, ref = m, fm, dec.rights[:, perm]
        else:
            b = m
    # the bracket collapsed onto a jump, or the branch is genuinely continuous
    if best.residual <= max(tol, accuracy_floor(H, best.z)):
        return best
    return None


def self_consistent_roots(table: BranchTable, n: int, tol: float = 1e-12) -> list[float]:
    """All z in the table's span with E^(n)(z) = z (possibly none)."""
    return [r.z for r in _branch_roots(table, n, tol)]


# --------------------------------------------------------------------------
# bound states


@dataclass(frozen=True)
class BoundState:
    """One self-consistent solution; ``alpha = (branch, root ordinal from 1)``."""

    alpha: tuple[int, int]
    energy: float
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    residual_right: float
    residual_left: float
    fixed_point_residual: float = 0.0
    match_quality: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.right)


def make_bound_state(H: EDHamiltonian, alpha, energy: float, right, left, match_quality=1.0) -> BoundState:
    """Normalize ||right|| = 1, left @ right = 1 and record eigen-residuals at H(energy)."""
    right = np.asarray(right, dtype=complex)
    left = np.asarray(left, dtype=complex)
    nrm = np.linalg.norm(right)
    right = right / nrm
    left = left * nrm
    left = left / (left @ right)
    rr = models.apply(H, energy, right) - energy * right
    rl = models.apply_left(H, energy, left) - energy * left
    return BoundState(
        alpha=tuple(alpha),
        energy=float(energy),
        right=right,
        left=left,
        residual_right=float(np.linalg.norm(rr)),
        residual_left=float(np.linalg.norm(rl)),
        match_quality=float(match_quality),
    )


def segment_grid(seg: Segment, grid: np.ndarray) -> np.ndarray:
    """Global grid restricted to ``seg`` plus its ends, clustered at adjacent poles."""
    inner = grid[(grid > seg.lo) & (grid < seg.hi)]
    pts = [seg.lo, *inner.tolist(), seg.hi]
    first = inner[0] if len(inner) else seg.hi
    last = inner[-1] if len(inner) else seg.lo
    if seg.left_pole is not None:
        gap = seg.lo - seg.left_pole
        k = 1
        while seg.left_pole + gap * 10 ** (k / 2) < first:
            pts.append(seg.left_pole + gap * 10 ** (k / 2))
            k += 1
    if seg.right_pole is not None:
        gap = seg.right_pole - seg.hi
        k = 1
        while seg.right_pole - gap * 10 ** (k / 2) > last:
            pts.append(seg.right_pole - gap * 10 ** (k / 2))
            k += 1
    return np.unique(np.array(pts))


def solve_all(
    H: EDHamiltonian,
    interval: tuple[float, float],
    grid_points: int = 64,
    tol: float = 1e-12,
    threshold: float = AMBIGUITY_THRESHOLD,
    n_branches: Optional[int] = None,
    workers: int = 1,
) -> list[BoundState]:
    """Every self-consistent bound state with energy inside ``interval``.

    The interval is cut into continuity segments (domain windows, pole-free
    stretches); each segment is traced separately and branch ``n`` means the
    n-th branch (by real part) at the segment's left end.
    """
    lo, hi = map(float, interval)
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    segments = H.domain.segments(lo, hi)
    if not segments:
        raise DomainError(f"[{lo}, {hi}] does not intersect the model domain")
    grid = np.linspace(lo, hi, grid_points)

    found: dict[int, list[tuple[_Root, BranchTable]]] = {}
    for seg in segments:
        pts = segment_grid(seg, grid)
        if len(pts) < 2:
            _single_point(H, float(pts[0]), tol, n_branches, found)
            continue
        table = trace_branches(H, pts, n_branches, threshold, workers)
        for n in range(table.n_branches):
            try:
                roots = _branch_roots(table, n, tol)
            except ComplexBranchError as exc:
                raise ComplexBranchError(f"{exc} (segment [{seg.lo}, {seg.hi}])", branch=n) from exc
            found.setdefault(n, []).extend((r, table) for r in roots)

    states = []
    for n, items in sorted(found.items()):
        items.sort(key=lambda it: it[0].z)
        for j, (root, table) in enumerate(items, start=1):
            states.append(_finalize(H, table, n, j, root))
    states.sort(key=lambda s: (s.energy, s.alpha))
    return states


def _single_point(H, z, tol, n_branches, found) -> None:
    """Segment reduced to one admissible energy: test it directly."""
    dec = decompose(H, z, n_branches)
    grid = np.array([z])
    table = BranchTable(H, grid, dec.values[None, :], dec.rights[None], dec.lefts[None], np.array([]), n_branches)
    for n in range(len(dec)):
        fp = abs(dec.values[n] - z)
        if fp <= max(tol, accuracy_floor(H, z)):
            root = _Root(z, dec.values[n], dec.rights[:, n], dec.lefts[n], float(fp))
            found.setdefault(n, []).append((root, table))


def _finalize(H: EDHamiltonian, table: BranchTable, n: int, j: int, root: _Root) -> BoundState:
    ref = table.rights[table.nearest(root.z), :, n]
    dec = decompose(H, root.z, table.n_candidates)
    k = _pick(dec, ref)
    state = make_bound_state(H, (n, j), root.z, dec.rights[:, k], dec.lefts[k], table.min_quality())
    fp = abs(float(dec.values[k].real) - root.z)
    return BoundState(**{**state.__dict__, "fixed_point_residual": fp})
