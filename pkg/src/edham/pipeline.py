"""Pipeline stages and the deterministic report.

Every stage runs inside :func:`stage`, which tags numerical failures with the
stage name so the CLI can report where a run broke.
"""

from __future__ import annotations

import platform
from contextlib import contextmanager
from dataclasses import dataclass
from importlib import metadata
from typing import Optional

import numpy as np

from . import biortho, feshbach, linearize, models, nlevp, oracles
from .config import BuiltModel, RunConfig, build_model
from .errors import (
    AmbiguityError,
    ComplexBranchError,
    ConfigError,
    EvaluationError,
    InputError,
    NonDiagonalizableError,
    NumericalError,
    PoleError,
    RankDeficientError,
    UnsupportedSpectrumError,
)

# matrices above this dimension are summarized, not embedded in JSON reports
EMBED_DIM = 16

_REASONS = (
    (RankDeficientError, "rank-deficient"),
    (AmbiguityError, "ambiguous-branch"),
    (PoleError, "pole"),
    (EvaluationError, "evaluation"),
    (UnsupportedSpectrumError, "unsupported-spectrum"),
    (NonDiagonalizableError, "non-diagonalizable"),
    (ComplexBranchError, "complex-branch"),
    (InputError, "input"),
)


def reason_of(exc: BaseException) -> str:
    for cls, name in _REASONS:
        if isinstance(exc, cls):
            return name
    return "domain" if isinstance(exc, ValueError) else "numerical"


class StageError(Exception):
    def __init__(self, stage_name: str, cause: NumericalError):
        super().__init__(f"stage {stage_name!r} failed ({reason_of(cause)}): {cause}")
        self.stage = stage_name
        self.cause = cause
        self.reason = reason_of(cause)


@contextmanager
def stage(name: str):
    try:
        yield
    except NumericalError as exc:
        raise StageError(name, exc) from exc


# --------------------------------------------------------------------------
# JSON helpers


def cmatrix(M) -> dict:
    M = np.asarray(M, dtype=complex)
    return {"re": M.real.tolist(), "im": M.imag.tolist()}


def versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "sympy", "pydantic"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def state_row(s: nlevp.BoundState) -> dict:
    return {
        "alpha": list(s.alpha),
        "energy": s.energy,
        "residual_right": s.residual_right,
        "residual_left": s.residual_left,
        "fixed_point_residual": s.fixed_point_residual,
        "match_quality": s.match_quality,
    }


# --------------------------------------------------------------------------
# stages


@dataclass
class Context:
    cfg: RunConfig
    built: BuiltModel
    workers: int = 1
    states: Optional[list] = None
    selected: Optional[list] = None
    duals: Optional[biortho.DualBasis] = None
    pair: Optional[linearize.LinearizedPair] = None


def prepare(cfg: RunConfig, base_dir, workers: int = 1) -> Context:
    return Context(cfg, build_model(cfg, base_dir), workers)


def header(cfg: RunConfig, command: str, built: BuiltModel) -> dict:
    H = built.hamiltonian
    return {
        "command": command,
        "config": cfg.model_dump(mode="json"),
        "seed": cfg.seed,
        "versions": versions(),
        "model": {"label": H.label, "dim": H.dim, "hermitian_each_z": H.hermitian_each_z},
    }


def do_solve(ctx: Context) -> dict:
    s = ctx.cfg.solve
    if s is None:
        raise ConfigError("this command needs a 'solve' section")
    with stage("solve"):
        ctx.states = nlevp.solve_all(
            ctx.built.hamiltonian,
            s.interval,
            s.grid_points,
            tol=s.tol,
            threshold=s.ambiguity_threshold,
            n_branches=s.n_branches,
            workers=ctx.workers,
        )
    return {"bound_states": [state_row(x) for x in ctx.states]}


def scheme_of(ctx: Context) -> str:
    if ctx.cfg.linearize.scheme is not None:
        return ctx.cfg.linearize.scheme
    return "hermitian" if ctx.built.hamiltonian.hermitian_each_z else "nonhermitian"


def _select(ctx: Context) -> list:
    sel = ctx.cfg.biortho.select
    states = ctx.states
    if sel == "all":
        return list(states)
    if sel == "first_per_branch":
        return [s for s in states if s.alpha[1] == 1]
    by_alpha = {s.alpha: s for s in states}
    missing = [a for a in sel if tuple(a) not in by_alpha]
    if missing:
        raise InputError(f"selected states {missing} were not found by the solver")
    return [by_alpha[tuple(a)] for a in sel]


def do_biortho(ctx: Context) -> dict:
    with stage("biortho"):
        ctx.selected = _select(ctx)
        if not ctx.selected:
            raise InputError("no bound states to build a basis from")
        scheme = scheme_of(ctx)
        R = biortho.overlap_matrix(ctx.selected, scheme, ctx.cfg.biortho.max_condition)
        ctx.duals = biortho.dual_basis(ctx.selected, R)
        defects = biortho.projector_defects(ctx.selected, ctx.duals)
        double = biortho.double_sum_projector(ctx.selected, scheme)
        Pi = biortho.completeness_projector(ctx.selected, ctx.duals)
    out = {
        "scheme": scheme,
        "selected": [list(s.alpha) for s in ctx.selected],
        "overlap": cmatrix(R.entries),
        "condition": R.condition,
        "biorthonormality_residual": biortho.biorthonormality_residual(ctx.selected, ctx.duals),
        "completeness": defects,
        "double_sum_vs_single_sum": float(np.max(np.abs(double - Pi))),
    }
    return {"biortho": out}


def do_linearize(ctx: Context) -> dict:
    with stage("linearize"):
        ctx.pair = linearize.linearize(ctx.selected, ctx.duals)
    out = {"scheme": ctx.pair.scheme, "residuals": ctx.pair.residuals}
    if ctx.built.hamiltonian.dim <= EMBED_DIM:
        out["matrices"] = {k: cmatrix(v) for k, v in ctx.pair.matrices().items()}
    result = {"linearize": out}
    H0 = ctx.built.H0
    if H0 is not None and not models.is_hermitian(H0):
        with stage("linearize"):
            nh = linearize.spectral_decomposition_nonhermitian(H0)
        result["nonhermitian"] = {"eta": cmatrix(nh.eta), "eta_inv": cmatrix(nh.eta_inv), "residuals": nh.residuals}
    return result


def _compare(kind: str, expected, found) -> dict:
    found = np.asarray(sorted(found), dtype=float)
    rows = []
    for e in expected:
        if len(found):
            k = int(np.argmin(np.abs(found - e)))
            rows.append({"expected": float(e), "found": float(found[k]), "abs_error": float(abs(found[k] - e))})
        else:
            rows.append({"expected": float(e), "found": None, "abs_error": None})
    errs = [r["abs_error"] for r in rows if r["abs_error"] is not None]
    return {
        "kind": kind,
        "rows": rows,
        "max_abs_error": max(errs) if errs and len(errs) == len(rows) else None,
    }


def do_oracle(ctx: Context) -> dict:
    """Cross-checks of the solved energies against independent ground truths."""
    b, s = ctx.built, ctx.cfg.solve
    lo, hi = s.interval
    energies = [x.energy for x in ctx.states]

    def inside(vals):
        return [float(v) for v in vals if lo < v <= hi]

    with stage("oracle"):
        if b.H0 is not None:
            w = np.linalg.eigvals(b.H0)
            out = [_compare("direct_diagonalization", inside(sorted(w.real)), energies)]
        elif b.segments:
            exp = []
            for seg in b.segments:
                w = np.linalg.eigvals(seg.matrix).real
                exp += [v for v in w if seg.window.contains(float(v))]
            out = [_compare("in_window_eigenvalues", inside(sorted(exp)), energies)]
        elif b.feshbach is not None:
            rec = feshbach.recoverable_spectrum(b.feshbach)
            out = [_compare("recoverable_spectrum", inside(r.eigenvalue for r in rec if r.recoverable), energies)]
        elif b.oscillator is not None:
            out = []
            for n in sorted({x.alpha[0] for x in ctx.states}):
                branch = [x.energy for x in ctx.states if x.alpha[0] == n]
                c = _compare("ho_analytic_roots", inside(oracles.ho_analytic_roots(n, b.oscillator)), branch)
                c["branch"] = n
                out.append(c)
        elif b.sextic is not None:
            sol = oracles.qes_sextic_construct(b.sextic.N, b.sextic.b)
            H = b.hamiltonian
            exp = [e for e in sol.energies if H.domain.contains(e)]
            c = _compare("qes_energies", inside(exp), energies)
            c["A_N"] = str(sol.A_N)
            c["exact_residuals_zero"] = [oracles.qes_residual(sol, j).is_zero for j in range(len(sol.energies))]
            out = [c]
        else:
            out = []
    return {"oracle": out}


def do_reduce(ctx: Context) -> dict:
    fm = ctx.built.feshbach
    if fm is None:
        raise ConfigError("'reduce' needs a feshbach model")
    spec = ctx.cfg.reduce
    if spec.energies is not None:
        energies = spec.energies
    else:
        if ctx.cfg.solve is not None:
            lo, hi = ctx.cfg.solve.interval
        else:
            w = np.linalg.eigvalsh(fm.H_R)
            lo, hi = float(w[0]) - 1.0, float(w[-1]) + 1.0
        energies = np.linspace(lo, hi, spec.samples).tolist()
    samples = []
    with stage("reduce"):
        for E in energies:
            try:
                samples.append({"E": float(E), "H_eff": cmatrix(feshbach.feshbach_reduce(fm, E))})
            except PoleError as exc:
                samples.append({"E": float(E), "pole": str(exc)})
        rec = feshbach.recoverable_spectrum(fm)
    return {
        "reduce": {
            "rank": fm.rank,
            "poles": fm.poles.tolist(),
            "samples": samples,
            "recoverable_spectrum": [
                {
                    "eigenvalue": r.eigenvalue,
                    "recoverable": r.recoverable,
                    "reason": r.reason,
                    "projection_norm": r.projection_norm,
                    "pole_gap": r.pole_gap,
                }
                for r in rec
            ],
        }
    }


def oracle_tables(qes_N=(0, 1, 2), b="1", moments_nmax: int = 10, moments_c=(0.0, 0.5, 1.0)) -> dict:
    """Stand-alone QES and moment tables (no model involved)."""
    qes = []
    for N in qes_N:
        sol = oracles.qes_sextic_construct(N, b)
        d = sol.as_dict()
        d["exact_residuals_zero"] = [oracles.qes_residual(sol, j).is_zero for j in range(len(sol.energies))]
        qes.append(d)
    moments = []
    for c in moments_c:
        for n in range(moments_nmax + 1):
            g = oracles.gamma_moment(n, c)
            q = oracles.gamma_moment_quadrature(n, c)
            moments.append({"n": n, "c": c, "gamma": g, "quadrature": q, "rel_diff": abs(g - q) / abs(g)})
    return {"qes": qes, "moments": moments}


PIPELINES = {
    "solve": (do_solve,),
    "verify": (do_solve, do_biortho),
    "linearize": (do_solve, do_biortho, do_linearize),
    "run": (do_solve, do_biortho, do_linearize, do_oracle),
    "reduce": (do_reduce,),
}


def execute(command: str, cfg: RunConfig, base_dir, workers: int = 1) -> tuple[dict, Context]:
    ctx = prepare(cfg, base_dir, workers)
    report = header(cfg, command, ctx.built)
    for step in PIPELINES[command]:
        report.update(step(ctx))
    return report, ctx
