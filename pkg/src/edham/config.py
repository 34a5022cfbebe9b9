"""JSON run configuration: strict schema and model construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import csvio, feshbach, models, sampling
from .errors import ConfigError, DimensionError

Entry = Union[float, tuple[float, float]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RandomHermitian(_Strict):
    random_hermitian: int = Field(ge=1)


class RankSpec(_Strict):
    """Random rank-k orthogonal projector (drawn from the run seed)."""

    rank: int = Field(ge=1)


class IndicesSpec(_Strict):
    """Coordinate projector onto the listed basis vectors."""

    indices: list[int] = Field(min_length=1)


# inline rows, a CSV path (relative to the config file), or a seeded random matrix
MatrixSpec = Union[list[list[Entry]], str, RandomHermitian]


class ConstantModel(_Strict):
    kind: Literal["constant"]
    H0: MatrixSpec


class StepSegmentSpec(_Strict):
    lo: Optional[float] = None  # None: -inf
    hi: Optional[float] = None  # None: +inf
    matrix: MatrixSpec


class StepModel(_Strict):
    kind: Literal["step"]
    segments: list[StepSegmentSpec] = Field(min_length=1)


class OscillatorModel(_Strict):
    kind: Literal["ed_mass_oscillator"]
    hbar: float = Field(1.0, gt=0)
    g: float = Field(0.5, gt=0)
    m0: float = Field(1.0, gt=0)
    lam: float = 0.0
    x_min: float = -8.0
    x_max: float = 8.0
    points: int = Field(801, ge=3)


class SexticModel(_Strict):
    kind: Literal["sextic_qes"]
    N: int = Field(0, ge=0)
    b: Union[float, str] = 1.0
    r_max: float = Field(6.0, gt=0)
    points: int = Field(1500, ge=3)
    window: Optional[tuple[float, float]] = None


class FeshbachSpec(_Strict):
    kind: Literal["feshbach"]
    H_R: MatrixSpec
    P: Union[RankSpec, IndicesSpec, MatrixSpec]
    pole_tol: float = Field(feshbach.POLE_TOL, gt=0)
    projection_tol: float = Field(feshbach.PROJECTION_TOL, gt=0)


ModelSpec = Annotated[
    Union[ConstantModel, StepModel, OscillatorModel, SexticModel, FeshbachSpec],
    Field(discriminator="kind"),
]


class SolveSpec(_Strict):
    interval: tuple[float, float]
    grid_points: int = Field(64, ge=16)
    tol: float = Field(1e-12, gt=0)
    ambiguity_threshold: float = Field(0.7, gt=0, le=1)
    n_branches: Optional[int] = Field(None, ge=1)

    @field_validator("interval")
    @classmethod
    def _nonempty(cls, v):
        if not (math.isfinite(v[0]) and math.isfinite(v[1]) and v[0] < v[1]):
            raise ValueError("interval must be finite with lo < hi")
        return v


class BiorthoSpec(_Strict):
    # "all", "first_per_branch", or explicit [n, j] pairs
    select: Union[Literal["all", "first_per_branch"], list[tuple[int, int]]] = "all"
    max_condition: float = Field(1e8, gt=1)


class LinearizeSpec(_Strict):
    scheme: Optional[Literal["hermitian", "nonhermitian"]] = None  # None: follow the model


class ReduceSpec(_Strict):
    energies: Optional[list[float]] = None
    samples: int = Field(5, ge=1)


class OutputSpec(_Strict):
    format: Literal["json", "csv"] = "json"
    path: Optional[str] = None


class RunConfig(_Strict):
    model: ModelSpec
    solve: Optional[SolveSpec] = None
    biortho: BiorthoSpec = BiorthoSpec()
    linearize: LinearizeSpec = LinearizeSpec()
    reduce: ReduceSpec = ReduceSpec()
    output: OutputSpec = OutputSpec()
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _segments_ordered(self):
        if isinstance(self.model, StepModel):
            for s in self.model.segments:
                lo = -math.inf if s.lo is None else s.lo
                hi = math.inf if s.hi is None else s.hi
                if not lo < hi:
                    raise ValueError(f"step segment ({s.lo}, {s.hi}] is empty")
        return self


def load_config(path) -> tuple[RunConfig, Path]:
    """Parsed config and the directory relative paths resolve against."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} does not exist")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    return parse_config(data), p.resolve().parent


def parse_config(data) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration:\n{exc}") from None


# --------------------------------------------------------------------------
# model construction


@dataclass(frozen=True)
class BuiltModel:
    hamiltonian: models.EDHamiltonian
    spec: object
    feshbach: Optional[feshbach.FeshbachModel] = None
    oscillator: Optional[models.OscillatorParams] = None
    sextic: Optional[models.SexticParams] = None
    H0: Optional[np.ndarray] = None
    segments: tuple = ()


def resolve_matrix(spec, base_dir: Path, rng: np.random.Generator, what: str) -> np.ndarray:
    if isinstance(spec, RandomHermitian):
        return sampling.random_hermitian(spec.random_hermitian, rng)
    if isinstance(spec, str):
        return csvio.read_matrix(base_dir / spec)
    rows = [[complex(*x) if isinstance(x, tuple) else complex(x) for x in row] for row in spec]
    if not rows or len({len(r) for r in rows}) != 1:
        raise DimensionError(f"{what}: rows must be non-empty and of equal length")
    return np.array(rows, dtype=complex)


def _bound(x, default):
    return default if x is None else float(x)


def build_model(cfg: RunConfig, base_dir: Path = Path(".")) -> BuiltModel:
    rng = sampling.rng_from(cfg.seed)
    m = cfg.model
    if isinstance(m, ConstantModel):
        H0 = resolve_matrix(m.H0, base_dir, rng, "H0")
        return BuiltModel(models.make_constant(H0), m, H0=H0)
    if isinstance(m, StepModel):
        segs = tuple(
            models.StepSegment(
                _bound(s.lo, -math.inf), _bound(s.hi, math.inf), resolve_matrix(s.matrix, base_dir, rng, f"segment {i}")
            )
            for i, s in enumerate(m.segments)
        )
        return BuiltModel(models.make_step(segs), m, segments=segs)
    if isinstance(m, OscillatorModel):
        p = models.OscillatorParams(
            hbar=m.hbar, g=m.g, mass_law=models.LinearMass(m.m0, m.lam), grid=models.Grid1D(m.x_min, m.x_max, m.points)
        )
        return BuiltModel(models.make_ed_mass_oscillator(p), m, oscillator=p)
    if isinstance(m, SexticModel):
        b = Fraction(m.b) if isinstance(m.b, str) else m.b
        p = models.SexticParams(m.N, b, models.RadialGrid(m.r_max, m.points), m.window)
        return BuiltModel(models.make_sextic_qes(p), m, sextic=p)
    # feshbach
    H_R = resolve_matrix(m.H_R, base_dir, rng, "H_R")
    D = H_R.shape[0]
    if isinstance(m.P, RankSpec):
        if m.P.rank > D:
            raise DimensionError(f"projector rank {m.P.rank} exceeds dimension {D}")
        fm = feshbach.from_basis(H_R, sampling.random_isometry(D, m.P.rank, rng), m.pole_tol, m.projection_tol)
    elif isinstance(m.P, IndicesSpec):
        if any(not 0 <= i < D for i in m.P.indices):
            raise DimensionError(f"projector indices must lie in [0, {D})")
        P = feshbach.coordinate_projector(D, m.P.indices)
        fm = feshbach.from_projector(H_R, P, m.pole_tol, m.projection_tol)
    else:
        P = resolve_matrix(m.P, base_dir, rng, "P")
        fm = feshbach.from_projector(H_R, P, m.pole_tol, m.projection_tol)
    return BuiltModel(feshbach.feshbach_model_as_ed(fm), m, feshbach=fm)
