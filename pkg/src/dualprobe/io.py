"""File formats: far-field CSV + JSON sidecar, and experiment configs.

One CSV per matrix, header

    i,j,theta_i_x,theta_i_y,theta_i_z,theta_j_x,theta_j_y,theta_j_z,re,im

where row ``(i, j)`` holds the pattern observed at ``-theta_i`` under
incidence ``theta_j``.  Numbers are printed with 17 significant digits so
that a write/read cycle is lossless.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .domain import (FarFieldMatrix, InclusionLayout, MediumSpec, WaveConfig,
                     constant_ball, grid_medium, pair_layout, smooth_bump)
from .errors import ConfigError

CSV_HEADER = ["i", "j", "theta_i_x", "theta_i_y", "theta_i_z",
              "theta_j_x", "theta_j_y", "theta_j_z", "re", "im"]
NUMBER_FORMAT = "{:.16e}"


def fmt(x: float) -> str:
    return NUMBER_FORMAT.format(float(x))


# --------------------------------------------------------------------------
# far-field matrices
# --------------------------------------------------------------------------

def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".json")


def write_far_field(matrix: FarFieldMatrix, path, extra: Optional[dict] = None) -> Path:
    """Write ``matrix`` as CSV plus a ``.json`` metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    th = matrix.directions
    n = len(th)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(n):
            for j in range(n):
                v = matrix.values[i, j]
                w.writerow([i, j, *map(fmt, th[i]), *map(fmt, th[j]), fmt(v.real), fmt(v.imag)])
    meta = {
        "kind": matrix.kind,
        "kappa": matrix.kappa,
        "centers": [np.asarray(z).tolist() for z in matrix.centers],
    }
    meta.update({k: v for k, v in matrix.meta.items() if _jsonable(v)})
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def read_far_field(path) -> FarFieldMatrix:
    """Inverse of :func:`write_far_field`."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise ConfigError(f"{path}: unexpected far-field CSV header")
    body = rows[1:]
    n = int(round(np.sqrt(len(body))))
    if n * n != len(body) or n < 2:
        raise ConfigError(f"{path}: expected N^2 data rows, got {len(body)}")
    values = np.empty((n, n), dtype=complex)
    dirs = np.full((n, 3), np.nan)
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(CSV_HEADER):
            raise ConfigError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
        try:
            i, j = int(row[0]), int(row[1])
            nums = [float(x) for x in row[2:]]
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
        values[i, j] = complex(nums[6], nums[7])
        dirs[i] = nums[0:3]
        dirs[j] = nums[3:6]
    meta = json.loads(sidecar_path(path).read_text()) if sidecar_path(path).exists() else {}
    kind = meta.pop("kind", "background")
    kappa = float(meta.pop("kappa", np.nan))
    centers = tuple(np.asarray(z, float) for z in meta.pop("centers", []))
    return FarFieldMatrix(values, dirs, kind, kappa, centers, meta)


# --------------------------------------------------------------------------
# experiment configs
# --------------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Vec3 = Tuple[float, float, float]


class MediumSection(_Strict):
    type: Literal["constant-ball", "smooth-bump", "grid"] = "constant-ball"
    n0: float = 1.0
    radius: float = 1.0
    center: Vec3 = (0.0, 0.0, 0.0)
    alpha: float = 1.0
    # grid profile
    values: Optional[List] = None
    origin: Optional[Vec3] = None
    spacing: Optional[float] = None

    def build(self) -> MediumSpec:
        if self.type == "constant-ball":
            return constant_ball(self.n0, self.radius, self.center)
        if self.type == "smooth-bump":
            return smooth_bump(self.n0, self.radius, self.center, self.alpha)
        if self.values is None or self.origin is None or self.spacing is None:
            raise ConfigError("grid medium needs 'values', 'origin' and 'spacing'")
        return grid_medium(np.asarray(self.values, float), self.origin, self.spacing)


class WavesSection(_Strict):
    kappa: float = 1.0
    count: int = Field(6, ge=2)
    offset: int = 0
    directions: Optional[List[Vec3]] = None
    kappa_max: Optional[float] = None

    def build(self) -> WaveConfig:
        if self.directions is not None:
            return WaveConfig(self.kappa, np.asarray(self.directions, float), self.kappa_max)
        w = WaveConfig.fibonacci(self.kappa, self.count, self.offset)
        return WaveConfig(w.kappa, w.directions, self.kappa_max)


class LayoutSection(_Strict):
    a: float = 0.01
    h: float = 0.25
    t: float = 0.25
    anchors: List[Vec3] = [(0.0, 0.0, 0.0)]
    axis: Vec3 = (1.0, 0.0, 0.0)
    d_factor: float = 1.0
    s: float = 0.0
    strict: bool = True

    def build(self, a: Optional[float] = None, h: Optional[float] = None,
              t: Optional[float] = None, strict: Optional[bool] = None) -> InclusionLayout:
        return pair_layout(self.anchors, self.a if a is None else a, self.h if h is None else h,
                           self.t if t is None else t, self.axis, self.d_factor,
                           strict=self.strict if strict is None else strict, s=self.s)


class SolverSection(_Strict):
    cells_per_axis: int = Field(24, ge=4)
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(500, ge=1)
    restart: int = Field(50, ge=1)
    subsamples: int = Field(3, ge=1)
    green_model: Literal["auto", "surrogate", "solver"] = "auto"
    min_pair_cells: float = 4.0

    def solver_options(self) -> dict:
        return dict(cells_per_axis=self.cells_per_axis, tol=self.tol, max_iter=self.max_iter,
                    restart=self.restart, subsamples=self.subsamples)


class NoiseSection(_Strict):
    delta_u: float = Field(0.0, ge=0)
    delta_v: float = Field(0.0, ge=0)
    delta_w: float = Field(0.0, ge=0)
    eta: float = Field(0.0, ge=0)
    t_tilde: Optional[float] = None
    # regime rows for noise-study: delta = a^q1, eta = a^q2
    regimes: List[Tuple[float, float]] = []


class SweepSection(_Strict):
    a_values: List[float] = [0.04, 0.02, 0.01, 0.005]
    ht: List[Tuple[float, float]] = [(0.25, 0.25)]
    residual_c: float = Field(0.0, ge=0)
    seeds: List[int] = [0]

    @field_validator("a_values")
    @classmethod
    def _check_a(cls, v):
        if any(not 0 < a < 1 for a in v):
            raise ValueError("every a must lie in (0, 1)")
        return v


class ValidationSection(_Strict):
    mie: bool = False
    observation_grid: int = Field(12, ge=2)


class DataSection(_Strict):
    """Measurement files for ``reconstruct`` (paths relative to the config)."""
    dir: Optional[str] = None


class ExperimentConfig(_Strict):
    id: str = "experiment"
    medium: MediumSection = MediumSection()
    waves: WavesSection = WavesSection()
    layout: LayoutSection = LayoutSection()
    solver: SolverSection = SolverSection()
    noise: NoiseSection = NoiseSection()
    sweep: SweepSection = SweepSection()
    validation: ValidationSection = ValidationSection()
    data: DataSection = DataSection()
    residual_c: float = Field(0.0, ge=0)
    seed: int = 0
    truth: bool = True


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate a JSON config; errors are :class:`ConfigError`
    with ``source:line:column`` (syntax) or a dotted key path (schema)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1:1: top level must be an object")
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = []
        for e in exc.errors():
            where = ".".join(str(p) for p in e["loc"]) or "<root>"
            line = _locate_key(text, e["loc"])
            msgs.append(f"{source}:{line}: {where}: {e['msg']}" if line else f"{source}: {where}: {e['msg']}")
        raise ConfigError("\n".join(msgs)) from None
    validate_config(cfg)
    return cfg


def _locate_key(text: str, loc) -> Optional[int]:
    """Best-effort line number of the last string key in ``loc``."""
    keys = [p for p in loc if isinstance(p, str)]
    if not keys:
        return None
    needle = f'"{keys[-1]}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def validate_config(cfg: ExperimentConfig) -> None:
    """Re-run the domain invariants (medium, waves, layout, regimes)."""
    medium = cfg.medium.build()
    cfg.waves.build()
    layout = cfg.layout.build()
    layout.check_inside(medium)
    # sweep cells may sit outside the validity window on purpose (the regime
    # column reports it), but geometry must still be consistent
    for a in cfg.sweep.a_values:
        for h, t in cfg.sweep.ht:
            cfg.layout.build(a=a, h=h, t=t, strict=False).check_inside(medium)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))
