"""Shared mathematical objects: media, wave configurations, probe layouts.

Conventions
-----------
* Points are ``(3,)`` float arrays; batches are ``(..., 3)``.
* Far-field matrices use the backscatter indexing: entry ``(i, j)`` is the
  pattern observed at ``-theta_i`` for an incident plane wave along
  ``theta_j``.
* ``n(x) = 1`` outside the support box of every medium.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, InterpolationDomainError, LayoutError

BACKGROUND = "background"
SINGLE = "single"
DOUBLE = "double"
FARFIELD_KINDS = (BACKGROUND, SINGLE, DOUBLE)


def _as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {p.shape}")
    return p


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


# --------------------------------------------------------------------------
# Refractive-index profiles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantBall:
    n0: float
    radius: float
    center: np.ndarray

    kind = "constant-ball"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(x - self.center, axis=-1)
        return np.where(r < self.radius, self.n0, 1.0)


@dataclass(frozen=True)
class SmoothBump:
    """``1 + (n0 - 1) exp(1 - R^2 / (R^2 - r^2))`` for ``r < R``; C-infinity."""

    n0: float
    radius: float
    center: np.ndarray
    alpha: float = 1.0

    kind = "smooth-bump"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        r2 = np.sum((x - self.center) ** 2, axis=-1)
        R2 = self.radius ** 2
        inside = r2 < R2
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            bump = np.exp(1.0 - R2 / np.where(inside, R2 - r2, 1.0))
        return np.where(inside, 1.0 + (self.n0 - 1.0) * bump, 1.0)


@dataclass(frozen=True)
class GridProfile:
    """Trilinear interpolation of lattice values; ``origin`` is the first node."""

    values: np.ndarray
    origin: np.ndarray
    spacing: float

    kind = "grid"

    def __post_init__(self):
        axes = [self.origin[k] + self.spacing * np.arange(self.values.shape[k])
                for k in range(3)]
        interp = RegularGridInterpolator(axes, self.values, method="linear",
                                         bounds_error=False, fill_value=np.nan)
        object.__setattr__(self, "_interp", interp)

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.spacing * (np.array(self.values.shape) - 1)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        flat = x.reshape(-1, 3)
        out = self._interp(flat)
        if np.any(np.isnan(out)):
            bad = flat[np.isnan(out)][0]
            raise InterpolationDomainError(
                f"point {bad.tolist()} lies inside the support but outside the "
                "index lattice")
        return out.reshape(x.shape[:-1])


Profile = Union[ConstantBall, SmoothBump, GridProfile]


@dataclass(frozen=True)
class MediumSpec:
    profile: Profile
    support_lo: np.ndarray
    support_hi: np.ndarray
    n_max: float

    def __post_init__(self):
        if np.any(self.support_hi <= self.support_lo):
            raise ConfigError("support box must have positive extent")
        if self.n_max <= 0:
            raise ConfigError("n_max must be positive")

    @property
    def kind(self) -> str:
        return self.profile.kind

    def inside_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x > self.support_lo) & (x < self.support_hi), axis=-1)

    def is_homogeneous(self) -> bool:
        """True for the identity medium n = 1 (no scattering at all)."""
        p = self.profile
        if isinstance(p, (ConstantBall, SmoothBump)):
            return p.n0 == 1.0
        return bool(np.all(p.values == 1.0))

    def __call__(self, x) -> np.ndarray:
        return evaluate_index(self, x)


def constant_ball(n0: float, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> MediumSpec:
    c = _frozen(_as_point(center))
    if n0 <= 0 or radius <= 0:
        raise ConfigError("constant-ball needs n0 > 0 and radius > 0")
    return MediumSpec(ConstantBall(float(n0), float(radius), c),
                      _frozen(c - radius), _frozen(c + radius), max(float(n0), 1.0))


def smooth_bump(n0: float, radius: float = 1.0, center=(0.0, 0.0, 0.0),
                alpha: float = 1.0) -> MediumSpec:
    c = _frozen(_as_point(center))
    if n0 <= 0 or radius <= 0:
        raise ConfigError("smooth-bump needs n0 > 0 and radius > 0")
    if not 0 < alpha <= 1:
        raise ConfigError("Hoelder exponent alpha must lie in (0, 1]")
    return MediumSpec(SmoothBump(float(n0), float(radius), c, float(alpha)),
                      _frozen(c - radius), _frozen(c + radius), max(float(n0), 1.0))


def grid_medium(values, origin, spacing: float, support_lo=None,
                support_hi=None) -> MediumSpec:
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 3 or min(vals.shape) < 2:
        raise ConfigError("grid profile needs a 3-D lattice with >= 2 nodes per axis")
    if np.any(vals <= 0):
        raise ConfigError("grid index values must be positive")
    prof = GridProfile(_frozen(vals), _frozen(_as_point(origin)), float(spacing))
    lo = prof.origin if support_lo is None else _as_point(support_lo)
    hi = prof.upper if support_hi is None else _as_point(support_hi)
    return MediumSpec(prof, _frozen(lo), _frozen(hi), max(float(vals.max()), 1.0))


def evaluate_index(medium: MediumSpec, x) -> np.ndarray:
    """Refractive index at ``x`` (a point or a ``(..., 3)`` batch); exactly 1
    outside the support box."""
    x = np.asarray(x, dtype=float)
    inside = medium.inside_support(x)
    out = np.ones(x.shape[:-1])
    if np.any(inside):
        out[inside] = medium.profile(x[inside])
    if out.ndim == 0:
        return float(out)
    return out


# --------------------------------------------------------------------------
# Waves
# --------------------------------------------------------------------------

def fibonacci_directions(count: int, offset: int = 0) -> np.ndarray:
    """Deterministic, well-spread unit vectors (golden-angle spiral).

    ``offset`` rotates the spiral about the z-axis by ``offset`` golden angles,
    which gives alternative but still reproducible direction sets.
    """
    if count < 2:
        raise ConfigError("need at least two directions")
    i = np.arange(count) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / count)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    azim = golden * (np.arange(count) + offset)
    return np.stack([np.cos(azim) * np.sin(polar),
                     np.sin(azim) * np.sin(polar),
                     np.cos(polar)], axis=1)


@dataclass(frozen=True)
class WaveConfig:
    kappa: float
    directions: np.ndarray
    kappa_max: Optional[float] = None

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if d.ndim != 2 or d.shape[1] != 3 or d.shape[0] < 2:
            raise ConfigError("directions must be an (N0, 3) array with N0 >= 2")
        if not np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12):
            raise ConfigError("directions must be unit vectors")
        gaps = np.linalg.norm(d[:, None, :] - d[None, :, :], axis=-1)
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < 1e-9:
            raise ConfigError("directions must be pairwise distinct")
        if not self.kappa > 0:
            raise ConfigError("wavenumber must be positive")
        if self.kappa_max is not None and self.kappa > self.kappa_max:
            raise ConfigError("wavenumber exceeds kappa_max")
        object.__setattr__(self, "directions", _frozen(d))

    @classmethod
    def fibonacci(cls, kappa: float, count: int = 6, offset: int = 0) -> "WaveConfig":
        return cls(float(kappa), fibonacci_directions(count, offset))

    @property
    def count(self) -> int:
        return self.directions.shape[0]


# --------------------------------------------------------------------------
# Inclusion layouts
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InclusionLayout:
    """Probe groups of one or two inclusion centers, deployed one group at a time.

    ``s`` (the density exponent of large inclusion clouds) is stored for the
    record only; the probing protocol never places more than one group.
    With ``strict=False`` the ``h + 2t < 1`` gate is skipped so that
    experiments outside the validity window can be run deliberately.
    """

    probes: Tuple[Tuple[np.ndarray, ...], ...]
    a: float
    h: float
    t: float
    d_min: float = 0.5
    d_max: float = 2.0
    s: float = 0.0
    strict: bool = True
    beta: float = field(default=1.0, init=False)

    def __post_init__(self):
        probes = tuple(tuple(_frozen(_as_point(z)) for z in group) for group in self.probes)
        object.__setattr__(self, "probes", probes)
        if not 0 < self.a < 1:
            raise LayoutError("radius a must lie in (0, 1)")
        if self.h <= 0:
            raise LayoutError(f"impedance exponent h must be positive, got {self.h}")
        if self.strict and self.h + 2 * self.t >= 1:
            raise LayoutError(f"h + 2t must be < 1, got h={self.h}, t={self.t}")
        if self.t < 0:
            raise LayoutError("closeness exponent t must be non-negative")
        for k, group in enumerate(probes):
            if len(group) not in (1, 2):
                raise LayoutError(f"probe {k} must hold one or two centers")
            if len(group) == 2:
                sep = float(np.linalg.norm(group[1] - group[0]))
                lo, hi = self.d_min * self.a ** self.t, self.d_max * self.a ** self.t
                if not lo <= sep <= hi:
                    raise LayoutError(
                        f"probe {k}: separation {sep:.6g} outside [{lo:.6g}, {hi:.6g}]")
                if sep <= 2 * self.a:
                    raise LayoutError(f"probe {k}: inclusion balls overlap")

    @property
    def capacitance(self) -> float:
        from .foldy_lax import capacitance
        return capacitance(self.a, self.h)

    @property
    def pairs(self) -> list:
        return [g for g in self.probes if len(g) == 2]

    def centers(self) -> list:
        """Distinct centers over all groups, in first-appearance order."""
        seen, out = set(), []
        for group in self.probes:
            for z in group:
                key = tuple(z.tolist())
                if key not in seen:
                    seen.add(key)
                    out.append(z)
        return out

    def check_inside(self, medium: MediumSpec) -> None:
        for k, group in enumerate(self.probes):
            for z in group:
                if not medium.inside_support(z):
                    raise LayoutError(f"probe {k}: center {z.tolist()} is not inside the support")

    def with_probes(self, probes, t: Optional[float] = None) -> "InclusionLayout":
        return InclusionLayout(probes, self.a, self.h, self.t if t is None else t,
                               self.d_min, self.d_max, self.s, self.strict)


def pair_layout(anchors: Sequence, a: float, h: float, t: float, axis=(1.0, 0.0, 0.0),
                d_factor: float = 1.0, strict: bool = True, **kw) -> InclusionLayout:
    """Pairs ``(z, z + d_factor * a**t * axis)`` for every anchor ``z``."""
    axis = _as_point(axis)
    axis = axis / np.linalg.norm(axis)
    d = d_factor * a ** t
    probes = [(np.asarray(z, float), np.asarray(z, float) + d * axis) for z in anchors]
    kw.setdefault("d_min", 0.5 * d_factor)
    kw.setdefault("d_max", 2.0 * d_factor)
    return InclusionLayout(tuple(probes), a, h, t, strict=strict, **kw)


# --------------------------------------------------------------------------
# Data containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FarFieldMatrix:
    values: np.ndarray
    directions: np.ndarray
    kind: str
    kappa: float
    centers: Tuple[np.ndarray, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        n = np.asarray(self.directions).shape[0]
        if v.shape != (n, n):
            raise ValueError(f"far-field matrix must be {n}x{n}, got {v.shape}")
        if self.kind not in FARFIELD_KINDS:
            raise ValueError(f"unknown far-field kind {self.kind!r}")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "directions", _frozen(np.asarray(self.directions, float)))
        object.__setattr__(self, "centers", tuple(_frozen(_as_point(z)) for z in self.centers))

    def replace(self, values) -> "FarFieldMatrix":
        return FarFieldMatrix(values, self.directions, self.kind, self.kappa,
                              self.centers, dict(self.meta))


@dataclass(frozen=True)
class TotalFieldVector:
    point: np.ndarray
    values: np.ndarray
    sign_resolved: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(v)):
            raise ValueError("total-field values must be finite")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "point", _frozen(_as_point(self.point)))

    def __neg__(self) -> "TotalFieldVector":
        return TotalFieldVector(self.point, -self.values, self.sign_resolved)


@dataclass(frozen=True)
class GreenEstimate:
    z1: np.ndarray
    z2: np.ndarray
    value: complex
    l_v: Optional[float] = None

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(np.asarray(self.z2) - np.asarray(self.z1)))


@dataclass(frozen=True)
class IndexEstimate:
    point: np.ndarray
    value: complex

    @property
    def imag_abs(self) -> float:
        return abs(self.value.imag)
