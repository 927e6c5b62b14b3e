"""Lippmann-Schwinger volume-integral solver for the unperturbed medium.

The total field satisfies ``u = u_inc + kappa^2 * int (n^2 - 1) Phi u``.  The
domain is tiled with cubic cells; every interaction uses the exact average of
``Phi`` over a ball of the cell's volume (``ball_integral``), which removes the
weak singularity and keeps the discrete operator complex-symmetric.  That
symmetry is what makes the discrete Green function symmetric and the two
reciprocity relations hold to solver tolerance.

The linear system is solved matrix-free with restarted GMRES; products with
the translation-invariant kernel go through a zero-padded FFT.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from .domain import MediumSpec, evaluate_index
from .errors import GridResolutionError, NearSingularityWarning, SolverError

log = logging.getLogger(__name__)

_EQ_RADIUS = (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0)


def free_space_green(x, z, kappa: float):
    """Outgoing fundamental solution exp(i k r) / (4 pi r)."""
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(z, float), axis=-1)
    return np.exp(1j * kappa * r) / (4.0 * np.pi * r)


def ball_integral(s, kappa: float, rho: float) -> np.ndarray:
    """Integral of ``Phi(p, y)`` over the ball ``|y| < rho`` for ``|p| = s``.

    Outside the ball the mean-value property gives ``Phi(s) |B| g(k rho)``;
    inside, the radial solution of ``(Delta + k^2) f = -1`` matched at ``rho``.
    """
    s = np.asarray(s, dtype=float)
    x = kappa * rho
    vol = 4.0 * np.pi * rho ** 3 / 3.0
    out = np.empty(s.shape, dtype=complex)
    outside = s >= rho
    if x < 1e-3:
        g = 1.0 - x * x / 10.0 + x ** 4 / 280.0
    else:
        g = 3.0 * (np.sin(x) - x * np.cos(x)) / x ** 3
    so = s[outside]
    out[outside] = np.exp(1j * kappa * so) / (4.0 * np.pi * so) * vol * g
    si = s[~outside]
    if x < 1e-3:
        k = kappa
        out[~outside] = (rho ** 2 / 2 - si ** 2 / 6 + 1j * k * rho ** 3 / 3
                         + k ** 2 * (-rho ** 4 / 8 - rho ** 2 * si ** 2 / 12 + si ** 4 / 120)
                         + 1j * k ** 3 * (-rho ** 5 / 30 - rho ** 3 * si ** 2 / 18))
    else:
        j0 = np.sinc(kappa * si / np.pi)
        out[~outside] = ((1.0 - 1j * x) * np.exp(1j * x) * j0 - 1.0) / kappa ** 2
    return out


@dataclass(frozen=True)
class VolumeGrid:
    """Cubic cells over-covering the support box; contrast is ``n^2 - 1``
    averaged over ``subsamples^3`` points per cell (zero on over-covered
    cells outside the medium)."""

    origin: np.ndarray
    h: float
    shape: tuple
    contrast: np.ndarray

    @classmethod
    def cover(cls, medium: MediumSpec, cells_per_axis: int = 24,
              subsamples: int = 3) -> "VolumeGrid":
        lo, hi = np.asarray(medium.support_lo), np.asarray(medium.support_hi)
        extent = hi - lo
        h = float(extent.max()) / cells_per_axis
        shape = tuple(int(np.ceil(e / h - 1e-9)) for e in extent)
        origin = 0.5 * (lo + hi) - 0.5 * h * np.array(shape)
        contrast = np.zeros(shape)
        if not medium.is_homogeneous():
            offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
            sub = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), -1).reshape(-1, 3) * h
            centers = cls._centers(origin, h, shape)
            for k in range(shape[0]):
                pts = centers[k][..., None, :] + sub
                n = evaluate_index(medium, pts)
                contrast[k] = np.mean(n ** 2 - 1.0, axis=-1)
        contrast.flags.writeable = False
        return cls(origin, h, shape, contrast)

    @staticmethod
    def _centers(origin, h, shape) -> np.ndarray:
        axes = [origin[k] + h * (np.arange(shape[k]) + 0.5) for k in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @property
    def centers(self) -> np.ndarray:
        return self._centers(self.origin, self.h, self.shape)

    @property
    def rho(self) -> float:
        """Radius of the ball with the cell's volume."""
        return _EQ_RADIUS * self.h

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@dataclass
class FieldSolution:
    """Total field on the cells for a plane wave (``kind='plane'``, ``source``
    is the direction) or a point source (``kind='point'``, ``source`` is z)."""

    kind: str
    source: np.ndarray
    values: np.ndarray
    residual: float
    iterations: int
    solver: "LippmannSchwingerSolver"


class LippmannSchwingerSolver:
    """Discretized medium operator for one (medium, wavenumber, grid) triple.

    Solutions are cached per incidence direction and per source point; the
    object is otherwise read-only after construction.
    """

    def __init__(self, medium: MediumSpec, kappa: float, cells_per_axis: int = 24,
                 tol: float = 1e-8, max_iter: int = 500, restart: int = 50,
                 subsamples: int = 3, grid: Optional[VolumeGrid] = None,
                 check_resolution: bool = True, singular_floor: Optional[float] = None):
        self.medium = medium
        self.kappa = float(kappa)
        self.tol = tol
        self.max_iter = max_iter
        self.restart = restart
        self.grid = grid or VolumeGrid.cover(medium, cells_per_axis, subsamples)
        wavelength = 2 * np.pi / (self.kappa * medium.n_max)
        if check_resolution and self.grid.h > wavelength / 8:
            raise GridResolutionError(
                f"cell size {self.grid.h:.4g} exceeds wavelength/8 = {wavelength / 8:.4g}")
        self.singular_floor = (1e-3 * 2 * np.pi / self.kappa
                               if singular_floor is None else singular_floor)
        self.weights = self.kappa ** 2 * self.grid.contrast
        self.zero_contrast = not np.any(self.weights)
        self._active = self.weights != 0
        self._active_centers = self.grid.centers[self._active]
        self._active_weights = self.weights[self._active]
        self._kernel_hat = None if self.zero_contrast else self._build_kernel()
        self._plane_cache = {}
        self._point_cache = {}

    # -- discrete operator -------------------------------------------------

    def _build_kernel(self) -> np.ndarray:
        g = self.grid
        axes = []
        for n in g.shape:
            idx = np.arange(2 * n)
            axes.append(np.where(idx < n, idx, idx - 2 * n) * g.h)
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        dist = np.sqrt(X ** 2 + Y ** 2 + Z ** 2)
        kern = ball_integral(dist, self.kappa, g.rho)
        return sfft.fftn(kern)

    def _convolve(self, f: np.ndarray) -> np.ndarray:
        shape = self.grid.shape
        pad = np.zeros(self._kernel_hat.shape, dtype=complex)
        pad[:shape[0], :shape[1], :shape[2]] = f
        out = sfft.ifftn(sfft.fftn(pad) * self._kernel_hat)
        return out[:shape[0], :shape[1], :shape[2]]

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``(I - K W) u`` on the cell values."""
        u = u.reshape(self.grid.shape)
        return u - self._convolve(self.weights * u)

    def _solve(self, rhs: np.ndarray, kind: str, source: np.ndarray) -> FieldSolution:
        if self.zero_contrast:
            return FieldSolution(kind, source, rhs, 0.0, 0, self)
        n = self.grid.size
        op = LinearOperator((n, n), matvec=lambda v: self.apply(v).ravel(), dtype=complex)
        count = [0]

        def _cb(_):
            count[0] += 1

        b = rhs.ravel()
        x, info = gmres(op, b, rtol=self.tol, atol=0.0, restart=self.restart,
                        maxiter=int(np.ceil(self.max_iter / self.restart)),
                        callback=_cb, callback_type="pr_norm")
        residual = float(np.linalg.norm(op.matvec(x) - b) / np.linalg.norm(b))
        if info != 0:
            raise SolverError(f"GMRES did not converge: relative residual {residual:.3e} "
                              f"after {count[0]} iterations", residual, count[0])
        log.debug("%s solve: %d iterations, residual %.2e", kind, count[0], residual)
        return FieldSolution(kind, source, x.reshape(self.grid.shape), residual, count[0], self)

    # -- solutions -----------------------------------------------------------

    def solve_plane_wave(self, theta) -> FieldSolution:
        theta = np.asarray(theta, dtype=float)
        key = tuple(theta.tolist())
        if key not in self._plane_cache:
            rhs = np.exp(1j * self.kappa * self.grid.centers @ theta)
            self._plane_cache[key] = self._solve(rhs, "plane", theta)
        return self._plane_cache[key]

    def solve_point_source(self, z) -> FieldSolution:
        """Total field of the incident wave Phi(., z), cell-averaged."""
        z = np.asarray(z, dtype=float)
        key = tuple(z.tolist())
        if key not in self._point_cache:
            if self.zero_contrast:
                rhs = np.zeros(self.grid.shape, dtype=complex)
            else:
                dist = np.linalg.norm(self.grid.centers - z, axis=-1)
                rhs = ball_integral(dist, self.kappa, self.grid.rho) / self.grid.h ** 3
            self._point_cache[key] = self._solve(rhs, "point", z)
        return self._point_cache[key]

    # -- evaluation ------------------------------------------------------------

    def _scattered_at(self, sol: FieldSolution, x: np.ndarray) -> np.ndarray:
        if self.zero_contrast:
            return np.zeros(x.shape[:-1], dtype=complex)
        wu = self._active_weights * sol.values[self._active]
        flat = x.reshape(-1, 3)
        out = np.empty(len(flat), dtype=complex)
        for i, p in enumerate(flat):
            dist = np.linalg.norm(self._active_centers - p, axis=-1)
            out[i] = ball_integral(dist, self.kappa, self.grid.rho) @ wu
        return out.reshape(x.shape[:-1])

    def evaluate(self, sol: FieldSolution, x) -> np.ndarray:
        """Field at arbitrary points via the integral representation.

        For point-source solutions this is the full Green function, with the
        free-space singular part added in closed form."""
        x = np.asarray(x, dtype=float)
        if sol.kind == "plane":
            inc = np.exp(1j * self.kappa * x @ sol.source)
        else:
            inc = free_space_green(x, sol.source, self.kappa)
        out = inc + self._scattered_at(sol, x)
        return out[()] if out.ndim == 0 else out

    def far_field(self, sol: FieldSolution, xhat) -> np.ndarray:
        """Far-field amplitude in the ``exp(i k r) / (4 pi r)`` normalization."""
        xhat = np.asarray(xhat, dtype=float)
        if sol.kind == "point":
            base = np.exp(-1j * self.kappa * xhat @ sol.source)
        else:
            base = np.zeros(xhat.shape[:-1], dtype=complex)
        if self.zero_contrast:
            return base[()] if base.ndim == 0 else base
        phase = np.exp(-1j * self.kappa * self._active_centers @ xhat.reshape(-1, 3).T)
        wu = self._active_weights * sol.values[self._active]
        out = base + (self.grid.h ** 3 * (wu @ phase)).reshape(xhat.shape[:-1])
        return out[()] if out.ndim == 0 else out

    # -- convenience ------------------------------------------------------------

    def total_field(self, x, theta) -> complex:
        return self.evaluate(self.solve_plane_wave(theta), x)

    def far_field_pattern(self, xhat, theta) -> complex:
        return self.far_field(self.solve_plane_wave(theta), xhat)

    def green(self, x, z) -> complex:
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        sep = np.linalg.norm(x - z)
        if sep == 0:
            raise ValueError("Green function is singular at x = z")
        if sep < self.singular_floor:
            warnings.warn(f"|x - z| = {sep:.3g} below near-singularity floor "
                          f"{self.singular_floor:.3g}", NearSingularityWarning, stacklevel=2)
        if self.zero_contrast:
            return complex(free_space_green(x, z, self.kappa))
        return complex(self.evaluate(self.solve_point_source(z), x))

    def green_far_field(self, z, xhat) -> complex:
        return self.far_field(self.solve_point_source(z), xhat)


# -- functional wrappers -----------------------------------------------------

def solve_total_field(medium, kappa, theta, grid: Optional[VolumeGrid] = None,
                      **opts) -> FieldSolution:
    return LippmannSchwingerSolver(medium, kappa, grid=grid, **opts).solve_plane_wave(theta)


def evaluate_total_field(sol: FieldSolution, x):
    return sol.solver.evaluate(sol, x)


def far_field_pattern(sol: FieldSolution, xhat):
    return sol.solver.far_field(sol, xhat)


def green_function(medium, kappa, z, x, grid: Optional[VolumeGrid] = None, **opts) -> complex:
    return LippmannSchwingerSolver(medium, kappa, grid=grid, **opts).green(x, z)


def green_far_field(medium, kappa, z, xhat, grid: Optional[VolumeGrid] = None, **opts):
    return LippmannSchwingerSolver(medium, kappa, grid=grid, **opts).green_far_field(z, xhat)
