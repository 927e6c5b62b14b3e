"""Far-field data for a medium deformed by one or two small impedance balls.

Measurements are synthesized from the exact point-interaction system

    Q_m + sum_{j != m} C_m G(z_m, z_j) Q_j = -C_m V^t(z_m, theta)
    U_inf(xhat, theta) = V_inf(xhat, theta) + sum_m V^t(z_m, -xhat) Q_m

with the capacitance of an impedance ball of radius ``a`` and surface
impedance ``(1 - a^h) / a``.  The system is solved in full (no Neumann
truncation), so the inversion's truncation error is actually exercised.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .domain import (BACKGROUND, DOUBLE, SINGLE, FarFieldMatrix, InclusionLayout,
                     MediumSpec, WaveConfig, evaluate_index)
from .errors import NearSingularSystemError
from .solver import LippmannSchwingerSolver, free_space_green

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


def capacitance(a: float, h: float) -> float:
    """``-4 pi a^(1-h) (1 - a^h)``: beta = 1 and lambda_0 = 1 - a^h."""
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    if h <= 0:
        raise ValueError("h must be positive")
    return -4.0 * np.pi * a ** (1.0 - h) * (1.0 - a ** h)


def uniform_disk(rng: np.random.Generator, shape, radius: float) -> np.ndarray:
    """Independent complex samples, uniform on the closed disk of ``radius``."""
    r = radius * np.sqrt(rng.random(shape))
    phi = 2.0 * np.pi * rng.random(shape)
    return r * np.exp(1j * phi)


@dataclass(frozen=True)
class ScatteringCoefficients:
    values: np.ndarray      # (M, N0): Q_m for every incidence direction
    matrix: np.ndarray      # (M, M) system matrix I + diag(C) G~
    residual: float


def solve_scattering_coefficients(C, totals, greens) -> ScatteringCoefficients:
    """Solve the point-interaction system for all incidences at once.

    Parameters
    ----------
    C : float or (M,) array
        Capacitances.
    totals : (M,) or (M, N0) array
        ``V^t(z_m, theta)`` for each center (rows) and incidence (columns).
    greens : (M, M) array
        ``G(z_m, z_j)``; the diagonal is ignored.
    """
    V = np.asarray(totals, dtype=complex)
    squeeze = V.ndim == 1
    if squeeze:
        V = V[:, None]
    M = V.shape[0]
    C = np.broadcast_to(np.asarray(C, dtype=float), (M,))
    Gt = np.array(greens, dtype=complex).reshape(M, M)
    np.fill_diagonal(Gt, 0.0)
    A = np.eye(M) + C[:, None] * Gt
    if M > 1:
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise NearSingularSystemError(f"scattering system condition number {cond:.3e}")
    rhs = -C[:, None] * V
    Q = np.linalg.solve(A, rhs)
    res = float(np.linalg.norm(A @ Q - rhs) / max(np.linalg.norm(rhs), 1e-300))
    return ScatteringCoefficients(Q[:, 0] if squeeze else Q, A, res)


def perturbed_far_field(vinf, totals_obs, Q):
    """``V_inf + sum_m V^t(z_m, -xhat) Q_m``.

    Works on scalars or, with ``totals_obs`` of shape ``(M, N0)`` indexed by
    observation ``-xhat = theta_i`` and ``Q`` of shape ``(M, N0)`` indexed by
    incidence, on whole backscatter matrices.
    """
    totals_obs = np.asarray(totals_obs, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    if totals_obs.ndim <= 1:
        return vinf + np.sum(totals_obs * Q)
    return np.asarray(vinf) + totals_obs.T @ Q


def b_matrix(C, g12: complex, g21: Optional[complex] = None) -> np.ndarray:
    """2x2 matrix with ``-1/C_l`` on the diagonal and ``-G`` off it."""
    C = np.broadcast_to(np.asarray(C, dtype=float), (2,))
    g21 = g12 if g21 is None else g21
    return np.array([[-1.0 / C[0], -g12], [-g21, -1.0 / C[1]]], dtype=complex)


def inject_model_residual(matrix: FarFieldMatrix, c: float, a: float, h: float,
                          seed) -> FarFieldMatrix:
    """Add uniform-disk perturbations of radius ``c a^(2-h)`` to every entry."""
    if c < 0:
        raise ValueError("residual constant must be non-negative")
    if c == 0:
        return matrix
    rng = np.random.default_rng(seed)
    noise = uniform_disk(rng, matrix.values.shape, c * a ** (2.0 - h))
    return matrix.replace(matrix.values + noise)


def _key(z) -> tuple:
    return tuple(float(v) for v in np.asarray(z).tolist())


@dataclass
class MeasurementBundle:
    """Everything the three-step protocol collects, plus the synthesis truth."""

    kappa: float
    directions: np.ndarray
    a: float
    h: float
    t: float
    background: FarFieldMatrix
    singles: Dict[tuple, FarFieldMatrix] = field(default_factory=dict)
    pairs: List[FarFieldMatrix] = field(default_factory=list)
    true_totals: Dict[tuple, np.ndarray] = field(default_factory=dict)
    true_greens: List[complex] = field(default_factory=list)
    surrogate_flags: List[bool] = field(default_factory=list)

    @property
    def capacitance(self) -> float:
        return capacitance(self.a, self.h)

    def single(self, z) -> FarFieldMatrix:
        return self.singles[_key(z)]


class ForwardModel:
    """Medium data source for the synthesis: background far field, total
    fields at probe centers and medium Green function between them.

    Green values between centers closer than ``min_pair_cells`` cell sizes
    fall back to the local homogeneous form ``exp(i k n(z1) d) / (4 pi d)``
    (flagged), because the grid cannot resolve them.

    ``green_model`` selects the pair Green function: ``"auto"`` (the rule
    above), ``"surrogate"`` (homogeneous form at every separation, so that an
    a-sweep sees one model throughout) or ``"solver"`` (always the grid).
    """

    GREEN_MODELS = ("auto", "surrogate", "solver")

    def __init__(self, medium: MediumSpec, waves: WaveConfig,
                 solver: Optional[LippmannSchwingerSolver] = None,
                 min_pair_cells: float = 4.0, green_model: str = "auto", **solver_opts):
        if green_model not in self.GREEN_MODELS:
            raise ValueError(f"green_model must be one of {self.GREEN_MODELS}")
        self.medium = medium
        self.waves = waves
        self.solver = solver or LippmannSchwingerSolver(medium, waves.kappa, **solver_opts)
        self.min_pair_cells = min_pair_cells
        self.green_model = green_model
        self._background = None
        self._totals = {}

    @property
    def kappa(self) -> float:
        return self.waves.kappa

    def background(self) -> FarFieldMatrix:
        if self._background is None:
            th = self.waves.directions
            vals = np.empty((len(th), len(th)), dtype=complex)
            for j, theta in enumerate(th):
                vals[:, j] = self.solver.far_field_pattern(-th, theta)
            self._background = FarFieldMatrix(vals, th, BACKGROUND, self.kappa)
        return self._background

    def totals(self, z) -> np.ndarray:
        """``V^t(z, theta_j)`` for all configured directions."""
        key = _key(z)
        if key not in self._totals:
            z = np.asarray(z, dtype=float)
            self._totals[key] = np.array(
                [self.solver.total_field(z, theta) for theta in self.waves.directions])
        return self._totals[key]

    def green(self, z1, z2) -> Tuple[complex, bool]:
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        d = float(np.linalg.norm(z2 - z1))
        if self.solver.zero_contrast:
            return complex(free_space_green(z2, z1, self.kappa)), False
        if d == 0:
            raise ValueError("pair centers coincide")
        if self.green_model == "solver":
            return self.solver.green(z2, z1), False
        if self.green_model == "surrogate" or d < self.min_pair_cells * self.solver.grid.h:
            n1 = float(evaluate_index(self.medium, z1))
            log.info("pair separation %.3g below %g cells: homogeneous surrogate",
                     d, self.min_pair_cells)
            return complex(np.exp(1j * self.kappa * n1 * d) / (4 * np.pi * d)), True
        return self.solver.green(z2, z1), False

    # -- synthesis ---------------------------------------------------------

    def single_far_field(self, z, C: float) -> FarFieldMatrix:
        vt = self.totals(z)
        Q = solve_scattering_coefficients(C, vt[None, :], np.zeros((1, 1))).values
        vals = perturbed_far_field(self.background().values, vt[None, :], Q)
        return FarFieldMatrix(vals, self.waves.directions, SINGLE, self.kappa, (z,))

    def pair_far_field(self, z1, z2, C: float) -> Tuple[FarFieldMatrix, complex, bool]:
        g, flag = self.green(z1, z2)
        V = np.stack([self.totals(z1), self.totals(z2)])
        Q = solve_scattering_coefficients(C, V, np.array([[0, g], [g, 0]])).values
        vals = perturbed_far_field(self.background().values, V, Q)
        W = FarFieldMatrix(vals, self.waves.directions, DOUBLE, self.kappa, (z1, z2),
                           {"surrogate_green": flag})
        return W, g, flag

    def synthesize(self, layout: InclusionLayout, residual_c: float = 0.0,
                   seed: Optional[int] = None) -> MeasurementBundle:
        """Background, single-inclusion data for every center, pair data for
        every two-center probe.  With ``residual_c > 0`` every U/W matrix gets
        an independent model residual of radius ``residual_c a^(2-h)``."""
        C = capacitance(layout.a, layout.h)
        bundle = MeasurementBundle(self.kappa, self.waves.directions, layout.a, layout.h,
                                   layout.t, self.background())
        stream = 0

        def _residual(m):
            nonlocal stream
            stream += 1
            if residual_c == 0:
                return m
            return inject_model_residual(m, residual_c, layout.a, layout.h,
                                         [0 if seed is None else seed, stream])

        for z in layout.centers():
            bundle.singles[_key(z)] = _residual(self.single_far_field(z, C))
            bundle.true_totals[_key(z)] = self.totals(z)
        for z1, z2 in layout.pairs:
            W, g, flag = self.pair_far_field(z1, z2, C)
            bundle.pairs.append(_residual(W))
            bundle.true_greens.append(g)
            bundle.surrogate_flags.append(flag)
        return bundle


def synthesize_measurements(medium: MediumSpec, layout: InclusionLayout, waves: WaveConfig,
                            residual_c: float = 0.0, seed=None, **solver_opts):
    """Functional entry point: ``(V_inf, [U_inf per center], [W_inf per pair])``."""
    model = ForwardModel(medium, waves, **solver_opts)
    b = model.synthesize(layout, residual_c, seed)
    return b.background, list(b.singles.values()), b.pairs
