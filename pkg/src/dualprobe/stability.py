"""Noisy and shifted measurements, regime classification and rate fits.

The stability protocol mirrors a realistic acquisition: step-1 (single
inclusion) data are recorded at the nominal centers ``z`` while the pair
data of steps 2-3 are recorded after the probes drifted to ``z~``, with
``|z~ - z| <= eta``.  Every measured matrix carries bounded additive noise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .domain import FarFieldMatrix, InclusionLayout, MediumSpec, evaluate_index
from .errors import DualProbeError, FitDomainError, LayoutError
from .foldy_lax import ForwardModel, inject_model_residual, uniform_disk
from .inversion import ProbePairRecord, reconstruct_pair

log = logging.getLogger(__name__)

ADMISSIBLE_FULL = "admissible-full"
ADMISSIBLE_STEP1 = "admissible-step1-only"
INADMISSIBLE = "inadmissible"

# stream tags for deriving independent random streams from one seed
_V, _U, _W, _SHIFT, _RESIDUAL = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class NoiseModel:
    """Amplitudes of the bounded additive noise on V, U and W data."""

    delta_u: float = 0.0
    delta_v: float = 0.0
    delta_w: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.delta_u, self.delta_v, self.delta_w) < 0:
            raise ValueError("noise amplitudes must be non-negative")

    @classmethod
    def uniform(cls, delta: float, seed: int = 0) -> "NoiseModel":
        return cls(delta, delta, delta, seed)


@dataclass(frozen=True)
class ShiftModel:
    """Probe drift between the single-inclusion and the pair measurements."""

    eta: float = 0.0
    t_tilde: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("shift length must be non-negative")


@dataclass(frozen=True)
class RegimeSpec:
    """Exponents of ``delta = a^q1`` and ``eta = a^q2``."""

    q1: float
    q2: float

    def amplitudes(self, a: float) -> Tuple[float, float]:
        return a ** self.q1, a ** self.q2


def add_noise(matrix: FarFieldMatrix, delta: float, seed) -> FarFieldMatrix:
    """Perturb every entry by an independent sample, uniform on the disk of
    radius ``delta``."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0:
        return matrix
    rng = np.random.default_rng(seed)
    return matrix.replace(matrix.values + uniform_disk(rng, matrix.values.shape, delta))


def _uniform_ball(rng: np.random.Generator, radius: float) -> np.ndarray:
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    return radius * rng.random() ** (1.0 / 3.0) * v


def shift_layout(layout: InclusionLayout, eta: float, seed,
                 medium: Optional[MediumSpec] = None,
                 t_tilde: Optional[float] = None) -> InclusionLayout:
    """Move every center by an independent uniform vector in the ball of
    radius ``eta``.

    The shifted layout is rebuilt (and hence re-validated) with closeness
    exponent ``t_tilde`` (default: the layout's ``t``); a violation raises
    :class:`LayoutError` naming the offending probe.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if eta == 0 and t_tilde in (None, layout.t):
        return layout
    rng = np.random.default_rng(seed)
    probes = [tuple(z + _uniform_ball(rng, eta) for z in group) for group in layout.probes]
    try:
        shifted = layout.with_probes(probes, t=t_tilde)
    except LayoutError as exc:
        raise LayoutError(f"shifted layout rejected (eta={eta:.3g}): {exc}") from exc
    if medium is not None:
        shifted.check_inside(medium)
    return shifted


def noisy_reconstruct(model: ForwardModel, layout: InclusionLayout,
                      noise: NoiseModel = NoiseModel(), shift: ShiftModel = ShiftModel(),
                      residual_c: float = 0.0) -> List[ProbePairRecord]:
    """Full pipeline with noisy data and drifted pair positions.

    ``V`` (noisy) is shared by all steps; step 1 uses noisy single-inclusion
    data at the nominal centers, steps 2-3 use noisy pair data at the
    shifted centers and the shifted separation.  The reference index is
    taken at the shifted first center.
    """
    C = layout.capacitance
    kappa = model.kappa
    base = noise.seed
    shifted = shift_layout(layout, shift.eta, [shift.seed, _SHIFT], model.medium, shift.t_tilde)

    def _measure(matrix, delta, tag, m, l=0):
        if residual_c > 0:
            matrix = inject_model_residual(matrix, residual_c, layout.a, layout.h,
                                           [base, _RESIDUAL, tag, m, l])
        return add_noise(matrix, delta, [base, tag, m, l])

    Vn = add_noise(model.background(), noise.delta_v, [base, _V])
    records = []
    for m, ((z1, z2), (s1, s2)) in enumerate(zip(layout.pairs, shifted.pairs)):
        try:
            U1 = _measure(model.single_far_field(z1, C), noise.delta_u, _U, m, 1)
            U2 = _measure(model.single_far_field(z2, C), noise.delta_u, _U, m, 2)
            W, g, flag = model.pair_far_field(s1, s2, C)
            W = _measure(W, noise.delta_w, _W, m)
            rec = reconstruct_pair(m, U1, U2, W, Vn, C, kappa, s1, s2)
            rec.true_green = g
            rec.extra["surrogate_green"] = flag
        except DualProbeError as exc:
            log.warning("pair %d failed: %s", m, exc)
            rec = ProbePairRecord(m, np.asarray(s1, float), np.asarray(s2, float), error=str(exc))
        rec.true_n = float(evaluate_index(model.medium, s1))
        rec.extra["nominal"] = (np.asarray(z1, float), np.asarray(z2, float))
        records.append(rec)
    return records


def regime_check(h: float, t_tilde: float, q1: float, q2: float) -> str:
    """Classify exponents against the full and the step-1-only conditions."""
    if not (0 < h < 1) or not (0 < t_tilde < (1 - h) / 2):
        return INADMISSIBLE
    if q1 > 2 - 2 * h and q2 > 1 - h:
        return ADMISSIBLE_FULL
    if q1 > 1 - h:
        return ADMISSIBLE_STEP1
    return INADMISSIBLE


def convergence_rate(points: Iterable[Sequence[float]]) -> Tuple[float, float, float]:
    """Least-squares line through ``(log a, log err)``.

    Returns
    -------
    slope, intercept, residual
        ``residual`` is the root-mean-square deviation of the log errors
        from the fitted line.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise FitDomainError("need at least three (a, error) points")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise FitDomainError("all a values and errors must be positive and finite")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    (slope, intercept), *_ = np.linalg.lstsq(np.column_stack([x, np.ones_like(x)]), y, rcond=None)
    resid = float(np.sqrt(np.mean((y - slope * x - intercept) ** 2)))
    return float(slope), float(intercept), resid


def is_strictly_decreasing(values: Sequence[float]) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))
