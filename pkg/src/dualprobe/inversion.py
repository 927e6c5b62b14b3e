"""Three-step reconstruction of the refractive index from probe data.

1. single-inclusion data -> total-field vectors (up to one global sign),
2. double-inclusion data -> Green function between the two centers,
3. Green-function singularity -> index at the probe.

All transposes are plain (unconjugated): the data model is bilinear in the
total-field matrix, ``W - V = V^T B^{-1} V``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .domain import (FarFieldMatrix, GreenEstimate, IndexEstimate, MediumSpec,
                     TotalFieldVector, evaluate_index)
from .errors import (AmbiguousAlignmentError, DegenerateBackscatterError,
                     DualProbeError, IllConditionedProbeError)

log = logging.getLogger(__name__)


def extract_total_field_vector(U: FarFieldMatrix, V: FarFieldMatrix, C: float,
                               point=None) -> TotalFieldVector:
    """Recover ``+-V^t(z, theta_j)`` from ``D = (U - V) / C = -v v^T``.

    The pivot column is the one with the largest backscatter entry; its
    square root fixes the representative, the rest of the column follows.
    """
    if U.values.shape != V.values.shape or not np.array_equal(U.directions, V.directions):
        raise ValueError("U and V must share the direction set")
    if C == 0:
        raise ValueError("capacitance must be non-zero")
    D = (U.values - V.values) / C
    diag = np.abs(np.diag(D))
    j = int(np.argmax(diag))
    if diag[j] < 1e-14 * np.abs(D).max() or diag[j] == 0:
        raise DegenerateBackscatterError("all backscatter entries vanish")
    v = np.empty(D.shape[0], dtype=complex)
    v[j] = np.sqrt(-D[j, j] + 0j)
    others = np.arange(D.shape[0]) != j
    v[others] = -D[others, j] / v[j]
    if point is None:
        point = U.centers[0] if U.centers else np.zeros(3)
    return TotalFieldVector(point, v, sign_resolved=False)


def align_signs(v1: TotalFieldVector, v2: TotalFieldVector, rtol: float = 1e-6):
    """Flip ``v2`` when it is closer to ``-v1`` than to ``v1``."""
    plus = np.linalg.norm(v1.values + v2.values)
    minus = np.linalg.norm(v1.values - v2.values)
    if abs(plus - minus) <= rtol * max(plus, minus):
        raise AmbiguousAlignmentError(
            f"cannot align signs: |v1+v2| = {plus:.6g}, |v1-v2| = {minus:.6g}")
    if plus < minus:
        v2 = -v2
    return v1, v2


def green_matrix(W: np.ndarray, Vinf: np.ndarray, Vmat: np.ndarray, C) -> tuple:
    """``C^-1 (V V^T)^-1 V (W - V_inf) V^T (V V^T)^-1 C^-1 + C^-1``.

    Returns the 2x2 matrix and the smallest singular value of ``V V^T``.
    """
    Vmat = np.asarray(Vmat, dtype=complex)
    gram = Vmat @ Vmat.T
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise IllConditionedProbeError(
            f"V V^T is near-singular (singular values {sv[0]:.3e}, {sv[-1]:.3e})")
    pinv = np.linalg.solve(gram, Vmat)       # (V V^T)^-1 V
    inner = pinv @ (np.asarray(W) - np.asarray(Vinf)) @ pinv.T
    cinv = 1.0 / np.broadcast_to(np.asarray(C, dtype=float), (Vmat.shape[0],))
    G = cinv[:, None] * inner * cinv[None, :] + np.diag(cinv)
    return G, float(sv[-1])


def extract_green(W: FarFieldMatrix, Vinf: FarFieldMatrix, Vmat, C,
                  z1=None, z2=None) -> GreenEstimate:
    """Off-diagonal entry of the extracted 2x2 Green matrix."""
    G, lv = green_matrix(W.values, Vinf.values, Vmat, C)
    if z1 is None and len(W.centers) == 2:
        z1, z2 = W.centers
    z1 = np.zeros(3) if z1 is None else np.asarray(z1, float)
    z2 = np.zeros(3) if z2 is None else np.asarray(z2, float)
    return GreenEstimate(z1, z2, complex(G[0, 1]), lv)


def extract_index(green: GreenEstimate, kappa: float,
                  separation: Optional[float] = None) -> IndexEstimate:
    """``(4 pi / (i k)) G - 1 / (i k d)``: the constant term of the
    singular expansion of ``exp(i k n d) / (4 pi d)``."""
    d = green.separation if separation is None else separation
    if d <= 0:
        raise ValueError("probe separation must be positive")
    ik = 1j * kappa
    n_hat = 4.0 * np.pi / ik * green.value - 1.0 / (ik * d)
    return IndexEstimate(np.asarray(green.z1), complex(n_hat))


@dataclass
class ProbePairRecord:
    index: int
    z1: np.ndarray
    z2: np.ndarray
    v1: Optional[TotalFieldVector] = None
    v2: Optional[TotalFieldVector] = None
    green: Optional[GreenEstimate] = None
    estimate: Optional[IndexEstimate] = None
    true_n: Optional[float] = None
    true_green: Optional[complex] = None
    error: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def n_error(self) -> Optional[float]:
        if self.estimate is None or self.true_n is None:
            return None
        return abs(self.estimate.value - self.true_n)

    @property
    def green_error(self) -> Optional[float]:
        if self.green is None or self.true_green is None:
            return None
        return abs(self.green.value - self.true_green)


def reconstruct_pair(index: int, U1: FarFieldMatrix, U2: FarFieldMatrix, W: FarFieldMatrix,
                     Vinf: FarFieldMatrix, C: float, kappa: float, z1, z2) -> ProbePairRecord:
    """Steps 1-3 for one pair; ``z1, z2`` are the centers used in the pair
    experiment (they enter only through the separation)."""
    z1 = np.asarray(z1, float)
    z2 = np.asarray(z2, float)
    rec = ProbePairRecord(index, z1, z2)
    rec.v1 = extract_total_field_vector(U1, Vinf, C, U1.centers[0] if U1.centers else z1)
    rec.v2 = extract_total_field_vector(U2, Vinf, C, U2.centers[0] if U2.centers else z2)
    rec.v1, rec.v2 = align_signs(rec.v1, rec.v2)
    Vmat = np.stack([rec.v1.values, rec.v2.values])
    rec.green = extract_green(W, Vinf, Vmat, C, z1, z2)
    rec.estimate = extract_index(rec.green, kappa)
    return rec


def reconstruct_index_map(bundle, layout, medium: Optional[MediumSpec] = None) -> List[ProbePairRecord]:
    """Run the protocol for every pair in ``layout``; failures are recorded
    per pair and do not stop the others."""
    C = bundle.capacitance
    records = []
    for m, (z1, z2) in enumerate(layout.pairs):
        try:
            rec = reconstruct_pair(m, bundle.single(z1), bundle.single(z2), bundle.pairs[m],
                                   bundle.background, C, bundle.kappa, z1, z2)
        except DualProbeError as exc:
            log.warning("pair %d failed: %s", m, exc)
            rec = ProbePairRecord(m, np.asarray(z1, float), np.asarray(z2, float), error=str(exc))
        if medium is not None:
            rec.true_n = float(evaluate_index(medium, z1))
        if m < len(bundle.true_greens):
            rec.true_green = bundle.true_greens[m]
        records.append(rec)
    return records
