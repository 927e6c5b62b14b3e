"""Partial-wave series for a homogeneous penetrable ball (scalar waves).

Independent of the volume solver: used only as an oracle.  Conventions match
the solver: incident ``exp(i k x.theta)``, scattered field
``exp(i k r) / (4 pi r) * u_inf`` at infinity.
"""
from __future__ import annotations

import numpy as np
from scipy.special import eval_legendre, spherical_jn, spherical_yn

from .errors import TruncationError

MAX_SIZE_PARAMETER = 200.0


def _h1(l, x, derivative=False):
    return spherical_jn(l, x, derivative) + 1j * spherical_yn(l, x, derivative)


def _order(x: float, mx: float) -> int:
    big = max(abs(x), abs(mx))
    if big > MAX_SIZE_PARAMETER:
        raise TruncationError(f"size parameter {big:.1f} beyond the stable range")
    return int(np.ceil(big + 4.0 * big ** (1.0 / 3.0) + 20))


def mie_coefficients(n0: float, radius: float, kappa: float):
    """Exterior (``A_l``) and interior (``B_l``) coefficients.

    Continuity of the field and its radial derivative at ``r = R``:
    ``j_l(x) + A_l h_l(x) = B_l j_l(mx)`` and
    ``j_l'(x) + A_l h_l'(x) = m B_l j_l'(mx)``.
    """
    x, m = kappa * radius, n0
    L = _order(x, m * x)
    l = np.arange(L + 1)
    jx, djx = spherical_jn(l, x), spherical_jn(l, x, True)
    jmx, djmx = spherical_jn(l, m * x), spherical_jn(l, m * x, True)
    hx, dhx = _h1(l, x), _h1(l, x, True)
    denom = jmx * dhx - m * djmx * hx
    A = (m * djmx * jx - jmx * djx) / denom
    B = (1j / x ** 2) / denom
    tail = np.abs(A[-3:]).max() * (2 * L + 1)
    if tail > 1e-10 * max(np.abs(A).max(), 1e-300) and np.abs(A).max() > 0:
        raise TruncationError(f"series tail {tail:.2e} not negligible at order {L}")
    return A, B


def mie_ball_far_field(n0, radius, kappa, theta, xhat, center=(0.0, 0.0, 0.0)):
    """Far-field pattern of the ball for incidence ``theta`` observed at ``xhat``."""
    theta = np.asarray(theta, float)
    xhat = np.asarray(xhat, float)
    if n0 == 1.0:
        return np.zeros(xhat.shape[:-1], dtype=complex)[()]
    A, _ = mie_coefficients(n0, radius, kappa)
    cosg = xhat @ theta
    l = np.arange(len(A))
    P = eval_legendre(l, np.asarray(cosg)[..., None])
    amp = 4 * np.pi / (1j * kappa) * np.sum((2 * l + 1) * A * P, axis=-1)
    c = np.asarray(center, float)
    # shift of the scatterer: exp(i k (theta - xhat) . c)
    return amp * np.exp(1j * kappa * (theta - xhat) @ c)


def mie_ball_total_field(n0, radius, kappa, theta, x, center=(0.0, 0.0, 0.0)):
    """Total field at points ``x`` (inside or outside the ball)."""
    theta = np.asarray(theta, float)
    x = np.asarray(x, float)
    c = np.asarray(center, float)
    if n0 == 1.0:
        return np.exp(1j * kappa * x @ theta)
    A, B = mie_coefficients(n0, radius, kappa)
    rel = x - c
    r = np.linalg.norm(rel, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosg = np.where(r > 0, (rel @ theta) / np.where(r > 0, r, 1.0), 1.0)
    l = np.arange(len(A))
    pref = (1j ** l) * (2 * l + 1)
    P = eval_legendre(l, np.asarray(cosg)[..., None])
    rr = np.asarray(r)[..., None]
    inside = spherical_jn(l, n0 * kappa * rr) * B
    # clip so the Hankel terms stay finite where the interior branch is used
    ro = np.maximum(rr, radius)
    outside = spherical_jn(l, kappa * ro) + A * _h1(l, kappa * ro)
    radial = np.where(rr < radius, inside, outside)
    out = np.sum(pref * radial * P, axis=-1) * np.exp(1j * kappa * c @ theta)
    return out[()] if np.ndim(out) == 0 else out


def mie_scattering_cross_section(n0, radius, kappa) -> float:
    """``int |u_inf / (4 pi)|^2 dS`` from the coefficient norm."""
    A, _ = mie_coefficients(n0, radius, kappa)
    l = np.arange(len(A))
    return float(4 * np.pi * np.sum((2 * l + 1) * np.abs(A) ** 2) / kappa ** 2)


def centered_source_coefficients(n0, radius, kappa):
    """Point source at the ball center: returns ``(alpha, beta)`` with

    ``G(x, c) = exp(i k n0 r)/(4 pi r) + alpha * j0(k n0 r)`` for ``r < R`` and
    ``G(x, c) = beta * exp(i k r)/(4 pi r)`` for ``r > R``.
    """
    k1 = kappa * n0
    R = radius
    e1 = np.exp(1j * k1 * R)
    e0 = np.exp(1j * kappa * R)
    # value and radial derivative matching at r = R
    M = np.array([
        [spherical_jn(0, k1 * R), -e0 / (4 * np.pi * R)],
        [k1 * spherical_jn(0, k1 * R, True), -e0 * (1j * kappa * R - 1) / (4 * np.pi * R ** 2)],
    ], dtype=complex)
    rhs = -np.array([e1 / (4 * np.pi * R), e1 * (1j * k1 * R - 1) / (4 * np.pi * R ** 2)])
    alpha, beta = np.linalg.solve(M, rhs)
    return complex(alpha), complex(beta)


def centered_source_green(n0, radius, kappa, x, center=(0.0, 0.0, 0.0)):
    """Green function ``G(x, center)`` of the homogeneous ball."""
    alpha, beta = centered_source_coefficients(n0, radius, kappa)
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(center, float), axis=-1)
    inside = np.exp(1j * kappa * n0 * r) / (4 * np.pi * r) + alpha * np.sinc(kappa * n0 * r / np.pi)
    outside = beta * np.exp(1j * kappa * r) / (4 * np.pi * r)
    out = np.where(r < radius, inside, outside)
    return out[()] if out.ndim == 0 else out


def centered_source_far_field(n0, radius, kappa, xhat, center=(0.0, 0.0, 0.0)):
    """Far field ``G_inf(xhat, center)``; isotropic up to the center phase."""
    _, beta = centered_source_coefficients(n0, radius, kappa)
    xhat = np.asarray(xhat, float)
    return beta * np.exp(-1j * kappa * xhat @ np.asarray(center, float))
