"""Orthogonality-preserving updates ``ortho(U, D, tau)``.

Three strategies are provided:

* WY: Cayley-type update ``(I - tau/2 W)^{-1} (I + tau/2 W) U`` with
  ``W = D U^T - U D^T``, evaluated through an N x N low-rank formula.
* QR: ``(U + tau D) L^{-T}`` where ``L L^T = I + tau^2 D^T D`` (Cholesky).
* PD: ``(U + tau D) (I + tau^2 D^T D)^{-1/2}`` (polar factor).

All three keep the iterate on the Stiefel manifold without any
re-orthogonalization.  ``D`` is expected to be tangent at ``U``; if it is
not (the solver may skip the projection step), QR and PD factor the true
Gram matrix of ``U + tau D`` and WY falls back to the 2N x 2N form, which
keep the result orthonormal either way.
"""
from __future__ import annotations

import enum

import numpy as np
from scipy import linalg

from .manifold import gram, _as_block, _weight_of

PD_EIG_FLOOR = 1.0 - 1e-12


class RetractionKind(str, enum.Enum):
    WY = "WY"
    QR = "QR"
    PD = "PD"


class RetractionError(ArithmeticError):
    pass


def _is_tangent(u, d, w, tol=1e-12):
    s = gram(u, d, w)
    return np.linalg.norm(s) <= tol * max(1.0, np.sqrt(w) * np.linalg.norm(d)), s


def _cho_solve_right(x, m):
    """Return ``x @ m^{-1}`` for symmetric positive definite ``m``."""
    try:
        c = linalg.cho_factor(m, lower=True)
    except linalg.LinAlgError as exc:
        raise RetractionError("Cholesky factorization failed") from exc
    return linalg.cho_solve(c, x.T).T


def ortho_wy(u, d, tau: float, h: float | None = None) -> np.ndarray:
    w = _weight_of(u, d, h=h)
    u, d = _as_block(u), _as_block(d)
    if tau == 0:
        return u.copy()
    tangent, s = _is_tangent(u, d, w)
    if not tangent:
        return _ortho_wy_general(u, d, tau, w)
    n = u.shape[1]
    g = gram(d, d, w)
    m = np.eye(n) + 0.25 * tau**2 * g
    # (I + tau^2/4 G)^{-1} commutes with G, so both terms share one solve.
    return u + _cho_solve_right(tau * d - 0.5 * tau**2 * (u @ g), m)


def _ortho_wy_general(u, d, tau, w):
    # W = X Y^T with X = (D, U), Y = (U, -D); Sherman-Morrison-Woodbury form.
    n = u.shape[1]
    x = np.hstack([d, u])
    y = np.hstack([u, -d])
    lhs = np.eye(2 * n) - 0.5 * tau * gram(y, x, w)
    rhs = gram(y, u, w)
    return u + tau * x @ np.linalg.solve(lhs, rhs)


def _shifted_gram(u, d, tau, w):
    tangent, _ = _is_tangent(u, d, w)
    if tangent:
        return np.eye(u.shape[1]) + tau**2 * gram(d, d, w)
    ut = u + tau * d
    return gram(ut, ut, w)


def ortho_qr(u, d, tau: float, h: float | None = None) -> np.ndarray:
    w = _weight_of(u, d, h=h)
    u, d = _as_block(u), _as_block(d)
    if tau == 0:
        return u.copy()
    m = _shifted_gram(u, d, tau, w)
    try:
        lower = linalg.cholesky(m, lower=True)
    except linalg.LinAlgError as exc:
        raise RetractionError("Cholesky factorization failed") from exc
    # (U + tau D) L^{-T}  ==  solve L Z^T = (U + tau D)^T
    return linalg.solve_triangular(lower, (u + tau * d).T, lower=True).T


def _inv_sqrt(m, floor):
    lam, p = np.linalg.eigh(m)
    if lam.min() <= 0:
        raise RetractionError("Gram matrix of U + tau D is singular")
    lam = np.maximum(lam, floor)
    return (p / np.sqrt(lam)) @ p.T


def ortho_pd(u, d, tau: float, h: float | None = None) -> np.ndarray:
    w = _weight_of(u, d, h=h)
    u, d = _as_block(u), _as_block(d)
    if tau == 0:
        return u.copy()
    tangent, _ = _is_tangent(u, d, w)
    # eigenvalues are >= 1 analytically only for tangent D
    floor = PD_EIG_FLOOR if tangent else 0.0
    return (u + tau * d) @ _inv_sqrt(_shifted_gram(u, d, tau, w), floor)


_DISPATCH = {
    RetractionKind.WY: ortho_wy,
    RetractionKind.QR: ortho_qr,
    RetractionKind.PD: ortho_pd,
}


def ortho(kind, u, d, tau: float, h: float | None = None) -> np.ndarray:
    return _DISPATCH[RetractionKind(kind)](u, d, tau, h)


def retraction_derivative(kind, u, d, tau: float, h: float | None = None) -> np.ndarray:
    """Analytic ``d/dtau ortho(U, D, tau)`` for tangent ``D``."""
    kind = RetractionKind(kind)
    w = _weight_of(u, d, h=h)
    u, d = _as_block(u), _as_block(d)
    if tau == 0:
        return d.copy()
    n = u.shape[1]
    g = gram(d, d, w)
    eye = np.eye(n)

    if kind is RetractionKind.WY:
        m = np.linalg.inv(eye + 0.25 * tau**2 * g)
        dm = -m @ (0.5 * tau * g) @ m
        return (d @ m + tau * d @ dm - tau * u @ m @ g
                - 0.5 * tau**2 * u @ dm @ g)

    if kind is RetractionKind.PD:
        lam, p = np.linalg.eigh(g)
        lam = np.maximum(lam, 0.0)
        s = (p * (1.0 + tau**2 * lam) ** -0.5) @ p.T
        ds = (p * (-tau * lam * (1.0 + tau**2 * lam) ** -1.5)) @ p.T
        return d @ s + (u + tau * d) @ ds

    # QR: L L^T = I + tau^2 G  =>  L' L^T + L L'^T = 2 tau G.
    # With X = L^{-1} L' lower triangular, X + X^T = L^{-1} (2 tau G) L^{-T}.
    lower = linalg.cholesky(eye + tau**2 * g, lower=True)
    c = linalg.solve_triangular(lower, 2 * tau * g, lower=True)
    c = linalg.solve_triangular(lower, c.T, lower=True).T
    x = np.tril(c, -1) + 0.5 * np.diag(np.diag(c))
    dl = lower @ x
    u_qr = linalg.solve_triangular(lower, (u + tau * d).T, lower=True).T
    return linalg.solve_triangular(lower, (d - u_qr @ dl.T).T, lower=True).T
