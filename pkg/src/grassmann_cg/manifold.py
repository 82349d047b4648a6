"""Weighted Stiefel/Grassmann geometry on a uniform grid.

Orbital blocks are plain ``(n_grid, n_orb)`` numpy arrays.  The discrete
inner product carries one scalar weight ``h`` (the product of mesh sizes),
so ``gram(A, B) = h * A.T @ B``.  With ``h = 1`` everything reduces to the
ordinary matrix case.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-10
TANGENT_TOL = 1e-10


@dataclass(frozen=True)
class GridGeometry:
    num_points: int
    weight: float = 1.0

    def __post_init__(self):
        if self.num_points < 1:
            raise ValueError(f"num_points must be >= 1, got {self.num_points}")
        if not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class OrbitalSet:
    """A column-orthonormal frame, i.e. a representative of a Grassmann point."""

    data: np.ndarray
    geometry: GridGeometry
    tol: float = field(default=ORTHO_TOL, compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        n_grid, n_orb = data.shape
        if n_grid != self.geometry.num_points:
            raise ValueError(
                f"block has {n_grid} rows, geometry has {self.geometry.num_points}")
        if not 1 <= n_orb <= n_grid:
            raise ValueError(f"need 1 <= N <= N_g, got N={n_orb}, N_g={n_grid}")
        err = orthonormality_error(data, self.geometry.weight)
        if err > self.tol:
            raise ValueError(f"frame is not orthonormal (error {err:.3e})")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def weight(self):
        return self.geometry.weight


@dataclass(frozen=True)
class AlignmentResult:
    distance: float
    rotation: np.ndarray
    singular_values: np.ndarray


def _as_block(x) -> np.ndarray:
    if isinstance(x, OrbitalSet):
        return x.data
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def _weight_of(*args, h=None) -> float:
    if h is not None:
        return float(h)
    for a in args:
        if isinstance(a, OrbitalSet):
            return a.weight
    return 1.0


def gram(psi, phi, h: float | None = None) -> np.ndarray:
    """Weighted Gram matrix ``h * psi.T @ phi``."""
    w = _weight_of(psi, phi, h=h)
    a, b = _as_block(psi), _as_block(phi)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch: {a.shape} vs {b.shape}")
    if isinstance(psi, OrbitalSet) and isinstance(phi, OrbitalSet):
        if psi.geometry != phi.geometry:
            raise ValueError("geometry mismatch")
    return w * (a.T @ b)


def inner(psi, phi, h: float | None = None) -> float:
    """Trace inner product ``tr(gram(psi, phi))``."""
    w = _weight_of(psi, phi, h=h)
    a, b = _as_block(psi), _as_block(phi)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(w * np.vdot(a, b))


def orbital_norm(psi, h: float | None = None) -> float:
    w = _weight_of(psi, h=h)
    return float(np.sqrt(w) * np.linalg.norm(_as_block(psi)))


def orthonormality_error(u, h: float | None = None) -> float:
    """Frobenius distance of ``gram(u, u)`` from the identity."""
    g = gram(u, u, h)
    return float(np.linalg.norm(g - np.eye(g.shape[0])))


def project_tangent(u, f, h: float | None = None) -> np.ndarray:
    """Remove from ``f`` its component in span(u): ``f - u gram(u, f)``."""
    a, b = _as_block(u), _as_block(f)
    return b - a @ gram(a, b, _weight_of(u, f, h=h))


def orthonormalize(x, h: float = 1.0) -> np.ndarray:
    """Weighted orthonormal basis of span(x) via thin QR."""
    q, r = np.linalg.qr(_as_block(x))
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    return q / np.sqrt(h)


def random_frame(n_grid: int, n_orb: int, rng=None, h: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return orthonormalize(rng.standard_normal((n_grid, n_orb)), h)


def grassmann_distance(psi, phi, h: float | None = None) -> AlignmentResult:
    """Distance between [psi] and [phi] with the optimal aligning rotation.

    With ``gram(psi, phi) = A S B^T`` the rotation ``P0 = B A^T`` minimizes
    ``||psi - phi Q||`` over orthogonal ``Q``; the minimum squared distance
    is ``2N - 2 sum(S)``.
    """
    w = _weight_of(psi, phi, h=h)
    a, b = _as_block(psi), _as_block(phi)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    left, s, right_t = np.linalg.svd(gram(a, b, w))
    p0 = right_t.T @ left.T
    direct = orbital_norm(a - b @ p0, w)
    return AlignmentResult(distance=direct, rotation=p0, singular_values=s)


def _complete_columns(base: np.ndarray, cols: np.ndarray, missing, h: float):
    """Fill columns ``missing`` of ``cols`` with unit vectors orthogonal to
    ``base`` and to the remaining columns (Gram-Schmidt on coordinate axes)."""
    n_grid = base.shape[0]
    out = cols.copy()
    missing = list(missing)
    have = [j for j in range(cols.shape[1]) if j not in missing]
    for j in missing:
        against = np.hstack([base, out[:, have]])
        for k in range(n_grid):
            v = np.zeros(n_grid)
            v[k] = 1.0 / np.sqrt(h)
            for _ in range(2):
                v = v - against @ (h * (against.T @ v))
            nv = np.sqrt(h) * np.linalg.norm(v)
            if nv > 1e-6:
                out[:, j] = v / nv
                have.append(j)
                break
        else:
            raise ValueError("no orthogonal complement available (N_g too small)")
    return out


@dataclass(frozen=True)
class GeodesicCurve:
    """``gamma(t) = base A cos(Theta t) + A2 sin(Theta t)``."""

    base: np.ndarray
    rotation: np.ndarray
    angles: np.ndarray
    complement: np.ndarray
    weight: float = 1.0

    def __call__(self, t: float) -> np.ndarray:
        return (self.base @ self.rotation * np.cos(self.angles * t)
                + self.complement * np.sin(self.angles * t))

    def derivative(self, t: float) -> np.ndarray:
        th = self.angles
        return (-self.base @ self.rotation * (th * np.sin(th * t))
                + self.complement * (th * np.cos(th * t)))


def geodesic_between(psi, phi, h: float | None = None) -> GeodesicCurve:
    """Curve on the Stiefel manifold from [psi] (t=0) to [phi] (t=1).

    Uses the SVD ``gram(psi, phi) = A S B^T``, angles ``arccos(S)`` and the
    complement ``A2`` with ``phi - psi gram(psi, phi) = A2 sin(Theta) B^T``.
    The curve satisfies ``gram(gamma, gamma') = 0`` and its distance to
    [psi] grows monotonically.
    """
    w = _weight_of(psi, phi, h=h)
    a, b = _as_block(psi), _as_block(phi)
    left, s, right_t = np.linalg.svd(gram(a, b, w))
    s = np.clip(s, 0.0, 1.0)
    theta = np.arccos(s)
    sin_t = np.sin(theta)
    resid = (b - a @ gram(a, b, w)) @ right_t.T
    comp = np.zeros_like(a)
    degenerate = []
    for j in range(a.shape[1]):
        if sin_t[j] > 1e-8:
            comp[:, j] = resid[:, j] / sin_t[j]
        else:
            theta[j] = 0.0
            degenerate.append(j)
    if degenerate:
        comp = _complete_columns(a, comp, degenerate, w)
    return GeodesicCurve(base=a, rotation=left, angles=theta, complement=comp, weight=w)


def geodesic_from_direction(u, d, h: float | None = None) -> GeodesicCurve:
    """Geodesic through ``u`` with initial velocity ``d`` (``d`` tangent at u).

    From the thin weighted SVD ``d = Q Sigma B^T``:
    ``gamma(t) = u B cos(Sigma t) B^T + Q sin(Sigma t) B^T``.  The returned
    curve is expressed in the rotated frame ``u B``; multiply by ``B^T`` to
    recover ``gamma(0) = u``.
    """
    w = _weight_of(u, d, h=h)
    a, dd = _as_block(u), _as_block(d)
    q, sig, right_t = np.linalg.svd(np.sqrt(w) * dd, full_matrices=False)
    q = q / np.sqrt(w)
    small = [j for j in range(sig.size) if sig[j] <= 1e-14 * max(1.0, sig.max())]
    if small:
        q = _complete_columns(a, q, small, w)
    return _RotatedGeodesic(base=a, rotation=right_t.T, angles=sig, complement=q,
                            weight=w, back=right_t)


@dataclass(frozen=True)
class _RotatedGeodesic(GeodesicCurve):
    back: np.ndarray = None

    def __call__(self, t: float) -> np.ndarray:
        return super().__call__(t) @ self.back

    def derivative(self, t: float) -> np.ndarray:
        return super().derivative(t) @ self.back
