"""Energy models: the interface used by the solver and two concrete models.

Every model exposes an effective Hamiltonian ``H`` such that the ambient
gradient is ``grad E(U) = H(rho) U`` in the weighted inner product.  The
Grassmann Hessian is then

    Hess[V, W] = tr(V^T H W) - tr(V^T W Sigma) + (density-coupling terms),

with ``Sigma = gram(U, grad E(U))``.  The first two terms are the
"approximate" Hessian used by the step-size rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import GridGeometry, gram, inner, orbital_norm, _as_block

DEFAULT_XC_COEFFICIENT = 0.7386
DEFAULT_DENSITY_FLOOR = 1e-12
# (depth, center, width) of each Gaussian well
DEFAULT_WELLS = ((5.0, 3.5, 1.0), (5.0, 6.5, 1.0))


@dataclass(frozen=True)
class HessianTerms:
    main: float
    hartree: float = 0.0
    xc: float = 0.0

    @property
    def exact(self) -> float:
        return self.main + self.hartree + self.xc

    @property
    def approx(self) -> float:
        return self.main


@dataclass(frozen=True)
class GradientRecord:
    """Ambient gradient, its Lagrange multiplier and the Grassmann gradient."""

    ambient: np.ndarray
    sigma: np.ndarray
    grassmann: np.ndarray
    residual: float


class EnergyModel:
    """Base class; subclasses implement ``energy`` and ``apply_hamiltonian``."""

    geometry: GridGeometry

    @property
    def weight(self) -> float:
        return self.geometry.weight

    def energy(self, u) -> float:
        raise NotImplementedError

    def apply_hamiltonian(self, u, w) -> np.ndarray:
        """``H(rho(u)) @ w``."""
        raise NotImplementedError

    def ambient_gradient(self, u) -> np.ndarray:
        u = _as_block(u)
        return self.apply_hamiltonian(u, u)

    def gradient(self, u) -> GradientRecord:
        u = _as_block(u)
        g = self.ambient_gradient(u)
        sigma = gram(u, g, self.weight)
        sigma = 0.5 * (sigma + sigma.T)
        gg = g - u @ sigma
        return GradientRecord(g, sigma, gg, orbital_norm(gg, self.weight))

    def grassmann_gradient(self, u) -> np.ndarray:
        return self.gradient(u).grassmann

    def hessian_form_approx(self, u, v, w, sigma=None) -> float:
        u, v, w = _as_block(u), _as_block(v), _as_block(w)
        if sigma is None:
            sigma = self.gradient(u).sigma
        h = self.weight
        return inner(v, self.apply_hamiltonian(u, w), h) - float(np.trace(gram(v, w, h) @ sigma))

    def density_terms(self, u, v, w) -> tuple[float, float]:
        """(hartree, xc) second-derivative couplings; zero for linear models."""
        return 0.0, 0.0

    def hessian_form_exact(self, u, v, w, sigma=None) -> HessianTerms:
        main = self.hessian_form_approx(u, v, w, sigma)
        hartree, xc = self.density_terms(_as_block(u), _as_block(v), _as_block(w))
        return HessianTerms(main, hartree, xc)

    def hessian_form(self, u, v, w, mode="approximate", sigma=None) -> float:
        if mode == "exact":
            return self.hessian_form_exact(u, v, w, sigma).exact
        return self.hessian_form_approx(u, v, w, sigma)


class QuadraticModel(EnergyModel):
    """``E(U) = 1/2 tr(gram(U, A U))`` for a symmetric matrix ``A``."""

    def __init__(self, matrix, weight: float = 1.0, sym_tol: float = 1e-12):
        a = np.array(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        asym = np.linalg.norm(a - a.T)
        if asym > sym_tol * max(1.0, np.linalg.norm(a)):
            raise ValueError(f"matrix is not symmetric (||A - A^T|| = {asym:.3e})")
        self.matrix = 0.5 * (a + a.T)
        self.geometry = GridGeometry(a.shape[0], weight)

    @classmethod
    def diagonal(cls, values, weight: float = 1.0):
        return cls(np.diag(np.asarray(values, dtype=float)), weight)

    @classmethod
    def random_symmetric(cls, n: int, seed: int = 0, min_gap: float | None = None,
                         n_orb: int | None = None):
        """Random symmetric matrix; with ``min_gap`` the eigenvalue gap after
        index ``n_orb`` is widened to at least ``min_gap``."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, n))
        a = 0.5 * (x + x.T)
        if min_gap is not None and n_orb is not None and n_orb < n:
            lam, p = np.linalg.eigh(a)
            gap = lam[n_orb] - lam[n_orb - 1]
            if gap < min_gap:
                lam[n_orb:] += min_gap - gap
            a = (p * lam) @ p.T
            a = 0.5 * (a + a.T)
        return cls(a)

    def energy(self, u) -> float:
        u = _as_block(u)
        return 0.5 * inner(u, self.matrix @ u, self.weight)

    def apply_hamiltonian(self, u, w) -> np.ndarray:
        return self.matrix @ _as_block(w)


def soft_coulomb_kernel(x, h: float) -> np.ndarray:
    dx = x[:, None] - x[None, :]
    return h / np.sqrt(1.0 + dx**2)


def gaussian_wells(x, wells) -> np.ndarray:
    v = np.zeros_like(x)
    for depth, center, width in wells:
        v -= depth * np.exp(-0.5 * ((x - center) / width) ** 2)
    return v


class ToyKohnShamModel(EnergyModel):
    """1-D finite-difference Kohn-Sham-like functional.

    E(U) = 1/2 tr(gram(U, L U)) + tr(gram(U, v_ext U))
           + 1/2 <rho, K rho>_h + h sum_k f(rho_k),     f(rho) = -c_x rho^{4/3}

    where ``L`` is the 3-point discrete ``-Laplacian`` with Dirichlet ends,
    ``K`` a soft-Coulomb kernel and ``rho_k = sum_i U[k, i]^2``.
    """

    def __init__(self, n_grid: int, box_length: float = 10.0, wells=DEFAULT_WELLS,
                 xc_coefficient: float = DEFAULT_XC_COEFFICIENT,
                 density_floor: float = DEFAULT_DENSITY_FLOOR, v_ext=None):
        if n_grid < 3:
            raise ValueError("toy Kohn-Sham model needs at least 3 grid points")
        if not xc_coefficient > 0 or not density_floor > 0:
            raise ValueError("xc_coefficient and density_floor must be positive")
        h = box_length / (n_grid + 1)
        self.geometry = GridGeometry(n_grid, h)
        self.box_length = float(box_length)
        self.x = h * np.arange(1, n_grid + 1)
        self.laplacian = (np.diag(np.full(n_grid, 2.0))
                          - np.diag(np.ones(n_grid - 1), 1)
                          - np.diag(np.ones(n_grid - 1), -1)) / h**2
        self.wells = tuple(tuple(map(float, w)) for w in wells)
        self.v_ext = (np.asarray(v_ext, dtype=float) if v_ext is not None
                      else gaussian_wells(self.x, self.wells))
        self.hartree_kernel = soft_coulomb_kernel(self.x, h)
        self.xc_coefficient = float(xc_coefficient)
        self.density_floor = float(density_floor)
        if n_grid <= 256:
            lam_min = np.linalg.eigvalsh(self.hartree_kernel)[0]
            if lam_min < -1e-10 * np.abs(self.hartree_kernel).max():
                raise ValueError(f"Hartree kernel is not PSD (min eig {lam_min:.3e})")

    def density(self, u) -> np.ndarray:
        u = _as_block(u)
        return np.einsum("ki,ki->k", u, u)

    def _f(self, rho):
        return -self.xc_coefficient * rho ** (4.0 / 3.0)

    def _df(self, rho):
        return -(4.0 / 3.0) * self.xc_coefficient * np.cbrt(rho)

    def _d2f(self, rho):
        return -(4.0 / 9.0) * self.xc_coefficient * (rho + self.density_floor) ** (-2.0 / 3.0)

    def potential(self, rho) -> np.ndarray:
        """Diagonal part of ``H``: ``2 (v_ext + K rho + f'(rho))``."""
        return 2.0 * (self.v_ext + self.hartree_kernel @ rho + self._df(rho))

    def energy(self, u) -> float:
        u = _as_block(u)
        h = self.weight
        rho = self.density(u)
        kinetic = 0.5 * inner(u, self.laplacian @ u, h)
        external = h * float(self.v_ext @ rho)
        hartree = 0.5 * h * float(rho @ (self.hartree_kernel @ rho))
        xc = h * float(np.sum(self._f(rho)))
        return kinetic + external + hartree + xc

    def energy_terms(self, u) -> dict:
        u = _as_block(u)
        h = self.weight
        rho = self.density(u)
        return {
            "kinetic": 0.5 * inner(u, self.laplacian @ u, h),
            "external": h * float(self.v_ext @ rho),
            "hartree": 0.5 * h * float(rho @ (self.hartree_kernel @ rho)),
            "xc": h * float(np.sum(self._f(rho))),
        }

    def apply_hamiltonian(self, u, w) -> np.ndarray:
        w = _as_block(w)
        pot = self.potential(self.density(u))
        return self.laplacian @ w + pot[:, None] * w

    def density_terms(self, u, v, w):
        h = self.weight
        p = np.einsum("ki,ki->k", u, v)
        q = np.einsum("ki,ki->k", u, w)
        hartree = 4.0 * h * float(p @ (self.hartree_kernel @ q))
        xc = 4.0 * h * float(np.sum(self._d2f(self.density(u)) * p * q))
        return hartree, xc
