"""Independent checks: finite differences, a dense eigensolver oracle,
retraction bound audits and per-term Hessian reports."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .manifold import (gram, inner, orbital_norm, project_tangent, random_frame,
                       geodesic_from_direction, _as_block)
from .models import EnergyModel, HessianTerms
from .retraction import RetractionKind, ortho, retraction_derivative

FD_GRADIENT_STEP = 1e-5
FD_HESSIAN_STEP = 1e-3
DISPLACEMENT_CONSTANT = 2.0
DERIVATIVE_CONSTANT = 1.0 + math.sqrt(2.0)
DEFAULT_TAU_GRID = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0)
MAX_ORACLE_SIZE = 500


@dataclass(frozen=True)
class BoundAudit:
    samples: int
    max_ratio: float
    violations: int
    constant: float = float("nan")

    @property
    def passed(self) -> bool:
        return self.violations == 0


def fd_gradient_check(model: EnergyModel, u, trials: int = 5, step: float = FD_GRADIENT_STEP,
                      rng=None) -> float:
    """Worst relative error between central differences of ``E`` along
    random ambient directions and ``tr(gram(grad E, Xi))``."""
    rng = np.random.default_rng(rng)
    u = _as_block(u)
    h = model.weight
    g = model.ambient_gradient(u)
    worst = 0.0
    for _ in range(trials):
        xi = rng.standard_normal(u.shape)
        xi /= orbital_norm(xi, h)
        fd = (model.energy(u + step * xi) - model.energy(u - step * xi)) / (2 * step)
        an = inner(g, xi, h)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-300))
    return worst


def fd_hessian_check(model: EnergyModel, u, d, step: float = FD_HESSIAN_STEP,
                     mode: str = "exact") -> float:
    """Relative error between the second central difference of ``E`` along the
    geodesic with initial velocity ``d`` and the Hessian form ``Hess[d, d]``."""
    u, d = _as_block(u), _as_block(d)
    curve = geodesic_from_direction(u, d, model.weight)
    e0 = model.energy(u)
    second = (model.energy(curve(step)) - 2.0 * e0 + model.energy(curve(-step))) / step**2
    form = model.hessian_form(u, d, d, mode=mode)
    return abs(second - form) / max(abs(form), 1e-300)


def dense_eigen_oracle(matrix, n_orb: int):
    """Ground truth for the quadratic model: ``(1/2 sum of the N smallest
    eigenvalues, their eigenvectors)``."""
    a = np.asarray(matrix, dtype=float)
    if not 1 <= n_orb <= a.shape[0] <= MAX_ORACLE_SIZE:
        raise ValueError(f"oracle needs 1 <= N <= N_g <= {MAX_ORACLE_SIZE}")
    lam, vec = np.linalg.eigh(0.5 * (a + a.T))
    return 0.5 * float(lam[:n_orb].sum()), vec[:, :n_orb], lam


def random_tangent_pair(n_grid: int, n_orb: int, rng, h: float = 1.0, scale: float = 1.0):
    u = random_frame(n_grid, n_orb, rng, h)
    d = project_tangent(u, rng.standard_normal((n_grid, n_orb)), h)
    d = d * (scale * rng.uniform(0.1, 2.0) / orbital_norm(d, h))
    return u, d


def audit_retraction_bounds(kind, samples: int = 200, tau_grid=DEFAULT_TAU_GRID,
                            n_grid: int = 20, n_orb: int = 4, rng=0, rel_tol: float = 1e-9,
                            deriv_tol: float = 1e-6, h: float = 1.0):
    """Check ``||R(tau) - U|| <= 2 tau ||D||`` and
    ``||R'(tau) - D|| <= (1 + sqrt 2) tau ||D||^2`` on random samples.

    Returns ``(displacement_audit, derivative_audit)``.
    """
    rng = np.random.default_rng(rng)
    kind = RetractionKind(kind)
    disp_ratio = der_ratio = 0.0
    disp_bad = der_bad = count = 0
    for _ in range(samples):
        u, d = random_tangent_pair(n_grid, n_orb, rng, h)
        nd = orbital_norm(d, h)
        for tau in tau_grid:
            count += 1
            disp = orbital_norm(ortho(kind, u, d, tau, h) - u, h)
            bound = DISPLACEMENT_CONSTANT * tau * nd
            disp_ratio = max(disp_ratio, disp / bound)
            disp_bad += disp > bound * (1 + rel_tol)
            der = orbital_norm(retraction_derivative(kind, u, d, tau, h) - d, h)
            bound = DERIVATIVE_CONSTANT * tau * nd**2
            der_ratio = max(der_ratio, der / bound)
            der_bad += der > bound * (1 + deriv_tol)
    return (BoundAudit(count, disp_ratio, int(disp_bad), DISPLACEMENT_CONSTANT),
            BoundAudit(count, der_ratio, int(der_bad), DERIVATIVE_CONSTANT))


def derivative_fd_error(kind, u, d, tau: float, step: float = 1e-6, h: float = 1.0) -> float:
    """Relative gap between the analytic retraction derivative and a central
    difference in ``tau``."""
    an = retraction_derivative(kind, u, d, tau, h)
    lo = max(tau - step, 0.0)
    fd = (ortho(kind, u, d, tau + step, h) - ortho(kind, u, d, lo, h)) / (tau + step - lo)
    return orbital_norm(fd - an, h) / max(orbital_norm(an, h), 1e-300)


def gram_spectrum_bounds(u, d, tau: float, h: float = 1.0):
    """Eigenvalues of ``gram(U + tau D, U + tau D)`` and the interval
    ``[1, 1 + tau^2 ||D||^2]`` that must contain them."""
    ut = _as_block(u) + tau * _as_block(d)
    lam = np.linalg.eigvalsh(gram(ut, ut, h))
    return lam, (1.0, 1.0 + tau**2 * orbital_norm(d, h) ** 2)


def lipschitz_estimate(model: EnergyModel, n_orb: int, pairs: int = 1000, rng=0,
                       spread: float = 0.1) -> float:
    """Empirical max of ``||grad E(U) - grad E(V)|| / ||U - V||`` over random
    nearby frame pairs."""
    rng = np.random.default_rng(rng)
    h = model.weight
    n_grid = model.geometry.num_points
    worst = 0.0
    for _ in range(pairs):
        u = random_frame(n_grid, n_orb, rng, h)
        v = ortho(RetractionKind.QR, u,
                  project_tangent(u, spread * rng.standard_normal(u.shape), h), 1.0, h)
        du = orbital_norm(u - v, h)
        if du == 0:
            continue
        worst = max(worst, orbital_norm(model.ambient_gradient(u) - model.ambient_gradient(v), h) / du)
    return worst


def hessian_term_report(trace) -> list[dict]:
    """Per-iteration Hessian term magnitudes from a solver trace."""
    rows = []
    for rec in trace:
        t = rec.hessian_terms
        if t is None:
            continue
        rows.append({
            "iter": rec.index,
            "main": t.main,
            "hartree": t.hartree,
            "xc": t.xc,
            "ratio": abs(t.hartree + t.xc) / abs(t.main) if t.main != 0 else math.inf,
        })
    return rows


def hessian_terms_along(model: EnergyModel, states, directions) -> list[HessianTerms]:
    return [model.hessian_form_exact(u, d, d) for u, d in zip(states, directions)]


def rows_to_csv(rows, columns=None) -> str:
    buf = io.StringIO()
    if not rows:
        if columns:
            csv.writer(buf).writerow(columns)
        return buf.getvalue()
    columns = columns or list(rows[0])
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in columns})
    return buf.getvalue()
