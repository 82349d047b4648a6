"""Riemannian conjugate gradient on the Grassmann manifold.

The main loop (``solve``) combines

* a PRP conjugate parameter, optionally reset by the residual-stagnation
  restart indicator,
* a Hessian-based step size capped so that ``tau * ||D|| <= theta``, with
  optional Armijo backtracking,
* one of the WY / QR / PD retractions.

``solve_gradient_baseline`` runs the same loop with ``beta = 0`` and is
used for iteration-count comparisons.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .manifold import OrbitalSet, inner, orbital_norm, orthonormality_error, _as_block
from .models import EnergyModel, GradientRecord, HessianTerms
from .retraction import RetractionKind, ortho

logger = logging.getLogger(__name__)

MAX_BACKTRACKS = 50
BB_DENOM_FLOOR = 1e-16


class StepRule(str, Enum):
    HESSIAN = "hessian"
    BB = "bb"


class HessianMode(str, Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


class BetaRule(str, Enum):
    PRP = "prp"


class DegenerateDirectionError(ValueError):
    """The search direction is identically zero."""


class LineSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    retraction: RetractionKind = RetractionKind.QR
    epsilon: float = 1e-10
    theta: float = 0.8
    backtrack_t: float = 0.5
    backtrack_eta: float = 1e-4
    backtracking_enabled: bool = False
    restart_enabled: bool = False
    g_tol: float = 5e-3
    max_iter: int = 1000
    hessian_mode: HessianMode = HessianMode.APPROXIMATE
    project_direction: bool = False
    step_rule: StepRule = StepRule.HESSIAN
    beta_rule: BetaRule = BetaRule.PRP

    def __post_init__(self):
        object.__setattr__(self, "retraction", RetractionKind(self.retraction))
        object.__setattr__(self, "hessian_mode", HessianMode(self.hessian_mode))
        object.__setattr__(self, "step_rule", StepRule(self.step_rule))
        object.__setattr__(self, "beta_rule", BetaRule(self.beta_rule))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        for name in ("theta", "backtrack_t", "backtrack_eta", "g_tol"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {val}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class IterationRecord:
    index: int
    energy: float
    residual: float
    tau: float
    beta: float
    backtracks: int
    restarted: bool
    dg: float
    zeta: float
    slope: float
    direction_norm: float
    hessian_terms: HessianTerms | None = None
    ortho_error: float = 0.0


@dataclass
class SolveResult:
    final_orbitals: OrbitalSet
    final_energy: float
    final_residual: float
    converged: bool
    trace: list = field(default_factory=list)
    wall_time: float = 0.0
    status: str = "converged"
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def aborted(self) -> bool:
        return self.status not in ("converged", "max_iter")


def step_from_quadratic(slope: float, curvature: float, cap: float) -> float:
    """Minimizer of ``slope * tau + curvature * tau^2 / 2`` on ``(0, cap]``."""
    if curvature > 0:
        return min(-slope / curvature, cap)
    return cap


def _hessian_step(model, u, d, theta, mode, grad):
    d_norm = orbital_norm(d, model.weight)
    if d_norm == 0:
        raise DegenerateDirectionError("search direction is zero")
    slope = inner(grad.grassmann, d, model.weight)
    mode = HessianMode(mode)
    if mode is HessianMode.EXACT:
        terms = model.hessian_form_exact(u, d, d, grad.sigma)
        curvature = terms.exact
    else:
        terms = None
        curvature = model.hessian_form_approx(u, d, d, grad.sigma)
    return step_from_quadratic(slope, curvature, theta / d_norm), terms


def hessian_step(model: EnergyModel, u, d, theta: float = 0.8,
                 mode="approximate", grad: GradientRecord | None = None) -> float:
    """Hessian-based trial step ``tau~`` along ``d`` with ``tau~ ||d|| <= theta``."""
    u, d = _as_block(u), _as_block(d)
    if grad is None:
        grad = model.gradient(u)
    return _hessian_step(model, u, d, theta, mode, grad)[0]


def backtrack(model: EnergyModel, u, d, tau0: float, t: float = 0.5, eta: float = 1e-4,
              retraction=RetractionKind.QR, grad: GradientRecord | None = None,
              energy: float | None = None, max_backtracks: int = MAX_BACKTRACKS):
    """Armijo backtracking: smallest ``m >= 0`` with
    ``E(ortho(U, D, t^m tau0)) <= E(U) + eta t^m tau0 tr(grad_G^T D)``.

    Returns ``(tau, m, new_orbitals, new_energy)``; raises ``LineSearchError``
    once ``m`` exceeds ``max_backtracks``.
    """
    u, d = _as_block(u), _as_block(d)
    h = model.weight
    if grad is None:
        grad = model.gradient(u)
    e0 = model.energy(u) if energy is None else energy
    slope = inner(grad.grassmann, d, h)
    tau = tau0
    for m in range(max_backtracks + 1):
        u_new = ortho(retraction, u, d, tau, h)
        e_new = model.energy(u_new)
        if e_new <= e0 + eta * tau * slope:
            return tau, m, u_new, e_new
        tau *= t
    raise LineSearchError(f"no sufficient decrease after {max_backtracks} backtracks")


def prp_beta(g_n, g_prev, h: float = 1.0) -> float:
    """Polak-Ribiere-Polyak parameter ``tr((g_n - g_prev)^T g_n) / ||g_prev||^2``."""
    denom = orbital_norm(g_prev, h) ** 2
    if denom == 0:
        return 0.0
    g_n, g_prev = _as_block(g_n), _as_block(g_prev)
    return inner(g_n - g_prev, g_n, h) / denom


def bb_step(u_n, u_prev, g_n, g_prev, iteration: int = 0, fallback: float = 1.0,
            h: float = 1.0) -> float:
    """Barzilai-Borwein step; BB1 on even iterations, BB2 on odd ones."""
    s = _as_block(u_n) - _as_block(u_prev)
    y = _as_block(g_n) - _as_block(g_prev)
    sy = abs(inner(s, y, h))
    if iteration % 2 == 0:
        num, den = sy, inner(y, y, h)
    else:
        num, den = inner(s, s, h), sy
    if den < BB_DENOM_FLOOR:
        return fallback
    return num / den


def relative_change(residual: float, prev_residual: float) -> float:
    if prev_residual == 0:
        return 0.0
    return abs((residual - prev_residual) / prev_residual)


def restart_indicator(dg_window) -> float:
    """Mean of the last three relative residual changes (zero-padded)."""
    window = list(dg_window)[-3:]
    window = [0.0] * (3 - len(window)) + window
    return sum(window) / 3.0


class ResidualHistory:
    """Tracks ``dg_n`` and the restart indicator ``zeta_n``; starts from
    ``dg_{-1} = dg_0 = 0`` so ``zeta_0 = 0``."""

    def __init__(self):
        self.dg = [0.0, 0.0]
        self.last_residual = None
        self.zeta = 0.0

    def update(self, residual: float) -> float:
        if self.last_residual is not None:
            self.dg.append(relative_change(residual, self.last_residual))
            self.zeta = restart_indicator(self.dg)
        self.last_residual = residual
        return self.zeta

    @property
    def latest_dg(self) -> float:
        return self.dg[-1]


def choose_beta(g_n, g_prev, zeta: float, config: SolverConfig, conjugate: bool = True,
                h: float = 1.0):
    """Conjugate parameter and restart flag for one iteration."""
    restarted = config.restart_enabled and zeta < config.g_tol
    if not conjugate or g_prev is None or restarted:
        return 0.0, restarted
    return prp_beta(g_n, g_prev, h), False


def solve(model: EnergyModel, u0, config: SolverConfig | None = None) -> SolveResult:
    """Conjugate gradient (restarted when ``config.restart_enabled``)."""
    return _run(model, u0, config or SolverConfig(), conjugate=True)


def solve_gradient_baseline(model: EnergyModel, u0, config: SolverConfig | None = None) -> SolveResult:
    """Same loop with ``beta = 0`` throughout (projected gradient descent)."""
    return _run(model, u0, config or SolverConfig(), conjugate=False)


def _run(model, u0, config, conjugate):
    h = model.weight
    u = np.array(_as_block(u0), dtype=float)
    OrbitalSet(u, model.geometry, tol=1e-8)
    start = time.perf_counter()

    energy = model.energy(u)
    grad = model.gradient(u)
    f_prev = np.zeros_like(u)
    g_prev = None
    u_prev = u
    history = ResidualHistory()
    history.update(grad.residual)
    trace = []
    status, message = "max_iter", ""

    n = 0
    while True:
        if grad.residual <= config.epsilon:
            status = "converged"
            break
        if n >= config.max_iter:
            break

        zeta = history.zeta
        beta, restarted = choose_beta(grad.grassmann, g_prev, zeta, config, conjugate, h)

        f = -grad.grassmann + beta * f_prev
        d = f - u @ (h * (u.T @ f)) if config.project_direction else f
        slope = inner(grad.grassmann, d, h)
        if slope > 0:
            f, d, slope = -f, -d, -slope
        d_norm = orbital_norm(d, h)
        if d_norm == 0:
            # F_n in span(U_n): fall back to steepest descent
            beta, restarted = 0.0, True
            f = d = -grad.grassmann
            slope = inner(grad.grassmann, d, h)
            d_norm = orbital_norm(d, h)

        terms = None
        cap = config.theta / d_norm
        if config.step_rule is StepRule.HESSIAN or n == 0:
            tau, terms = _hessian_step(model, u, d, config.theta, config.hessian_mode, grad)
        else:
            tau = bb_step(u, u_prev, grad.grassmann, g_prev, n, fallback=cap, h=h)
            if config.hessian_mode is HessianMode.EXACT:
                terms = model.hessian_form_exact(u, d, d, grad.sigma)

        backtracks = 0
        try:
            if config.backtracking_enabled:
                tau, backtracks, u_new, e_new = backtrack(
                    model, u, d, tau, config.backtrack_t, config.backtrack_eta,
                    config.retraction, grad=grad, energy=energy)
            else:
                u_new = ortho(config.retraction, u, d, tau, h)
                e_new = model.energy(u_new)
        except LineSearchError as exc:
            status, message = "line_search_failed", str(exc)
            logger.warning("iteration %d: %s", n, exc)
            break

        trace.append(IterationRecord(
            index=n, energy=energy, residual=grad.residual, tau=tau, beta=beta,
            backtracks=backtracks, restarted=restarted, dg=history.latest_dg, zeta=zeta,
            slope=slope, direction_norm=d_norm, hessian_terms=terms,
            ortho_error=orthonormality_error(u, h)))

        if not math.isfinite(e_new):
            status, message = "non_finite", f"non-finite energy at iteration {n + 1}"
            logger.warning(message)
            break

        new_grad = model.gradient(u_new)
        history.update(new_grad.residual)

        u_prev, g_prev, f_prev = u, grad.grassmann, f
        u, grad, energy = u_new, new_grad, e_new
        n += 1
        logger.debug("iter %d  E=%.12e  res=%.3e  tau=%.3e", n, energy, grad.residual, tau)

    wall = time.perf_counter() - start
    if status == "max_iter":
        message = f"residual {grad.residual:.3e} > {config.epsilon:.1e} after {n} iterations"
    final = OrbitalSet(u, model.geometry, tol=max(1e-8, 10 * orthonormality_error(u, h)))
    return SolveResult(final_orbitals=final, final_energy=energy, final_residual=grad.residual,
                       converged=status == "converged", trace=trace, wall_time=wall,
                       status=status, message=message)
