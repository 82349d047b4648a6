"""Conjugate gradient energy minimization on the Grassmann manifold."""
from .manifold import (GridGeometry, OrbitalSet, gram, inner, orbital_norm, project_tangent,
                       grassmann_distance, geodesic_between, geodesic_from_direction,
                       random_frame, orthonormality_error)
from .retraction import RetractionKind, ortho, ortho_wy, ortho_qr, ortho_pd, retraction_derivative
from .models import EnergyModel, QuadraticModel, ToyKohnShamModel, HessianTerms
from .solver import (SolverConfig, SolveResult, IterationRecord, solve, solve_gradient_baseline,
                     hessian_step, backtrack, prp_beta, bb_step, restart_indicator)

__version__ = "0.1.0"
