"""Command line entry point: ``grassmann-cg run|check|oracle``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import diagnostics as diag
from .experiment import SpecError, compare_table, load_matrix, load_spec, run_experiment
from .manifold import random_frame
from .models import QuadraticModel, ToyKohnShamModel
from .retraction import RetractionKind
from .solver import SolverConfig, solve

EXIT_OK, EXIT_ABORT, EXIT_PARSE = 0, 1, 2


def _cmd_run(args) -> int:
    try:
        spec = load_spec(args.spec)
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.seed is not None:
        spec.seed = args.seed
    try:
        summary = run_experiment(spec, out_dir=args.out_dir, max_iter=args.max_iter)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    print(compare_table(summary))
    aborted = [v["name"] for v in summary["variants"]
               if v["status"] not in ("converged", "max_iter")]
    if aborted:
        print(f"aborted: {', '.join(aborted)}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def run_checks(seed: int = 0, samples: int = 100) -> list[tuple[str, bool, str]]:
    """Fast diagnostics suite; returns ``(name, passed, detail)`` rows."""
    rng = np.random.default_rng(seed)
    rows = []

    quad = QuadraticModel.random_symmetric(16, seed=seed, min_gap=0.1, n_orb=3)
    toy = ToyKohnShamModel(32)
    for name, model, tol in (("quadratic", quad, 1e-9), ("toy_ks", toy, 1e-6)):
        u = random_frame(model.geometry.num_points, 3, rng, model.weight)
        err = diag.fd_gradient_check(model, u, trials=5, rng=rng)
        rows.append((f"fd_gradient[{name}]", err <= tol, f"max rel err {err:.2e} (tol {tol:g})"))
        _, d = diag.random_tangent_pair(model.geometry.num_points, 3, rng, model.weight)
        d = d / diag.orbital_norm(d, model.weight)
        err = diag.fd_hessian_check(model, u, d)
        rows.append((f"fd_hessian[{name}]", err <= 1e-4, f"rel err {err:.2e} (tol 1e-4)"))

    for kind in RetractionKind:
        disp, der = diag.audit_retraction_bounds(kind, samples=samples, rng=rng)
        rows.append((f"displacement_bound[{kind.value}]", disp.passed,
                     f"max ratio {disp.max_ratio:.3f}, violations {disp.violations}"))
        rows.append((f"derivative_bound[{kind.value}]", der.passed,
                     f"max ratio {der.max_ratio:.3f}, violations {der.violations}"))

    e_star, _, _ = diag.dense_eigen_oracle(quad.matrix, 3)
    res = solve(quad, random_frame(16, 3, rng), SolverConfig(epsilon=1e-10, max_iter=160))
    gap = abs(res.final_energy - e_star)
    rows.append(("oracle_equivalence[quadratic]", res.converged and gap <= 1e-8,
                 f"|E - E*| = {gap:.2e}, {res.iterations} iterations"))
    return rows


def _cmd_check(args) -> int:
    rows = run_checks(seed=args.seed if args.seed is not None else 0)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<32} {detail}")
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_ABORT


def _cmd_oracle(args) -> int:
    try:
        a = load_matrix(args.matrix)
        e_star, _, lam = diag.dense_eigen_oracle(a, args.n)
    except (SpecError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    print(json.dumps({"min_energy": e_star, "eigenvalues": lam[: args.n + 1].tolist()}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grassmann-cg",
                                description="Conjugate gradient on the Grassmann manifold.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment spec")
    r.add_argument("spec")
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir")
    r.add_argument("--max-iter", type=int)
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("check", help="run the diagnostics suite")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=_cmd_check)

    o = sub.add_parser("oracle", help="dense eigensolver ground truth for a matrix file")
    o.add_argument("matrix")
    o.add_argument("n", type=int)
    o.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
