"""Experiment specs (YAML), batch runs and comparison tables."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .diagnostics import hessian_term_report, rows_to_csv
from .manifold import random_frame
from .models import (DEFAULT_DENSITY_FLOOR, DEFAULT_XC_COEFFICIENT, DEFAULT_WELLS,
                     QuadraticModel, ToyKohnShamModel)
from .solver import SolverConfig, solve, solve_gradient_baseline

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iter", "energy", "residual", "tau", "beta", "backtracks", "restarted", "dg"]
HESSIAN_COLUMNS = ["iter", "main", "hartree", "xc", "ratio"]
EMIT_KINDS = ("trace_csv", "summary_json", "hessian_terms_csv")
METHODS = ("cg", "gradient")
_SOLVER_FIELDS = {f.name for f in fields(SolverConfig)}


class SpecError(ValueError):
    pass


@dataclass
class VariantSpec:
    name: str
    method: str
    config: SolverConfig


@dataclass
class ExperimentSpec:
    model: dict
    variants: list
    seed: int = 0
    output_dir: str | None = None
    emit: tuple = ("trace_csv", "summary_json")
    name: str = "experiment"
    source: dict = field(default_factory=dict, repr=False)


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SpecError(f"{where}: missing required field '{key}'")
    return mapping[key]


def _solver_config(raw: dict, where: str) -> SolverConfig:
    unknown = set(raw) - _SOLVER_FIELDS
    if unknown:
        raise SpecError(f"{where}: unknown solver field(s) {sorted(unknown)}")
    try:
        return SolverConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{where}: {exc}") from exc


def parse_spec(data: dict, base_dir: Path | None = None) -> ExperimentSpec:
    """Validate a loaded spec mapping."""
    if not isinstance(data, dict):
        raise SpecError("spec must be a mapping at top level")
    model = _require(data, "model", "spec")
    mtype = _require(model, "type", "model")
    if mtype not in ("quadratic", "toy_ks"):
        raise SpecError(f"model.type: expected 'quadratic' or 'toy_ks', got {mtype!r}")
    n_orb = _require(model, "n_orbitals", "model")
    if not isinstance(n_orb, int) or n_orb < 1:
        raise SpecError(f"model.n_orbitals: expected positive integer, got {n_orb!r}")
    model = dict(model)
    if mtype == "quadratic":
        sources = [k for k in ("diagonal", "random_symmetric", "matrix_file", "matrix") if k in model]
        if len(sources) != 1:
            raise SpecError("model: quadratic needs exactly one of diagonal, random_symmetric, "
                            "matrix_file, matrix")
        if "matrix_file" in model and base_dir is not None:
            model["matrix_file"] = str((base_dir / model["matrix_file"]).resolve())

    defaults = data.get("solver", {}) or {}
    raw_variants = data.get("variants")
    if not raw_variants:
        raise SpecError("variants: at least one variant is required")
    variants, seen = [], set()
    for i, raw in enumerate(raw_variants):
        where = f"variants[{i}]"
        raw = dict(raw)
        name = _require(raw, "name", where)
        if name in seen:
            raise SpecError(f"{where}.name: duplicate variant name {name!r}")
        seen.add(name)
        method = raw.pop("method", "cg")
        if method not in METHODS:
            raise SpecError(f"{where}.method: expected one of {METHODS}, got {method!r}")
        del raw["name"]
        variants.append(VariantSpec(name, method, _solver_config({**defaults, **raw}, where)))

    emit = tuple(data.get("emit", ("trace_csv", "summary_json")))
    bad = [e for e in emit if e not in EMIT_KINDS]
    if bad:
        raise SpecError(f"emit: unknown output kind(s) {bad}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise SpecError(f"seed: expected integer, got {seed!r}")
    return ExperimentSpec(model=model, variants=variants, seed=seed,
                          output_dir=data.get("output_dir"), emit=emit,
                          name=str(data.get("name", "experiment")), source=data)


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise SpecError(f"{path}: YAML syntax error{loc}: {getattr(exc, 'problem', exc)}") from exc
    try:
        return parse_spec(data, path.parent)
    except SpecError as exc:
        raise SpecError(f"{path}: {exc}") from exc


def load_matrix(path) -> np.ndarray:
    """Dense matrix from whitespace-separated rows."""
    a = np.loadtxt(path, ndmin=2)
    if a.shape[0] != a.shape[1]:
        raise SpecError(f"{path}: matrix must be square, got {a.shape}")
    return a


def build_model(model_spec: dict):
    mtype = model_spec["type"]
    try:
        if mtype == "quadratic":
            if "diagonal" in model_spec:
                return QuadraticModel.diagonal(model_spec["diagonal"])
            if "matrix" in model_spec:
                return QuadraticModel(model_spec["matrix"])
            if "matrix_file" in model_spec:
                return QuadraticModel(load_matrix(model_spec["matrix_file"]))
            rs = model_spec["random_symmetric"]
            return QuadraticModel.random_symmetric(
                int(_require(rs, "size", "model.random_symmetric")), seed=int(rs.get("seed", 0)),
                min_gap=rs.get("min_gap"), n_orb=model_spec["n_orbitals"])
        wells = model_spec.get("wells")
        wells = (DEFAULT_WELLS if wells is None
                 else [(w["depth"], w["center"], w["width"]) for w in wells])
        return ToyKohnShamModel(
            int(_require(model_spec, "n_grid", "model")),
            box_length=float(model_spec.get("box_length", 10.0)),
            wells=wells,
            xc_coefficient=float(model_spec.get("xc_coefficient", DEFAULT_XC_COEFFICIENT)),
            density_floor=float(model_spec.get("density_floor", DEFAULT_DENSITY_FLOOR)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"model: {exc}") from exc


def initial_frame(model, n_orb: int, seed: int) -> np.ndarray:
    """Seeded random orthonormal frame (QR of a Gaussian block)."""
    n_grid = model.geometry.num_points
    if n_orb > n_grid:
        raise SpecError(f"model.n_orbitals: {n_orb} exceeds grid size {n_grid}")
    return random_frame(n_grid, n_orb, np.random.default_rng(seed), model.weight)


def frame_digest(u) -> str:
    return hashlib.sha256(np.ascontiguousarray(u, dtype=float).tobytes()).hexdigest()


def trace_rows(result) -> list[dict]:
    return [{"iter": r.index, "energy": repr(r.energy), "residual": repr(r.residual),
             "tau": repr(r.tau), "beta": repr(r.beta), "backtracks": r.backtracks,
             "restarted": int(r.restarted), "dg": repr(r.dg)} for r in result.trace]


def run_experiment(spec: ExperimentSpec, out_dir=None, max_iter: int | None = None) -> dict:
    """Run every variant from one shared initial frame; write the requested
    outputs and return the summary mapping."""
    model = build_model(spec.model)
    n_orb = spec.model["n_orbitals"]
    u0 = initial_frame(model, n_orb, spec.seed)
    out = Path(out_dir or spec.output_dir) if (out_dir or spec.output_dir) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    summary = {"name": spec.name, "seed": spec.seed, "model": spec.model["type"],
               "n_grid": model.geometry.num_points, "n_orbitals": n_orb,
               "u0_sha256": frame_digest(u0), "variants": []}
    for v in spec.variants:
        cfg = v.config if max_iter is None else v.config.with_(max_iter=max_iter)
        runner = solve if v.method == "cg" else solve_gradient_baseline
        try:
            res = runner(model, u0, cfg)
        except Exception as exc:  # one variant's failure must not stop the others
            logger.exception("variant %s crashed", v.name)
            summary["variants"].append({
                "name": v.name, "final_energy": None, "iterations": None,
                "final_residual": None, "wall_seconds": None, "converged": False,
                "status": "error", "message": str(exc), "max_iter": cfg.max_iter})
            continue
        summary["variants"].append({
            "name": v.name, "final_energy": res.final_energy, "iterations": res.iterations,
            "final_residual": res.final_residual, "wall_seconds": res.wall_time,
            "converged": res.converged, "status": res.status, "message": res.message,
            "max_iter": cfg.max_iter})
        if out is not None:
            stem = v.name.replace("/", "_")
            if "trace_csv" in spec.emit:
                (out / f"{stem}_trace.csv").write_text(rows_to_csv(trace_rows(res), TRACE_COLUMNS))
            if "hessian_terms_csv" in spec.emit:
                (out / f"{stem}_hessian_terms.csv").write_text(
                    rows_to_csv(hessian_term_report(res.trace), HESSIAN_COLUMNS))
    if out is not None and "summary_json" in spec.emit:
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def compare_table(summary: dict) -> str:
    """Fixed-width table: algorithm, energy, iter, residual, wall time."""
    header = f"{'algorithm':<16} {'energy':>20} {'iter':>12} {'residual':>10} {'time (s)':>9}"
    lines = [header, "-" * len(header)]
    for v in summary["variants"]:
        if v["final_energy"] is None:
            lines.append(f"{v['name']:<16} {'error':>20} {'-':>12} {'-':>10} {'-':>9}")
            continue
        it = str(v["iterations"]) if v["converged"] else f"{v['iterations']}(fail)"
        lines.append(f"{v['name']:<16} {v['final_energy']:>20.12E} {it:>12} "
                     f"{v['final_residual']:>10.2E} {v['wall_seconds']:>9.2f}")
    return "\n".join(lines)
