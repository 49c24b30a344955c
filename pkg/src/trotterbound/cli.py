"""Batch command-line front end.

Each invocation runs one job described by a JSON config: build a model,
compute an exact or Monte Carlo norm, evaluate exact Trotter error,
assemble bounds, or run a population-bias sweep.  Reports are written as
JSON (plus CSV time series for stochastic runs) into the output
directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__, fciqmc, fermion_ops, trotter_bounds
from .commutators import make_engine
from .determinants import SectorSpec, half_filling_sector
from .errors import (
    ApplicabilityError,
    CapacityError,
    ConvergenceError,
    ValidationError,
)
from .exact_oracle import (
    TrotterErrorCalculator,
    build_sector_matrix,
    spectral_norm,
)
from .hamiltonians import BUILDERS

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3
EXIT_CONVERGENCE = 4
EXIT_OTHER = 5

# Table of benchmark systems: label -> (builder, params, quoted norms).
# Quoted values are (signed, absolute) for each commutator.
TABLE1_ROWS = [
    ("extended_hubbard_1d N=6",
     "extended_hubbard_1d",
     {"n_sites": 6, "tau": 1.0, "u": 4.0, "v": 2.0, "periodic": True},
     {"vtv": (102.692, 102.692), "vtt": (80.77, 115.93)}),
    ("extended_hubbard_1d N=8",
     "extended_hubbard_1d",
     {"n_sites": 8, "tau": 1.0, "u": 4.0, "v": 2.0, "periodic": True},
     {"vtv": (135.041, 135.066), "vtt": (123.75, 145.21)}),
    ("extended_hubbard_1d N=10",
     "extended_hubbard_1d",
     {"n_sites": 10, "tau": 1.0, "u": 4.0, "v": 2.0, "periodic": True},
     {"vtv": (167.209, 167.209), "vtt": (143.49, 171.31)}),
    ("extended_hubbard_hexagonal 2x2",
     "extended_hubbard_hexagonal",
     {"cells_x": 2, "cells_y": 2, "tau": 1.0, "u": 4.0, "v": 2.0},
     {"vtv": (376.737, 377.904)}),
    ("ppp_acene benzene",
     "ppp_acene",
     {"n_rings": 1},
     {"vtv": (535.593, 535.593), "vtt": (775.09, 943.45)}),
    ("ppp_acene napthalene",
     "ppp_acene",
     {"n_rings": 2},
     {"vtv": (2430.378, 2430.387), "vtt": (1780.2, 2077.6)}),
    ("ueg 2x2",
     "ueg_dual_plane_wave",
     {"dim": 2, "grid_side": 2, "r_s": 10.0, "n_electrons": 4},
     {"vtv": (0.04689, 0.04700), "vtt": (0.00145, 0.00171)}),
    ("ueg 2x2x2",
     "ueg_dual_plane_wave",
     {"dim": 3, "grid_side": 2, "r_s": 10.0, "n_electrons": 8},
     {"vtv": (4.435e-4, 4.437e-4), "vtt": (2.8e-4, 4.2e-4)}),
]


def build_system(block):
    if not isinstance(block, dict) or "builder" not in block:
        raise ValidationError("system block must contain a builder name")
    name = block["builder"]
    if name not in BUILDERS:
        raise ValidationError(f"unknown builder {name!r}")
    try:
        return BUILDERS[name](**block.get("params", {}))
    except TypeError as exc:
        raise ValidationError(f"bad builder parameters: {exc}") from exc


def resolve_sector(block, hamiltonian):
    if block == "half-filling" or block is None:
        if hamiltonian.n_spatial % 2:
            raise ValidationError(
                "half-filling keyword requires an even number of sites"
            )
        return half_filling_sector(hamiltonian.n_spatial)
    if isinstance(block, dict) and "n_up" in block and "n_down" in block:
        sector = SectorSpec(int(block["n_up"]), int(block["n_down"]))
        sector.validate(hamiltonian.n_spatial)
        return sector
    raise ValidationError("sector must be 'half-filling' or {n_up, n_down}")


def _write_report(out_dir, doc):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=float)
        fh.write("\n")
    return path


def _base_report(spec, extra):
    doc = {"version": __version__, "config": spec}
    doc.update(extra)
    return doc


def _engine_and_sector(spec, h):
    op = spec.get("operator", "vtv")
    if op not in ("vtv", "vtt"):
        raise ValidationError("operator must be vtv or vtt")
    return make_engine(op, h), resolve_sector(spec.get("sector"), h)


def job_build(spec, out_dir):
    h = build_system(spec["system"])
    return _base_report(spec, {"system": h.to_json_dict()})


def job_exact_norm(spec, out_dir):
    h = build_system(spec["system"])
    engine, sector = _engine_and_sector(spec, h)
    absolute = bool(spec.get("absolute", False))
    sm = build_sector_matrix(engine, sector, absolute=absolute)
    if spec.get("output", {}).get("matrix"):
        os.makedirs(out_dir, exist_ok=True)
        sm.dump_matrix_market(os.path.join(out_dir, "matrix.mtx"))
    value = spectral_norm(sm, tol=float(spec.get("tol", 1e-8)))
    return _base_report(spec, {
        "norm": value,
        "absolute": absolute,
        "sector_dimension": sm.dimension,
    })


def _run_config_from_spec(spec, seed, out_dir, overrides=None):
    block = dict(spec.get("fciqmc", {}))
    if overrides:
        block.update(overrides)
    block.setdefault("iterations", 4000)
    block.setdefault("vary_threshold", 5000.0)
    block.setdefault("seed", seed if seed is not None else 1)
    if "series_path" not in block and out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        block["series_path"] = os.path.join(out_dir, "series.csv")
    names = {f.name for f in dataclasses.fields(fciqmc.RunConfig)}
    unknown = set(block) - names
    if unknown:
        raise ValidationError(f"unknown fciqmc fields: {sorted(unknown)}")
    return fciqmc.RunConfig(**block)


def job_mc_norm(spec, out_dir, seed=None):
    h = build_system(spec["system"])
    engine, sector = _engine_and_sector(spec, h)
    config = _run_config_from_spec(spec, seed, out_dir)
    report = fciqmc.run(config, engine, sector)
    return _base_report(spec, report.to_json_dict())


def job_trotter_error(spec, out_dir):
    h = build_system(spec["system"])
    sector = resolve_sector(spec.get("sector"), h)
    block = spec.get("trotter", {})
    times = block.get("times") or [block.get("t", 0.01)]
    ordering = block.get("ordering", "VTV")
    calc = TrotterErrorCalculator(h, sector)
    values = [
        {"t": float(t), "error": calc.error(float(t), ordering)} for t in times
    ]
    return _base_report(spec, {"ordering": ordering, "errors": values})


def job_bounds(spec, out_dir):
    h = build_system(spec["system"])
    sector = resolve_sector(spec.get("sector"), h)
    tol = float(spec.get("tol", 1e-8))
    norms = {}
    for op in ("vtv", "vtt"):
        engine = make_engine(op, h)
        norms[op] = spectral_norm(build_sector_matrix(engine, sector), tol=tol)
        norms[op + "_abs"] = spectral_norm(
            build_sector_matrix(engine, sector, absolute=True), tol=tol
        )
    t_op, v_op = fermion_ops.from_hamiltonian(h)
    l1 = {
        "vtv": trotter_bounds.l1_bound(
            fermion_ops.commutator(fermion_ops.commutator(v_op, t_op), v_op)
        ),
        "vtt": trotter_bounds.l1_bound(
            fermion_ops.commutator(fermion_ops.commutator(v_op, t_op), t_op)
        ),
    }
    triangle = {}
    for which in ("VTT", "VTV"):
        try:
            triangle[which.lower()] = trotter_bounds.tighter_triangle_bound(
                h, which
            )
        except (ApplicabilityError, CapacityError) as exc:
            triangle[which.lower()] = {"unavailable": str(exc)}
    exact_inputs = trotter_bounds.NormInputs(
        norm_vtt=norms["vtt"], norm_vtv=norms["vtv"]
    )
    mc_inputs = trotter_bounds.NormInputs(
        norm_vtt=norms["vtt_abs"], norm_vtv=norms["vtv_abs"],
        vtt_source="mc_abs", vtv_source="mc_abs",
    )
    t = float(spec.get("trotter", {}).get("t", 1.0))
    eps = float(spec.get("trotter", {}).get("epsilon", 1e-3))
    w_vtv = trotter_bounds.trotter_error_norm(exact_inputs, "VTV")
    w_mc = trotter_bounds.trotter_error_norm(mc_inputs, "VTV")
    return _base_report(spec, {
        "norms": norms,
        "bounds": {
            "w_vtv": w_vtv,
            "w_tvt": trotter_bounds.trotter_error_norm(exact_inputs, "TVT"),
            "w_vtv_mc": w_mc,
            "l1": l1,
            "triangle": triangle,
            "r_steps": trotter_bounds.trotter_steps(w_mc, t, eps),
            "r_steps_t": t,
            "r_steps_epsilon": eps,
        },
    })


def job_bias_sweep(spec, out_dir, seed=None):
    h = build_system(spec["system"])
    engine, sector = _engine_and_sector(spec, h)
    sweep = spec.get("bias_sweep", {})
    populations = sweep.get("populations")
    if not populations or len(populations) < 4:
        raise ValidationError("bias_sweep.populations needs >= 4 targets")
    base_seed = seed if seed is not None else int(sweep.get("seed", 1))
    points = []
    runs = []
    for idx, pop in enumerate(populations):
        config = _run_config_from_spec(
            spec, base_seed + idx, None,
            overrides={"vary_threshold": float(pop), "series_path": None},
        )
        report = fciqmc.run(config, engine, sector)
        points.append(
            (report.mean_population, report.mixed_estimate, report.mixed_stderr)
        )
        runs.append(report.to_json_dict())
    a, b, c, a_err = fciqmc.extrapolate_population_bias(points)
    return _base_report(spec, {
        "fit": {"a": a, "b": b, "c": c, "a_stderr": a_err},
        "extrapolated_norm": -a,
        "points": [
            {"population": p, "estimate": y, "stderr": s} for p, y, s in points
        ],
        "runs": runs,
    })


def reproduce_table1(tol=1e-8):
    """Recompute every benchmark row; returns result rows with % errors."""
    results = []
    for label, builder, params, targets in TABLE1_ROWS:
        h = BUILDERS[builder](**params)
        sector = half_filling_sector(h.n_spatial)
        row = {"system": label}
        for op, (signed_ref, abs_ref) in targets.items():
            engine = make_engine(op, h)
            signed = spectral_norm(
                build_sector_matrix(engine, sector), tol=tol
            )
            absolute = spectral_norm(
                build_sector_matrix(engine, sector, absolute=True), tol=tol
            )
            row[op] = {
                "exact": signed,
                "mc_bound": absolute,
                "percent_error": 100.0 * (absolute - signed) / signed,
                "quoted_exact": signed_ref,
                "quoted_mc_bound": abs_ref,
            }
        results.append(row)
    return results


def _format_table1(rows):
    lines = [
        f"{'system':34s} {'op':4s} {'exact':>12s} {'MC bound':>12s} {'%err':>8s}"
    ]
    for row in rows:
        for op in ("vtv", "vtt"):
            if op not in row:
                continue
            r = row[op]
            lines.append(
                f"{row['system']:34s} {op:4s} {r['exact']:12.6g} "
                f"{r['mc_bound']:12.6g} {r['percent_error']:8.3f}"
            )
    return "\n".join(lines)


def job_table1(spec, out_dir):
    rows = reproduce_table1(tol=float(spec.get("tol", 1e-8)))
    print(_format_table1(rows))
    return _base_report(spec, {"table": rows})


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="trotterbound",
        description="Trotter error bounds for diagonal-Coulomb Hamiltonians",
    )
    parser.add_argument("command", choices=[
        "build", "exact-norm", "mc-norm", "trotter-error", "bounds",
        "bias-sweep", "table1",
    ])
    parser.add_argument("--config", help="job JSON path")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1,
                        help="1 selects the deterministic path (default)")
    parser.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)

    if args.threads != 1:
        print("note: only the single-threaded deterministic path is "
              "implemented; continuing with 1 thread", file=sys.stderr)

    try:
        if args.command == "table1":
            spec = _load_config(args.config) if args.config else {}
            doc = job_table1(spec, args.out)
        else:
            if not args.config:
                raise ValidationError(f"{args.command} requires --config")
            spec = _load_config(args.config)
            if "system" not in spec:
                raise ValidationError("config must contain a system block")
            if args.command == "build":
                doc = job_build(spec, args.out)
            elif args.command == "exact-norm":
                doc = job_exact_norm(spec, args.out)
            elif args.command == "mc-norm":
                doc = job_mc_norm(spec, args.out, seed=args.seed)
            elif args.command == "trotter-error":
                doc = job_trotter_error(spec, args.out)
            elif args.command == "bounds":
                doc = job_bounds(spec, args.out)
            else:
                doc = job_bias_sweep(spec, args.out, seed=args.seed)
        path = _write_report(args.out, doc)
        print(f"report written to {path}")
        return EXIT_OK
    except ValidationError as exc:
        code = EXIT_VALIDATION
        err = exc
    except CapacityError as exc:
        code = EXIT_CAPACITY
        err = exc
    except ConvergenceError as exc:
        code = EXIT_CONVERGENCE
        err = exc
    except Exception as exc:  # noqa: BLE001 - map to machine-readable failure
        code = EXIT_OTHER
        err = exc
    _write_report(args.out, {
        "version": __version__,
        "error": {"type": type(err).__name__, "message": str(err)},
        "exit_code": code,
    })
    print(f"error: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
