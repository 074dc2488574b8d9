"""Command-line entry points.

Every command writes a JSON report (command, resolved config, results, pass
flags, timings, error record) into the output directory, alongside CSV
traces and BSF1 field snapshots where applicable.

Exit codes:
    0  run completed / checks passed
    1  validation error (bad flags, unmet preconditions, malformed input)
    2  numerical failure (non-convergence, non-finite values)
    3  blow-up guard fired (distinct so scripts can branch on it)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .analysis import (
    best_constant,
    decay_fit,
    green_function_probe,
    stability_experiment,
)
from .dynamics import EvolutionConfig, EvolutionTrace, blowup_probe, evolve
from .functionals import PhysicalParams
from .groundstate import (
    GroundStateProblem,
    GroundStateResult,
    solve_fixed_point,
    solve_gradient_flow,
)
from .io import load_field, save_field, write_csv, write_report
from .spectral import GridSpec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_BLOWUP = 3

_TERMINATION_CODES = {
    "completed": EXIT_OK,
    "blowup_suspected": EXIT_BLOWUP,
    "nan_abort": EXIT_NUMERICAL,
}


class UsageError(Exception):
    """Invalid flags or unmet preconditions; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); validation is exit 1 here
        raise UsageError(message)


def _vector(text: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--v expects three comma-separated components, e.g. 0.3,0,0")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"--v components must be numbers, got {text!r}") from None


def _add_common(p: _Parser) -> None:
    p.add_argument("--m", type=float, default=1.0, help="particle mass (default 1)")
    p.add_argument(
        "--v",
        default="0,0,0",
        help="boost velocity as three comma-separated components (default 0,0,0)",
    )
    p.add_argument("--N", type=float, default=None, help="field charge (L2 mass)")
    p.add_argument("--n", type=int, default=64, help="lattice points per axis")
    p.add_argument("--L", type=float, default=20.0, help="box edge length")
    p.add_argument(
        "--r-cut",
        type=float,
        default=None,
        help="Coulomb truncation radius (default L/2)",
    )
    p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
    p.add_argument("--max-iter", type=int, default=6000, help="solver iteration cap")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument(
        "--out",
        default=None,
        help="output directory (default $BOSONSTAR_OUTDIR or ./bosonstar-out)",
    )


def _add_solver_choice(p: _Parser) -> None:
    p.add_argument(
        "--solver",
        choices=("gradient-flow", "fixed-point"),
        default="gradient-flow",
        help="ground-state algorithm",
    )


def _add_stepper(p: _Parser, t_end_default: float) -> None:
    p.add_argument("--dt", type=float, default=5e-3, help="time step")
    p.add_argument(
        "--t-end", type=float, default=t_end_default, help="final evolution time"
    )
    p.add_argument(
        "--record-every", type=int, default=10, help="steps between trace records"
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="bosonstar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("groundstate", help="solve for a boosted ground state")
    _add_common(p)
    _add_solver_choice(p)

    p = sub.add_parser("evolve", help="propagate initial data in time")
    _add_common(p)
    _add_solver_choice(p)
    _add_stepper(p, t_end_default=10.0)
    p.add_argument(
        "--init",
        default=None,
        help="BSF1 snapshot to evolve (default: solve the ground state first "
        "and track its orbit)",
    )
    p.add_argument(
        "--snapshot-every",
        type=int,
        default=None,
        help="save a field snapshot every this many steps",
    )

    p = sub.add_parser("stability", help="perturb a ground state and track it")
    _add_common(p)
    _add_solver_choice(p)
    _add_stepper(p, t_end_default=5.0)
    p.add_argument(
        "--eps", type=float, default=0.01, help="relative perturbation size"
    )

    p = sub.add_parser("decay", help="fit the ground state's exponential tail")
    _add_common(p)
    _add_solver_choice(p)

    p = sub.add_parser("bestconst", help="sharp interpolation constant (massless)")
    _add_common(p)

    p = sub.add_parser("blowup", help="evolve a collapse candidate until the guard")
    _add_common(p)
    _add_stepper(p, t_end_default=20.0)
    p.add_argument(
        "--margin",
        type=float,
        default=0.05,
        help="relative depth below the collapse energy threshold",
    )

    p = sub.add_parser("green", help="decay of the resolvent kernel")
    _add_common(p)
    p.add_argument("--mu", type=float, default=None, help="resolvent multiplier")

    p = sub.add_parser("sweep", help="run ground-state solves over several charges")
    _add_common(p)
    _add_solver_choice(p)
    p.add_argument(
        "--N-values",
        dest="n_values",
        default=None,
        help="comma-separated list of charges to solve",
    )
    p.add_argument("--workers", type=int, default=2, help="parallel worker processes")

    return parser


def _setup(args) -> tuple[PhysicalParams, GridSpec]:
    params = PhysicalParams(args.m, _vector(args.v))
    grid = GridSpec(args.n, args.L)
    return params, grid


def _require_charge(args) -> float:
    if args.N is None:
        raise UsageError(f"--N is required for the {args.command} command")
    return args.N


def _solve(args, params: PhysicalParams, grid: GridSpec) -> GroundStateResult:
    problem = GroundStateProblem(
        params=params,
        charge=_require_charge(args),
        grid=grid,
        tol=args.tol,
        max_iter=args.max_iter,
        r_cut=args.r_cut,
    )
    solver = (
        solve_fixed_point
        if getattr(args, "solver", "gradient-flow") == "fixed-point"
        else solve_gradient_flow
    )
    return solver(problem)


def _groundstate_results(res: GroundStateResult) -> dict:
    out = res.report.as_dict()
    out.update(
        mu=res.mu,
        residual=res.residual,
        iterations=res.iterations,
        converged=res.converged,
        termination=res.termination,
        method=res.method,
    )
    return out


def _history_rows(res: GroundStateResult):
    for it, energy, residual, mu in res.history:
        yield {
            "iteration": int(it),
            "energy": energy,
            "residual": residual,
            "mu": mu,
        }


def _save_state(path: str, res: GroundStateResult) -> None:
    save_field(
        path,
        res.field,
        metadata={
            "m": res.params.m,
            "v": list(res.params.v),
            "charge": res.target_charge,
            "mu": res.mu,
            "tool": f"bosonstar {__version__}",
        },
    )


def _cmd_groundstate(args, outdir, report) -> int:
    params, grid = _setup(args)
    res = _solve(args, params, grid)
    _save_state(os.path.join(outdir, "groundstate.bsf1"), res)
    write_csv(os.path.join(outdir, "history.csv"), _history_rows(res))
    report["results"] = _groundstate_results(res)
    bound = (1.0 - params.lorentz_factor_inv) * params.m
    report["pass_flags"] = {
        "converged": res.converged,
        "multiplier_above_bound": res.mu > bound,
    }
    if not res.converged:
        report["error"] = {
            "type": "numerical",
            "message": f"solver stopped without converging ({res.termination})",
        }
        return EXIT_NUMERICAL
    return EXIT_OK


def _trace_results(trace: EvolutionTrace) -> dict:
    n0 = trace.charge[0]
    e0 = trace.energy[0]
    dist = trace.orbit_distance
    sup_d = float(np.nanmax(dist)) if np.any(np.isfinite(dist)) else None
    # kinetic_growth mirrors the guard's growth channel: the homogeneous
    # part of the squared H^{1/2} norm relative to its initial value.
    hom = trace.sobolev_half - trace.charge
    hom0 = max(float(hom[0]), 1e-9 * abs(n0))
    return {
        "termination": trace.termination,
        "guard_time": trace.guard_time,
        "final_time": float(trace.times[-1]),
        "charge_drift": float(np.max(np.abs(trace.charge - n0)) / abs(n0)),
        "energy_drift": float(np.max(np.abs(trace.energy - e0)) / abs(e0)),
        "sobolev_growth": float(np.max(trace.sobolev_half) / trace.sobolev_half[0]),
        "kinetic_growth": float(np.max(hom) / hom0) if hom0 > 0 else None,
        "max_tail_fraction": float(np.max(trace.tail_fraction)),
        "sup_orbit_distance": sup_d,
    }


def _finish_evolution(trace: EvolutionTrace, outdir, report, flags: dict) -> int:
    write_csv(os.path.join(outdir, "trace.csv"), trace.row_iter())
    if trace.final_field is not None:
        save_field(os.path.join(outdir, "final.bsf1"), trace.final_field)
    report["results"].update(_trace_results(trace))
    flags["completed"] = trace.termination == "completed"
    report["pass_flags"] = flags
    code = _TERMINATION_CODES[trace.termination]
    if trace.termination == "nan_abort":
        report["error"] = {
            "type": "numerical",
            "message": f"non-finite values at t = {trace.guard_time:g}",
        }
    return code


def _cmd_evolve(args, outdir, report) -> int:
    params, grid = _setup(args)
    if args.dt <= 0.0:
        raise UsageError("dt must be positive")
    if args.t_end <= 0.0:
        raise UsageError("t-end must be positive")
    cfg = EvolutionConfig(
        dt=args.dt,
        t_end=args.t_end,
        params=params,
        record_every=args.record_every,
        r_cut=args.r_cut,
    )
    reference = None
    if args.init is not None:
        psi0, header = load_field(args.init)
        if psi0.space != "position":
            raise UsageError("initial snapshot must hold a position-space field")
        if psi0.grid != grid:
            raise UsageError(
                f"snapshot grid (n={psi0.grid.n}, L={psi0.grid.length:g}) does not "
                f"match the requested run (n={grid.n}, L={grid.length:g})"
            )
        report["results"]["init"] = {"path": args.init, "header": header}
    else:
        res = _solve(args, params, grid)
        if not res.converged:
            report["error"] = {
                "type": "numerical",
                "message": "ground-state pre-solve did not converge",
            }
            return EXIT_NUMERICAL
        psi0 = res.field
        reference = res.field
        report["results"]["groundstate"] = _groundstate_results(res)

    if args.snapshot_every is not None:
        trace = _evolve_with_snapshots(
            psi0, cfg, reference, outdir, args.snapshot_every
        )
    else:
        trace = evolve(psi0, cfg, reference)

    flags = {
        "charge_conserved": None,
        "energy_conserved": None,
    }
    results = _trace_results(trace)
    flags["charge_conserved"] = results["charge_drift"] <= 1e-8
    flags["energy_conserved"] = results["energy_drift"] <= 1e-4
    code = _finish_evolution(trace, outdir, report, flags)
    if trace.termination == "blowup_suspected":
        report["error"] = {
            "type": "blowup_suspected",
            "message": f"blow-up guard fired at t = {trace.guard_time:g}",
        }
    return code


def _evolve_with_snapshots(psi0, cfg, reference, outdir, every) -> EvolutionTrace:
    """Evolve in chunks of `every` steps, saving a snapshot after each chunk.

    Chunking preserves the step structure: the potential is re-derived at
    each chunk boundary from the same field the straight run would carry,
    so the composed trajectory matches an unchunked run to round-off (the
    boundary kick has unit modulus only up to one float rounding, which is
    the sole source of deviation).
    """
    if every < 1:
        raise UsageError("snapshot-every must be >= 1")
    total = int(round(cfg.t_end / cfg.dt))
    pieces: list[EvolutionTrace] = []
    done = 0
    psi = psi0
    while done < total:
        k = min(every, total - done)
        sub = dataclasses.replace(cfg, t_end=k * cfg.dt)
        piece = evolve(psi, sub, reference)
        pieces.append(piece)
        done += k
        if piece.final_field is None or piece.termination != "completed":
            break
        psi = piece.final_field
        save_field(os.path.join(outdir, f"snapshot-{done:06d}.bsf1"), psi)
    return _concat_traces(pieces, cfg.dt, every)


def _concat_traces(pieces, dt, every) -> EvolutionTrace:
    arrays = {
        name: []
        for name in (
            "times",
            "charge",
            "energy",
            "sobolev_half",
            "tail_fraction",
            "phase",
            "orbit_distance",
        )
    }
    centroids = []
    offset = 0.0
    for i, piece in enumerate(pieces):
        sel = slice(None) if i == 0 else slice(1, None)  # drop duplicated t=0 row
        arrays["times"].append(piece.times[sel] + offset)
        for name in arrays:
            if name != "times":
                arrays[name].append(getattr(piece, name)[sel])
        centroids.append(piece.centroid[sel])
        offset += piece.times[-1]
    last = pieces[-1]
    guard = None
    if last.guard_time is not None:
        guard = offset - last.times[-1] + last.guard_time
    return EvolutionTrace(
        times=np.concatenate(arrays["times"]),
        charge=np.concatenate(arrays["charge"]),
        energy=np.concatenate(arrays["energy"]),
        sobolev_half=np.concatenate(arrays["sobolev_half"]),
        tail_fraction=np.concatenate(arrays["tail_fraction"]),
        centroid=np.concatenate(centroids),
        phase=np.concatenate(arrays["phase"]),
        orbit_distance=np.concatenate(arrays["orbit_distance"]),
        termination=last.termination,
        guard_time=guard,
        final_field=last.final_field,
    )


def _cmd_stability(args, outdir, report) -> int:
    params, grid = _setup(args)
    if args.dt <= 0.0:
        raise UsageError("dt must be positive")
    res = _solve(args, params, grid)
    if not res.converged:
        report["error"] = {
            "type": "numerical",
            "message": "ground-state pre-solve did not converge",
        }
        return EXIT_NUMERICAL
    report["results"]["groundstate"] = _groundstate_results(res)
    cfg = EvolutionConfig(
        dt=args.dt,
        t_end=args.t_end,
        params=params,
        record_every=args.record_every,
        r_cut=args.r_cut,
    )
    trace = stability_experiment(res, args.eps, cfg, seed=args.seed)
    results = _trace_results(trace)
    sup_d = results["sup_orbit_distance"]
    results["perturbation_size"] = args.eps
    results["gain"] = sup_d / args.eps if args.eps > 0 and sup_d is not None else None
    report["results"].update(results)
    flags = {"inconclusive": trace.termination != "completed"}
    if args.eps > 0 and sup_d is not None:
        flags["bounded_by_10x"] = sup_d <= 10.0 * args.eps
    return _finish_evolution(trace, outdir, report, flags)


def _cmd_decay(args, outdir, report) -> int:
    params, grid = _setup(args)
    res = _solve(args, params, grid)
    report["results"]["groundstate"] = _groundstate_results(res)
    if not res.converged:
        report["error"] = {
            "type": "numerical",
            "message": "ground-state pre-solve did not converge",
        }
        return EXIT_NUMERICAL
    fit = decay_fit(res)
    write_csv(
        os.path.join(outdir, "profile.csv"),
        (
            {"radius": r, "shell_max": p}
            for r, p in zip(fit.radii, fit.profile)
        ),
    )
    report["results"]["fit"] = {
        "rate": fit.rate,
        "rate_bound": fit.rate_bound,
        "prefactor": fit.prefactor,
        "residual": fit.residual,
        "window": list(fit.window),
    }
    report["pass_flags"] = {"decay": fit.passed}
    if not fit.passed:
        report["error"] = {
            "type": "numerical",
            "message": f"decay fit failed: rate {fit.rate:.4g} vs bound "
            f"{fit.rate_bound:.4g}",
        }
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_bestconst(args, outdir, report) -> int:
    params, grid = _setup(args)
    result = best_constant(
        grid, params.v, tol=args.tol, max_iter=args.max_iter, r_cut=args.r_cut
    )
    save_field(
        os.path.join(outdir, "optimizer.bsf1"),
        result.field,
        metadata={"v": list(result.v), "critical_charge": result.critical_charge},
    )
    report["results"] = {
        "constant": result.constant,
        "critical_charge": result.critical_charge,
        "residual": result.residual,
        "iterations": result.iterations,
        "kinetic_form": result.kinetic_form,
        "pair_energy": result.pair_energy,
    }
    report["pass_flags"] = {"converged": result.converged}
    return EXIT_OK


def _cmd_blowup(args, outdir, report) -> int:
    params, grid = _setup(args)
    if args.dt <= 0.0:
        raise UsageError("dt must be positive")
    n_target = args.N if args.N is not None else 20.0
    cfg = EvolutionConfig(
        dt=args.dt,
        t_end=args.t_end,
        params=params,
        record_every=args.record_every,
        r_cut=args.r_cut,
    )
    trace = blowup_probe(grid, n_target, cfg, margin=args.margin)
    report["results"]["target_charge"] = n_target
    flags = {"guard_fired": trace.termination == "blowup_suspected"}
    return _finish_evolution(trace, outdir, report, flags)


def _cmd_green(args, outdir, report) -> int:
    params, grid = _setup(args)
    if args.mu is None:
        raise UsageError("--mu is required for the green command")
    fit = green_function_probe(grid, params, args.mu)
    write_csv(
        os.path.join(outdir, "kernel_profile.csv"),
        (
            {"radius": r, "weighted_abs": p}
            for r, p in zip(fit.radii, fit.profile)
        ),
    )
    report["results"] = {
        "rate": fit.rate,
        "rate_bound": fit.rate_bound,
        "direction_rates": fit.direction_rates,
        "sup_abs": fit.sup_abs,
        "residual": fit.residual,
        "window": list(fit.window),
    }
    report["pass_flags"] = {"kernel_decay": fit.passed}
    if not fit.passed:
        report["error"] = {
            "type": "numerical",
            "message": f"kernel decay rate {fit.rate:.4g} below "
            f"0.8 x bound {fit.rate_bound:.4g}",
        }
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_sweep(args, outdir, report) -> int:
    if args.n_values is None:
        raise UsageError("--N-values is required for the sweep command")
    try:
        charges = [float(s) for s in args.n_values.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"could not parse --N-values {args.n_values!r}") from None
    if not charges:
        raise UsageError("--N-values produced an empty list")
    _setup(args)  # fail fast on shared physical/grid flags before spawning jobs
    if args.workers < 1:
        raise UsageError("workers must be >= 1")

    jobs = []
    for n_target in charges:
        subdir = os.path.join(outdir, f"job-N{n_target:g}")
        argv = [
            "groundstate",
            "--m", str(args.m),
            "--v", args.v,
            "--N", str(n_target),
            "--n", str(args.n),
            "--L", str(args.L),
            "--tol", str(args.tol),
            "--max-iter", str(args.max_iter),
            "--solver", args.solver,
            "--seed", str(args.seed),
            "--out", subdir,
        ]
        if args.r_cut is not None:
            argv += ["--r-cut", str(args.r_cut)]
        jobs.append((n_target, subdir, argv))

    if args.workers == 1:
        codes = [main(argv) for _, _, argv in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            codes = list(pool.map(main, [argv for _, _, argv in jobs]))

    rows = []
    for (n_target, subdir, _), code in zip(jobs, codes):
        row = {"charge": n_target, "exit_code": code, "directory": subdir}
        sub_report = os.path.join(subdir, "report.json")
        if os.path.exists(sub_report):
            with open(sub_report, encoding="utf-8") as fh:
                sub = json.load(fh)
            row["energy"] = sub["results"].get("energy_boosted")
            row["mu"] = sub["results"].get("mu")
            row["converged"] = sub["pass_flags"].get("converged")
        rows.append(row)
    write_csv(os.path.join(outdir, "sweep.csv"), rows)
    report["results"] = {"jobs": rows}
    report["pass_flags"] = {"all_jobs_ok": all(c == EXIT_OK for c in codes)}
    return max(codes)


_HANDLERS = {
    "groundstate": _cmd_groundstate,
    "evolve": _cmd_evolve,
    "stability": _cmd_stability,
    "decay": _cmd_decay,
    "bestconst": _cmd_bestconst,
    "blowup": _cmd_blowup,
    "green": _cmd_green,
    "sweep": _cmd_sweep,
}


def _config_dict(args, outdir: str) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "out"}
    cfg["out"] = outdir
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE

    outdir = args.out or os.environ.get("BOSONSTAR_OUTDIR") or "bosonstar-out"
    os.makedirs(outdir, exist_ok=True)
    report = {
        "command": args.command,
        "config": _config_dict(args, outdir),
        "results": {},
        "pass_flags": {},
        "timings": {},
        "error": None,
    }
    start = time.perf_counter()
    try:
        code = _HANDLERS[args.command](args, outdir, report)
    except UsageError as err:
        report["error"] = {"type": "validation", "message": str(err)}
        print(f"error: {err}", file=sys.stderr)
        code = EXIT_USAGE
    except ValueError as err:
        report["error"] = {"type": "validation", "message": str(err)}
        print(f"error: {err}", file=sys.stderr)
        code = EXIT_USAGE
    except RuntimeError as err:  # covers supercritical aborts and non-convergence
        report["error"] = {"type": "numerical", "message": str(err)}
        print(f"error: {err}", file=sys.stderr)
        code = EXIT_NUMERICAL
    report["timings"]["total_s"] = time.perf_counter() - start
    write_report(os.path.join(outdir, "report.json"), report)
    return code


if __name__ == "__main__":
    sys.exit(main())
