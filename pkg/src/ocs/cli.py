"""Command-line front end.

Subcommands::

    ocs solve       --pedigree FILE --theta R [...]   solve an instance
    ocs export-sdpa --pedigree FILE --theta R [...]   write SDPA data
    ocs check       --pedigree FILE --theta R [...]   cross-check formulations
    ocs generate    --seed N --founders N [...]       simulate a pedigree

Exit codes: 0 success/optimal, 2 infeasible instance, 1 any error.
Errors print a single machine-parsable ``error: <kind>: <detail>`` line
to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .formulation import (
    FORMULATIONS,
    InvalidInstanceError,
    build,
    selection_instance,
)
from .kinship import inverse_relationship
from .pedigree import PedigreeError, parse_pedigree, write_pedigree
from .sdp import build_sdp, export_sdpa
from .solver import SolverConfig, Status, solve
from .verify import GeneratorConfig, cross_check, dense_limit, generate_pedigree

__all__ = ["main"]


class _CliError(Exception):
    def __init__(self, kind: str, detail: str, code: int = 1):
        super().__init__(detail)
        self.kind = kind
        self.code = code


def _fail(kind: str, detail: str, code: int = 1) -> int:
    print(f"error: {kind}: {detail}", file=sys.stderr)
    return code


def _load_pedigree(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return parse_pedigree(handle)
    except OSError as exc:
        raise _CliError("io", f"cannot read pedigree '{path}': {exc.strerror}")
    except PedigreeError as exc:
        raise _CliError("parse", str(exc))


def _load_bound(spec: str, ped, name: str):
    """A bound flag is either a float or a path to an ``id,value`` CSV."""
    try:
        return float(spec)
    except ValueError:
        pass
    values = {}
    try:
        with open(spec, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line or line.startswith("#") or line.lower() == "id,value":
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise _CliError(
                        "parse", f"{name} file line {lineno}: expected 'id,value'"
                    )
                values[parts[0].strip()] = float(parts[1])
    except OSError as exc:
        raise _CliError("io", f"cannot read {name} file '{spec}': {exc.strerror}")
    missing = [label for label in ped.labels if label not in values]
    if missing:
        raise _CliError("parse", f"{name} file missing members, e.g. '{missing[0]}'")
    return np.array([values[label] for label in ped.labels])


def _instance_from_args(args, ped):
    try:
        lower = _load_bound(args.lower, ped, "lower") if args.lower is not None else 0.0
        upper = _load_bound(args.upper, ped, "upper") if args.upper is not None else 1.0
        return selection_instance(ped, args.theta, lower=lower, upper=upper)
    except InvalidInstanceError as exc:
        raise _CliError("instance", str(exc), code=2)
    except ValueError as exc:
        raise _CliError("instance", str(exc))


def _solver_config(args) -> SolverConfig:
    kwargs = {}
    if args.tol is not None:
        kwargs["tol_gap"] = args.tol
        kwargs["tol_feas"] = args.tol
    if args.max_iter is not None:
        kwargs["max_iter"] = args.max_iter
    if getattr(args, "verbose", False):
        kwargs["verbose"] = True
    return SolverConfig(**kwargs)


def _cmd_solve(args) -> int:
    t0 = time.perf_counter()
    ped = _load_pedigree(args.pedigree)
    t_parse = time.perf_counter() - t0

    inst = _instance_from_args(args, ped)
    t0 = time.perf_counter()
    limit = dense_limit()
    prob, recovery = build(inst, formulation=args.formulation, dense_limit=limit)
    t_build = time.perf_counter() - t0

    t0 = time.perf_counter()
    sol = solve(prob, _solver_config(args))
    t_solve = time.perf_counter() - t0

    coancestry = float("nan")
    contributions = None
    if sol.status is Status.OPTIMAL:
        contributions = recovery(sol.z)
        # x'Ax/2 equals the squared cone-tail image in every formulation
        tail = (prob.F @ sol.z)[prob.n_lin + 1:]
        coancestry = 0.5 * float(tail @ tail)

    summary = {
        "status": sol.status.value,
        "objective": sol.objective if sol.status is Status.OPTIMAL else None,
        "group_coancestry": coancestry if sol.status is Status.OPTIMAL else None,
        "iterations": sol.iterations,
        "gap": sol.gap,
        "formulation": args.formulation,
        "m": ped.size,
        "theta": args.theta,
        "timings": {"parse": t_parse, "build": t_build, "solve": t_solve},
    }
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as handle:
            json.dump(summary, handle, indent=2)
            handle.write("\n")
    else:
        json.dump(summary, sys.stdout, indent=2)
        print()

    if sol.status is Status.OPTIMAL:
        sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
        try:
            sink.write("id,contribution\n")
            for label, value in zip(ped.labels, contributions):
                sink.write(f"{label},{value:.12g}\n")
        finally:
            if args.out:
                sink.close()
        return 0
    if sol.status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE):
        print(f"error: infeasible: solver reported {sol.status.value}", file=sys.stderr)
        return 2
    print(f"error: solver: terminated with {sol.status.value}", file=sys.stderr)
    return 1


def _cmd_export_sdpa(args) -> int:
    ped = _load_pedigree(args.pedigree)
    inst = _instance_from_args(args, ped)
    ainv = inverse_relationship(ped)
    sdp = build_sdp(inst, ainv)
    try:
        if args.out:
            export_sdpa(sdp, args.out)
        else:
            export_sdpa(sdp, sys.stdout)
    except OSError as exc:
        raise _CliError("io", f"cannot write '{args.out}': {exc.strerror}")
    sizes = " ".join(
        str(-s if d else s) for s, d in zip(sdp.block_sizes, sdp.diag_blocks)
    )
    print(
        f"exported SDP: {sdp.n_vars} variables, {len(sdp.block_sizes)} blocks "
        f"[{sizes}], dimension {sdp.dimension}",
        file=sys.stderr,
    )
    return 0


def _cmd_check(args) -> int:
    ped = _load_pedigree(args.pedigree)
    inst = _instance_from_args(args, ped)
    tol = args.tol if args.tol is not None else 1e-7
    report = cross_check(inst, _solver_config(args))
    for r in report.results:
        if r.error is not None:
            print(f"{r.formulation:8s} failed: {r.error}")
        elif r.optimal:
            e_res, bound_res, coan_res = r.residuals
            print(
                f"{r.formulation:8s} {r.status.value:16s} objective={r.objective:.10f} "
                f"residuals=({e_res:.2e}, {bound_res:.2e}, {coan_res:.2e})"
            )
        else:
            print(f"{r.formulation:8s} {r.status.value}")
    delta = report.max_objective_delta
    print(f"max objective delta: {delta:.3e}")
    if report.consistent(tol):
        print("formulations agree")
        return 0
    print("error: check: formulations disagree or failed", file=sys.stderr)
    return 1


def _cmd_generate(args) -> int:
    try:
        cfg = GeneratorConfig(
            seed=args.seed,
            n_founders=args.founders,
            n_cycles=args.cycles,
            offspring_per_cycle=args.offspring,
            selection_fraction=args.fraction,
        )
    except ValueError as exc:
        raise _CliError("config", str(exc))
    ped = generate_pedigree(cfg)
    try:
        if args.out:
            write_pedigree(ped, args.out)
        else:
            write_pedigree(ped, sys.stdout)
    except OSError as exc:
        raise _CliError("io", f"cannot write '{args.out}': {exc.strerror}")
    print(f"generated pedigree with {ped.size} members", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocs",
        description="Optimal contribution selection via second-order cone programming.",
    )
    parser.add_argument("--version", action="version", version=f"ocs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_instance_flags(p):
        p.add_argument("--pedigree", required=True, help="pedigree CSV file")
        p.add_argument("--theta", type=float, required=True, help="group-coancestry cap")
        p.add_argument("--lower", help="scalar lower bound or id,value CSV path")
        p.add_argument("--upper", help="scalar upper bound or id,value CSV path")

    def add_solver_flags(p):
        p.add_argument("--tol", type=float, help="gap and feasibility tolerance")
        p.add_argument("--max-iter", type=int, dest="max_iter")
        p.add_argument("--verbose", action="store_true", help="per-iteration log")

    p_solve = sub.add_parser("solve", help="solve a selection instance")
    add_instance_flags(p_solve)
    add_solver_flags(p_solve)
    p_solve.add_argument(
        "--formulation",
        choices=FORMULATIONS,
        default="compact",
        help="problem build to use (default: compact)",
    )
    p_solve.add_argument("--out", help="contributions CSV output path")
    p_solve.add_argument("--summary", help="summary JSON output path")
    p_solve.set_defaults(func=_cmd_solve)

    p_export = sub.add_parser("export-sdpa", help="write the SDP in sparse SDPA format")
    add_instance_flags(p_export)
    p_export.add_argument("--out", help="output .dat-s path (default: stdout)")
    p_export.set_defaults(func=_cmd_export_sdpa)

    p_check = sub.add_parser("check", help="cross-check the three formulations")
    add_instance_flags(p_check)
    add_solver_flags(p_check)
    p_check.set_defaults(func=_cmd_check)

    p_gen = sub.add_parser("generate", help="simulate a pedigree")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--founders", type=int, required=True)
    p_gen.add_argument("--cycles", type=int, default=5)
    p_gen.add_argument("--offspring", type=int, default=0)
    p_gen.add_argument("--fraction", type=float, default=0.5)
    p_gen.add_argument("--out", help="pedigree CSV output path (default: stdout)")
    p_gen.set_defaults(func=_cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        return _fail(exc.kind, str(exc), exc.code)
    except Exception as exc:  # last-resort guard so scripts get exit 1
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
