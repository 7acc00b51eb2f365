"""Command line entry point: config in, CSV/JSON artifacts and a manifest out.

Exit codes: 0 success, 2 invalid config (nothing written), 3 solver failure,
4 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import ConfigError, SteepWellError
from .model_config import load_config, params_to_dict, validate

log = logging.getLogger("steepwell")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 2, 3, 4
COMMANDS = ("constants", "spectrum", "solve", "limit", "sweep", "check")


@dataclass
class RunManifest:
    command: str
    config: dict | None
    version: str
    seed: int
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)
    status: str = "ok"

    def write(self, out_dir: Path) -> Path:
        path = out_dir / f"manifest_{self.command}.json"
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _grid(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad lambda grid {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", type=Path, default=Path("out"))
    common.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
    common.add_argument("--dump-forms", action="store_true", help="write assembled matrices as CSV")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="steepwell", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("config", type=Path, nargs="?" if name == "check" else None)
        if name == "constants":
            sp.add_argument("--count", type=int, default=8)
        if name == "spectrum":
            sp.add_argument("--count", type=int, default=3)
            sp.add_argument("--lambda-grid", type=_grid, default=None)
        if name in ("solve", "limit", "sweep"):
            sp.add_argument("--tol", type=float, default=None)
        if name in ("solve", "limit"):
            sp.add_argument("--max-iter", type=int, default=None)
            sp.add_argument("--path-nodes", type=int, default=None)
        if name == "limit":
            sp.add_argument("--starts", type=int, default=1)
        if name == "sweep":
            sp.add_argument("--lambda-grid", type=_grid, default=None)
        if name == "check":
            sp.add_argument("--skip-determinism", action="store_true")
    return ap


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)
    return path


def _solution_rows(basis, coeffs):
    for idx, c in zip(basis.indices, coeffs):
        yield ["-".join(str(int(i)) for i in idx), repr(float(c))]


def _report(cp) -> dict:
    geom = cp.geometry
    trace = cp.cerami_trace
    out = {
        "energy": cp.energy,
        "grad_norm": cp.grad_norm,
        "iterations": cp.iterations,
        "newton_steps": cp.newton_steps,
        "method": cp.method,
        "norm_bound": cp.norm_bound,
        "trace": {
            "length": int(len(trace)),
            "final": [float(v) for v in trace[-1]] if len(trace) else [],
            "max_norm": float(np.max(trace[:, 1])) if len(trace) else None,
        },
    }
    if geom is not None:
        out["geometry"] = {
            "regime": geom.regime,
            "rho": geom.rho,
            "kappa": geom.kappa,
            "R": geom.R,
            "boundary_sup": geom.boundary_sup,
            "negative_dim": geom.negative_dim,
            "samples": geom.samples,
        }
    return out


def _solver_kwargs(args, linking: bool) -> dict:
    kw = {}
    if args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    if args.path_nodes is not None and not linking:
        kw["path_nodes"] = args.path_nodes
    return kw


def cmd_constants(params, args, out: Path) -> list[Path]:
    from .constants import constants_table

    rows = [[n, repr(float(v)), b] for n, v, b in constants_table(params, args.count)]
    for r in rows:
        print(",".join(r))
    return [_write_rows(out / "constants.csv", ("name", "value", "formula_branch"), rows)]


def cmd_spectrum(params, args, out: Path) -> list[Path]:
    from .spectral import eigen_convergence_sweep

    grid = args.lambda_grid or [params.lam]
    table = eigen_convergence_sweep(params, grid, args.count)
    path = out / "spectrum.csv"
    table.write_csv(path)
    return [path]


def cmd_solve(params, args, out: Path) -> list[Path]:
    from .discretization import forms_for
    from .limit_problem import _decomposition
    from .variational import TOL_DEFINITE, TOL_LINKING, find_linking_geometry, linking_solve, mountain_pass_solve

    forms = forms_for(params)
    spec = params.nonlinearity
    dec = _decomposition(forms)
    geom = find_linking_geometry(forms, spec, dec, seed=args.seed)
    if geom.negative_dim:
        cp = linking_solve(forms, spec, dec, geom, args.tol or TOL_LINKING, **_solver_kwargs(args, True))
    else:
        cp = mountain_pass_solve(forms, spec, geom, args.tol or TOL_DEFINITE, **_solver_kwargs(args, False))
    sol = _write_rows(out / "solution.csv", ("mode_index", "coefficient"), _solution_rows(forms.basis, cp.coeffs))
    rep = out / "report.json"
    rep.write_text(json.dumps(_report(cp), indent=2) + "\n")
    return [sol, rep]


def cmd_limit(params, args, out: Path) -> list[Path]:
    from .limit_problem import solve_limit

    sols = solve_limit(params, args.tol, starts=args.starts, seed=args.seed)
    paths = []
    for j, s in enumerate(sols):
        suffix = "" if j == 0 else f"_{j}"
        paths.append(_write_rows(out / f"limit_solution{suffix}.csv", ("mode_index", "coefficient"),
                                 _solution_rows(s.basis, s.coeffs)))
    rep = out / "limit_report.json"
    rep.write_text(json.dumps([_report(s.critical_point) for s in sols], indent=2) + "\n")
    return paths + [rep]


def cmd_sweep(params, args, out: Path) -> list[Path]:
    from .concentration import sweep

    grid = args.lambda_grid or [1e2, 1e3, 1e4]
    rep = sweep(params, grid, tol=args.tol, seed=args.seed)
    path = out / "sweep.csv"
    rep.write_csv(path)
    return [path]


def cmd_check(params, args, out: Path, manifest: RunManifest) -> int:
    from .acceptance import run_all

    results = run_all(include_determinism=not args.skip_determinism)
    rows = []
    for r in results:
        print(r.line)
        manifest.checks.append({"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail})
        rows.append([r.number, r.name, "pass" if r.passed else "fail", r.detail])
    manifest.outputs.append(str(_write_rows(out / "acceptance.csv", ("criterion", "name", "status", "detail"), rows)))
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


HANDLERS = {
    "constants": cmd_constants,
    "spectrum": cmd_spectrum,
    "solve": cmd_solve,
    "limit": cmd_limit,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    params = None
    try:
        if args.config is not None:
            params = load_config(args.config)
            report = validate(params)
            if report.formal:
                log.info("formal run: %s", [c.name for c in report.conditions if c.status == "formal"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if params is None and args.command != "check":
        print("config path required", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=args.command,
        config=params_to_dict(params) if params is not None else None,
        version=__version__,
        seed=args.seed,
        started=_now(),
    )
    code = EXIT_OK
    with threadpool_limits(limits=args.threads):
        try:
            if args.dump_forms and params is not None:
                from .discretization import dump_forms, forms_for

                manifest.outputs += [str(p) for p in dump_forms(forms_for(params), out)]
            if args.command == "check":
                code = cmd_check(params, args, out, manifest)
            else:
                manifest.outputs += [str(p) for p in HANDLERS[args.command](params, args, out)]
        except SteepWellError as exc:
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            manifest.status = f"failed: {type(exc).__name__}"
            code = EXIT_SOLVER
    if code == EXIT_ACCEPTANCE:
        manifest.status = "acceptance failure"
    manifest.finished = _now()
    manifest.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
