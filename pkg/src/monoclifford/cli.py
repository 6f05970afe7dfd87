"""Command line entry point: ``monoclifford {verify,kernels,operator,solve,magneto}``.

Exit codes: 0 success, 1 a check failed or a counterexample was found,
2 bad input or configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .algebra import Paravector, norm, paravector_blades
from .grid import Field, make_domain, read_field_csv, write_field_csv, write_vtk
from .kernels import KernelParams, kernel_split_difference, sigma_n, small_argument_constant
from .magneto import (
    PropertyCheckFailed,
    demag_context,
    load_problem,
    solve_magnetization,
    verify_inequalities,
)
from .nemyckii import identity_law, saturating_law, shifted_identity_law
from .operators import OperatorContext, diagnostics_json, operator_diagnostics
from .selfcheck import algebra_suite, bessel_suite
from .solver import SolverDivergence, SolveConfig, solve_monotone

OK, CHECK_FAILED, BAD_INPUT = 0, 1, 2


class ConfigError(ValueError):
    pass


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _params(n: int, a) -> KernelParams:
    a = [0.0] * (n + 1) if a is None else [float(v) for v in a]
    if len(a) != n + 1:
        raise ConfigError(f"'a' needs {n + 1} entries (a0 followed by the vector part)")
    return KernelParams(n, Paravector(a[0], tuple(a[1:])))


def _domain(cfg: dict):
    d = cfg.get("domain")
    if d is None:
        raise ConfigError("config needs a 'domain' section")
    return make_domain(d["box"], int(d["N"]), d.get("shape", "ball"))


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


# -- subcommands -----------------------------------------------------------------


def cmd_verify(args) -> int:
    results = algebra_suite() + bessel_suite()
    for r in results:
        print(r.line())
    return OK if all(r.passed for r in results) else CHECK_FAILED


def cmd_kernels(args) -> int:
    n = args.n
    params = _params(n, args.a)
    if params.a0 <= 0:
        raise ConfigError("kernel tables need a0 > 0")
    rng = np.random.default_rng(args.seed)
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    radii = np.geomspace(args.rmin, args.rmax, args.points)
    sink = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(sink)
        w.writerow(["r", "small_argument_constant", "limit_1_over_sigma_n", "scaled_split_difference"])
        for r in radii:
            split = kernel_split_difference(r * direction, params)
            w.writerow([f"{r:.17g}", f"{small_argument_constant(r, params):.17g}",
                        f"{1.0 / sigma_n(n):.17g}", f"{r ** (n - 1) * norm(split):.17g}"])
    finally:
        if args.out:
            sink.close()
    return OK


def cmd_operator(args) -> int:
    cfg = _read_json(args.config)
    dom = _domain(cfg)
    params = _params(dom.n, cfg.get("a"))
    ctx = OperatorContext(dom, params, quadrature=cfg.get("quadrature", "difference-kernel"))
    diag = operator_diagnostics(ctx, int(cfg.get("iterations", 200)), int(cfg.get("seed", 0)))
    _emit(diagnostics_json(diag), args.out)
    delta = float(cfg.get("delta", 0.15))
    eps = float(cfg.get("epsilon", 0.05))
    ok = diag["norm_estimate"] <= 1.0 + delta and diag["min_rayleigh"] >= -eps
    return OK if ok else CHECK_FAILED


_LAWS = {"identity": identity_law, "saturating": saturating_law, "shifted-identity": shifted_identity_law}


def _rhs(spec: dict, dom, law) -> Field:
    kind = spec.get("kind", "random")
    vals = np.zeros((dom.size, 1 << dom.n), dtype=complex)
    blades = list(law.blades)
    if kind == "random":
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        vals[:, blades] = float(spec.get("scale", 1.0)) * rng.standard_normal((dom.size, len(blades)))
    elif kind == "constant":
        value = np.asarray(spec["value"], dtype=float)
        if value.shape != (len(blades),):
            raise ConfigError(f"constant right-hand side needs {len(blades)} entries")
        vals[:, blades] = value
    elif kind == "file":
        return read_field_csv(spec["path"], dom)
    else:
        raise ConfigError(f"unknown right-hand side kind {kind!r}")
    return Field(dom, vals)


def cmd_solve(args) -> int:
    cfg = _read_json(args.config)
    dom = _domain(cfg)
    params = _params(dom.n, cfg.get("a"))
    lspec = cfg.get("law", {"kind": "shifted-identity"})
    if lspec.get("kind") not in _LAWS:
        raise ConfigError(f"law kind must be one of {sorted(_LAWS)}")
    blades = paravector_blades(dom.n) if lspec.get("subspace", "paravector") == "paravector" \
        else paravector_blades(dom.n)[1:]
    law = _LAWS[lspec["kind"]](dom.n, blades)
    g = _rhs(cfg.get("rhs", {}), dom, law)
    s = dict(cfg.get("solver", {}))
    defaults = {"identity": (1.0, 1.0), "saturating": (None, 1.0), "shifted-identity": (1.0, 2.0)}
    c, L = defaults[lspec["kind"]]
    solve_cfg = SolveConfig(step=s.get("step", "auto"), tol=float(s.get("tol", 1e-8)),
                            max_iter=int(s.get("max_iter", 10_000)), seed=s.get("seed"),
                            c=s.get("c", c), L=s.get("L", L))
    ctx = OperatorContext(dom, params)
    try:
        res = solve_monotone(law, ctx, g, solve_cfg)
    except SolverDivergence as exc:
        print(json.dumps({"converged": False, "error": str(exc), "residuals": exc.residuals[-5:]}))
        return CHECK_FAILED
    _emit(res.to_json(), args.out)
    if args.solution:
        write_field_csv(res.solution, args.solution)
    return OK if res.converged else CHECK_FAILED


def cmd_magneto(args) -> int:
    problem = load_problem(args.config)
    ctx = demag_context(problem.domain)
    try:
        res = solve_magnetization(problem, ctx)
    except PropertyCheckFailed as exc:
        print(json.dumps({"error": str(exc), "reports": [json.loads(r.to_json()) for r in exc.reports]}))
        return CHECK_FAILED
    except SolverDivergence as exc:
        print(json.dumps({"error": str(exc)}))
        return CHECK_FAILED
    report = verify_inequalities(res.solution, ctx)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_field_csv(res.solution, out / "magnetization.csv")
    write_vtk(res.solution, out / "magnetization.vtk", "M")
    (out / "solve.json").write_text(res.to_json() + "\n")
    (out / "inequalities.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(json.dumps({"converged": res.converged, "iterations": res.iterations, **report.to_dict()}, indent=2))
    ok = res.converged and report.ineq2_pass and report.ineq3_pass
    return OK if ok else CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="monoclifford", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("verify", help="run the algebra and MacDonald-function invariant suites")

    k = sub.add_parser("kernels", help="CSV table of kernel small-argument behaviour")
    k.add_argument("--n", type=int, default=3)
    k.add_argument("--a", type=float, nargs="+", default=None, help="a0 a1 ... an (default a0=1, rest 0)")
    k.add_argument("--rmin", type=float, default=1e-4)
    k.add_argument("--rmax", type=float, default=1e-1)
    k.add_argument("--points", type=int, default=13)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out")

    o = sub.add_parser("operator", help="assemble B and print its diagnostics JSON")
    o.add_argument("--config", required=True)
    o.add_argument("--out")

    s = sub.add_parser("solve", help="solve F(u) + Bu = g from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--solution", help="write the solution field CSV here")

    m = sub.add_parser("magneto", help="solve the magnetization equation and check the inequalities")
    m.add_argument("--config", required=True)
    m.add_argument("--out", default="magneto_out", help="output directory")
    return ap


_COMMANDS = {"verify": cmd_verify, "kernels": cmd_kernels, "operator": cmd_operator,
             "solve": cmd_solve, "magneto": cmd_magneto}


def cli_main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return OK if exc.code == 0 else BAD_INPUT
    if args.command == "kernels" and args.a is None:
        args.a = [1.0] + [0.0] * args.n
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


def main() -> None:
    sys.exit(cli_main())
