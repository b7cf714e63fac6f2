"""``respond`` command line front end.

Exit codes: 0 success, 1 validation failure, 2 budget or convergence error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from respond import analysis, divisors, series
from respond.errors import (
    BudgetExceeded,
    ClassificationContradiction,
    DegenerateZero,
    EmptySupport,
    InsufficientData,
    NoConvergence,
    SingularPropagator,
    SpecError,
)
from respond.problem import ProblemSpec, load_spec, validate_spec
from respond.trees import TreeEnumerator

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2

DEFAULT_B_GRID = tuple(np.round(np.linspace(0.1, 1.0, 10), 12))
DEFAULT_FIT_EPS = tuple(np.geomspace(1e-3, 1e-2, 5))


class ValidationFailure(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _nu_str(nu) -> str:
    return ",".join(str(c) for c in nu)


def _emit_rows(header: Sequence[str], rows: list[Sequence], fmt: str, out) -> None:
    if fmt == "json":
        json.dump([dict(zip(header, r)) for r in rows], out, indent=2)
        out.write("\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])


def _emit_report(report: dict, fmt: str, out) -> None:
    if fmt == "csv":
        header = list(report)
        row = [json.dumps(v) if isinstance(v, (list, dict)) else v for v in report.values()]
        _emit_rows(header, [row], "csv", out)
        return
    json.dump(report, out, indent=2)
    out.write("\n")


def _load(args) -> ProblemSpec:
    if not args.spec:
        raise ValidationFailure("--spec is required for this subcommand")
    spec = load_spec(args.spec)
    problems = validate_spec(spec)
    if problems:
        raise ValidationFailure("invalid spec: " + "; ".join(problems))
    return spec


def _parse_momentum(text: str, d: int) -> tuple[int, ...]:
    try:
        nu = tuple(int(c) for c in text.split(","))
    except ValueError as exc:
        raise ValidationFailure(f"bad --momentum {text!r}") from exc
    if len(nu) != d:
        raise ValidationFailure(f"--momentum has {len(nu)} components, spec has d = {d}")
    return nu


def cmd_divisors(args, out) -> int:
    spec = _load(args)
    N = 6 if args.order is None else args.order
    prof = divisors.divisor_profile(spec.omega, spec.support, N)
    rows = [(r["n"], r["alpha_n"], r["beta_n"], r["eps_n"], r["bruno_partial"]) for r in prof.as_records()]
    _emit_rows(["n", "alpha_n", "beta_n", "eps_n", "bruno_partial"], rows, args.format or "csv", out)
    return EXIT_OK


def cmd_verify_floor(args, out) -> int:
    a = 1.0 if args.a is None else args.a
    B = 1.0 if args.B is None else args.B
    if a == 0 or B <= 0:
        raise ValidationFailure("need a != 0 and B > 0")
    report = divisors.verify_lemma31(a, B)
    _emit_report(report.as_dict(), args.format or "json", out)
    return EXIT_OK if report.violations == 0 else EXIT_INVALID


def cmd_trees(args, out) -> int:
    spec = _load(args)
    if args.order is None or args.momentum is None:
        raise ValidationFailure("trees needs --order and --momentum")
    nu = _parse_momentum(args.momentum, spec.d)
    en = TreeEnumerator.for_spec(spec)
    if args.count_only:
        out.write(f"{en.count(args.order, nu)}\n")
        return EXIT_OK
    for t in en.trees(args.order, nu):
        out.write(t.encoding + "\n")
    return EXIT_OK


def _eps(args) -> complex:
    return complex(args.eps_re or 0.0, args.eps_im or 0.0)


def cmd_series(args, out) -> int:
    spec = _load(args)
    K = series.DEFAULT_ORDER if args.order is None else args.order
    eps = _eps(args)
    rec = series.coeff_via_recursion(spec, eps, K)
    tre = series.table_via_trees(spec, eps, K)
    rows = []
    for method, table in (("recursion", rec), ("trees", tre)):
        for k in range(1, K + 1):
            keys = sorted(set(rec.entries.get(k, {})) | set(tre.entries.get(k, {})))
            for nu in keys:
                v = table.get(k, nu)
                rows.append((k, _nu_str(nu), v.real, v.imag, method))
    _emit_rows(["k", "nu", "re", "im", "method"], rows, args.format or "csv", out)
    return EXIT_OK


def cmd_residual(args, out) -> int:
    spec = _load(args)
    K = 5 if args.order is None else args.order
    eps = _eps(args)
    table = series.coeff_via_recursion(spec, eps, K)
    report = {
        "residual_l1": series.residual(series.assemble(table, spec), spec),
        "tail_mass": series.tail_mass(spec, eps, K),
    }
    _emit_report(report, args.format or "json", out)
    return EXIT_OK


def cmd_scan(args, out) -> int:
    spec = _load(args)
    K = analysis.DEFAULT_SCAN_ORDER if args.order is None else args.order
    threads = args.threads or 1
    mode = args.mode or "rays"
    if mode == "rays":
        scan = analysis.scan_rays(spec, K, threads=threads)
        _emit_rows(["arg", "radius"], scan.rays, args.format or "csv", out)
    else:
        scan = analysis.scan_eps0_of_B(spec, DEFAULT_B_GRID, K, threads=threads)
        _emit_rows(["B", "eps0"], scan.B_grid, args.format or "csv", out)
        print(
            f"alpha_hat = {scan.alpha_hat:.6g} (95% band {scan.alpha_band[0]:.6g}..{scan.alpha_band[1]:.6g}), K = {K}",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_fit_bound(args, out) -> int:
    spec = _load(args)
    K = series.DEFAULT_ORDER if args.order is None else args.order
    tables = [series.coeff_via_recursion(spec, e, K) for e in DEFAULT_FIT_EPS]
    fit = analysis.fit_bound(tables, spec.forcing.xi, a=spec.a, B=args.B or 1.0)
    _emit_report(fit.as_dict(), args.format or "json", out)
    return EXIT_OK


COMMANDS = {
    "divisors": cmd_divisors,
    "verify-floor": cmd_verify_floor,
    "trees": cmd_trees,
    "series": cmd_series,
    "residual": cmd_residual,
    "scan": cmd_scan,
    "fit-bound": cmd_fit_bound,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="respond",
        description="Response-solution series for eps x'' + x' + eps g(x) = eps f(omega t).",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--spec", help="problem spec JSON file")
    parser.add_argument("--order", type=int, help="order K (series), tree order, or max scale N (divisors)")
    parser.add_argument("--momentum", help="root momentum as n1,...,nd")
    parser.add_argument("--eps-re", type=float, dest="eps_re")
    parser.add_argument("--eps-im", type=float, dest="eps_im")
    parser.add_argument("--a", type=float, help="linear coefficient a for verify-floor")
    parser.add_argument("--B", type=float, help="parabola steepness B")
    parser.add_argument("--mode", choices=["rays", "domain"])
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", help="write output here instead of stdout")
    parser.add_argument("--format", choices=["csv", "json"])
    parser.add_argument("--count-only", action="store_true", dest="count_only")
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("respond: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    buf = io.StringIO()
    try:
        code = COMMANDS[args.command](args, buf)
    except (ValidationFailure, SpecError, DegenerateZero, EmptySupport, OSError) as exc:
        print(f"respond: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (BudgetExceeded, NoConvergence, InsufficientData, SingularPropagator, ClassificationContradiction) as exc:
        print(f"respond: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
