"""``gnslab`` command line: constants, single-profile reports, identity checks and scans.

Exit codes: 0 success or pass, 2 a verdict failed, 1 usage or execution error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from . import experiments as ex
from . import functionals as fn
from .golden import run_golden
from .params import (
    ParamsRangeError,
    corollary_exponents,
    default_moment_p,
    derive_params,
    lemma22_constants,
    moment_range,
    sandwich_constant,
)
from .profiles import PerturbationFamily, normalize, perturb
from .quad import budget_limit

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(val) and val > 0):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return val


def _eps_grid(text: str) -> list:
    if text == "default":
        return list(ex.DEFAULT_EPS_GRID)
    if text.startswith("logspace:"):
        try:
            lo, hi, num = text.split(":", 1)[1].split(",")
            return list(np.logspace(math.log10(float(lo)), math.log10(float(hi)), int(num)))
        except ValueError:
            raise argparse.ArgumentTypeError("logspace grid must read logspace:LO,HI,NUM") from None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps grid {text!r}") from None


def _family(text: str) -> PerturbationFamily:
    try:
        return PerturbationFamily.from_json(text)
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"bad family JSON: {exc}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gnslab", description="Deficits and stability checks for the sharp GNS family.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, fmt_choices=("json", "csv", "text"), default_fmt="text"):
        p.add_argument("--n", type=int, default=2, help="dimension (default 2)")
        p.add_argument("--t", type=float, default=3.0, help="exponent parameter (default 3)")
        p.add_argument("--rel-tol", type=_positive_float, default=1e-8, help="quadrature tolerance for distance searches")
        p.add_argument("--budget", type=int, default=1_000_000, help="quadrature evaluation budget")
        p.add_argument("--format", choices=fmt_choices, default=default_fmt)
        p.add_argument("--output", default=None, help="output file (or directory for scans)")

    common(sub.add_parser("params", help="derived exponents and constants"), ("json", "text"))

    rep = sub.add_parser("report", help="deficit report for one perturbed profile")
    common(rep, ("json", "csv", "text"))
    rep.add_argument("--family", type=_family, default=PerturbationFamily("multiplicative_bump"))
    rep.add_argument("--eps", type=float, default=0.05)
    rep.add_argument("--p", type=_positive_float, default=None)
    rep.add_argument("--raw", action="store_true", help="skip the normalization step")

    vi = sub.add_parser("verify-identity", help="check the dimension-reduction identity")
    common(vi, ("json", "text"))
    vi.add_argument("--family", type=_family, default=PerturbationFamily("multiplicative_bump"))
    vi.add_argument("--eps", type=float, default=0.05)

    for name, helptext in (("scan", "stability exponent scan"), ("be-scan", "Bianchi-Egnell ratio scan")):
        sp = sub.add_parser(name, help=helptext)
        common(sp, ("json", "csv", "text"))
        sp.add_argument("--family", type=_family, default=PerturbationFamily("multiplicative_bump"))
        sp.add_argument("--eps-grid", type=_eps_grid, default=list(ex.DEFAULT_EPS_GRID),
                        help="comma list, 'default', or logspace:LO,HI,NUM")
        sp.add_argument("--timestamp", default=None, help="timestamp used in output file names")
        if name == "scan":
            sp.add_argument("--p", type=_positive_float, default=None)

    st = sub.add_parser("selftest", help="golden-value suite")
    st.add_argument("--format", choices=("json", "text"), default="text")
    st.add_argument("--output", default=None)
    return parser


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(ex._jsonable(obj), indent=2, sort_keys=True) + "\n"


def _text_table(obj: dict, indent: str = "") -> str:
    lines = []
    for k, v in obj.items():
        if isinstance(v, dict):
            lines.append(f"{indent}{k}:")
            lines.append(_text_table(v, indent + "  ").rstrip("\n"))
        elif isinstance(v, float):
            lines.append(f"{indent}{k} = {v:.12g}")
        else:
            lines.append(f"{indent}{k} = {v}")
    return "\n".join(lines) + "\n"


def _cmd_params(args) -> int:
    params = derive_params(args.n, args.t)
    out = {
        **params.as_dict(),
        "lemma22": lemma22_constants(params).as_dict(),
        "corollary": corollary_exponents(params).as_dict(),
        "sandwich_B": sandwich_constant(params),
        "moment_range": list(moment_range(params)),
        "default_p": default_moment_p(params),
    }
    _emit(_dump(out) if args.format == "json" else _text_table(out), args.output)
    return EXIT_OK


def _cmd_report(args) -> int:
    params = derive_params(args.n, args.t)
    u = perturb(args.family, args.eps, params)
    if not args.raw:
        u = normalize(u, params).u_norm
    rep = fn.deficit_report(u, params, args.p, opt_rel_tol=max(args.rel_tol, 1e-12))
    if args.format == "json":
        text = _dump(rep.to_json())
    elif args.format == "csv":
        flat = rep.flat()
        text = ",".join(flat) + "\r\n" + ",".join(str(ex._csv_cell(v)) for v in flat.values()) + "\r\n"
    else:
        text = _text_table(rep.flat())
    _emit(text, args.output)
    return EXIT_FAIL if rep.check_invariants(params) else EXIT_OK


def _cmd_verify(args) -> int:
    params = derive_params(args.n, args.t)
    if not args.family.nonnegative:
        raise ValueError("the identity needs a positive family")
    verdict = ex.verify_identity_prop21(perturb(args.family, args.eps, params), params, max(args.rel_tol, 1e-12))
    out = verdict.as_dict()
    _emit(_dump(out) if args.format == "json" else _text_table(out), args.output)
    return EXIT_OK if verdict.passed else EXIT_FAIL


def _timestamp(args) -> str:
    return args.timestamp or datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def _scan_summary(res: ex.ScanResult) -> str:
    lines = [f"{res.kind} scan: {res.family.kind} n={res.n} t={res.t:g} points={len(res.points)}"]
    for name, (slope, icpt, r2) in res.fitted.items():
        lines.append(f"  slope[{name}] = {slope:.4f}  (r^2 = {r2:.6f})")
    for name, v in res.verdicts.items():
        lines.append(f"  {name}: {'PASS' if v['pass'] else 'FAIL'}  " + ", ".join(
            f"{k}={v[k]:.4g}" if isinstance(v[k], float) else f"{k}={v[k]}" for k in v if k != "pass"
        ))
    if res.flags:
        lines.append("  flags: " + ", ".join(res.flags))
    bad = [p.eps for p in res.points if not p.ok]
    if bad:
        lines.append("  failed points: " + ", ".join(f"{e:.4g}" for e in bad))
    return "\n".join(lines) + "\n"


def _cmd_scan(args, be: bool) -> int:
    params = derive_params(args.n, args.t)
    tol = max(args.rel_tol, 1e-12)
    if be:
        res = ex.be_ratio_scan(args.family, args.eps_grid, params, tol, args.budget)
    else:
        res = ex.stability_scan(args.family, args.eps_grid, params, args.p, tol, args.budget)
    if args.output:
        fmts = ("json", "csv") if args.format == "text" else (args.format,)
        for path in res.write(args.output, _timestamp(args), fmts):
            sys.stderr.write(f"wrote {path}\n")
        sys.stdout.write(_scan_summary(res))
    elif args.format == "json":
        sys.stdout.write(_dump(res.to_json()))
    elif args.format == "csv":
        sys.stdout.write(res.to_csv())
    else:
        sys.stdout.write(_scan_summary(res))
    return EXIT_OK if res.passed else EXIT_FAIL


def _cmd_selftest(args) -> int:
    results = run_golden()
    if args.format == "json":
        text = _dump([r.__dict__ for r in results])
    else:
        text = "".join(
            f"{'PASS' if r.passed else 'FAIL'}  {r.name:<28} value={r.value:.15g} expected={r.expected:.15g} rel_err={r.rel_error:.2e}\n"
            for r in results
        )
    _emit(text, args.output)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_ERROR
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_ERROR
    try:
        if args.command == "selftest":
            return _cmd_selftest(args)
        if args.budget < 15:
            raise ValueError("--budget must be at least 15")
        derive_params(args.n, args.t)
        with budget_limit(args.budget):
            if args.command == "params":
                return _cmd_params(args)
            if args.command == "report":
                return _cmd_report(args)
            if args.command == "verify-identity":
                return _cmd_verify(args)
            return _cmd_scan(args, be=args.command == "be-scan")
    except ParamsRangeError as exc:
        sys.stderr.write(f"gnslab: {exc}\n")
        return EXIT_ERROR
    except Exception as exc:
        sys.stderr.write(f"gnslab: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
