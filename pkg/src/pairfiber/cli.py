"""Command-line front end.

Every subcommand writes one JSON report (or a TSV rendering of its main block)
that echoes the resolved configuration, the tool version and the seed.

Exit codes: 0 success, 2 parse or usage error, 3 no interior MLE,
4 enumeration cap exceeded. Failures print a JSON error block on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .enumeration import (
    DEFAULT_CAP,
    composed_lower_bound,
    ellipsoid_log_volume,
    exact_p_value,
    fiber_ratio_report,
    lattice_correction_magnitude,
    log_binomial,
    subtable_counts,
    subtable_lower_bound,
)
from .errors import BoundaryError, FiberTooLarge, PairFiberError
from .io import load_example, parse_expected_text, parse_table
from .markov import generate_basis, normal_form, reduction_potential
from .mle import FitConfig, fit
from .model import ModelSpec
from .sampler import TARGETS, ChainConfig, run_chain
from .stats import ChiSquareStatistic, pair_scan
from .table import PairTable, margins, pair_list, total

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BOUNDARY = 3
EXIT_CAP = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(x):
    # JSON has no NaN/inf; numpy scalars are converted to Python numbers
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _sig(x: float, digits: int) -> str:
    if x is None or not math.isfinite(x):
        return "NA"
    return f"{x:.{digits}g}"


def _parse_pair(text: str) -> tuple[int, int]:
    try:
        r, s = (int(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"pair must look like 'r,s', got {text!r}") from None
    return r, s


def _model(text: str, n: int) -> ModelSpec:
    if text == "no-proximity":
        return ModelSpec.no_proximity(n)
    if text.startswith("pair:"):
        r, s = _parse_pair(text[5:])
        if not (1 <= r < s <= n):
            raise UsageError(f"pair {r},{s} is not a valid cell for n={n}")
        return ModelSpec.single_pair(n, r, s)
    raise UsageError(f"unknown model {text!r}; use no-proximity or pair:r,s")


def _load(args) -> tuple[PairTable, str]:
    if args.example:
        if args.table:
            raise UsageError("give either a table file or --example, not both")
        t = load_example()
        return (t if args.n is None or args.n == t.n else _fail_n(args.n, t.n)), "bundled:lymphocyte_etca"
    if not args.table:
        raise UsageError("a table file (or --example) is required")
    return parse_table(args.table, n=args.n, matrix=args.matrix), str(args.table)


def _fail_n(want, got):
    raise UsageError(f"--n {want} does not match the bundled table (n={got})")


def _digest(t: PairTable, source: str) -> dict:
    return {"source": source, "n": t.n, "total": int(total(t)), "margins": margins(t).u.tolist()}


def _fit_cfg(args) -> FitConfig:
    try:
        return FitConfig(tolerance=args.tol, max_iterations=args.max_iter)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _cells(values) -> list:
    n_pairs = pair_list(values.n)
    return [[p.j, p.k, float(v)] for p, v in zip(n_pairs, values.values)]


def _fit_block(fm) -> dict:
    return {
        "model": fm.spec.label(),
        "theta": fm.theta.tolist(),
        "mu": fm.mu,
        "loglik": fm.loglik,
        "iterations": fm.iterations,
        "converged": fm.converged,
        "max_margin_violation": fm.max_violation,
        "fitted": _cells(fm.fitted),
    }


def _expected(args, t: PairTable):
    """Expected table for chi-square: ``--expected`` file, else the fitted model."""
    if args.expected:
        fhat = parse_expected_text(Path(args.expected).read_text(), n=t.n)
        return fhat, {"source": str(args.expected)}
    fm = fit(_model(args.model, t.n), t, _fit_cfg(args))
    return fm.fitted, _fit_block(fm)


# --- subcommands -----------------------------------------------------------------


def cmd_fit(args, t: PairTable) -> dict:
    fm = fit(_model(args.model, t.n), t, _fit_cfg(args))
    return {"fit": _fit_block(fm)}


def cmd_gof(args, t: PairTable) -> dict:
    try:
        chain = ChainConfig(
            seed=args.seed,
            burn_in=args.burn_in if args.burn_in is not None else args.thin,
            thinning=args.thin,
            samples=args.samples,
            target=args.target,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fhat, fit_info = _expected(args, t)
    stat = ChiSquareStatistic(fhat)
    res = run_chain(t, generate_basis(t.n), chain, stat)
    block = res.as_dict(include_stream=args.stream)
    block["expected"] = fit_info
    if args.exact:
        block["exact_p_value"] = exact_p_value(margins(t), t, fhat, cap=args.cap)
    return {"gof": block}


def cmd_scan(args, t: PairTable) -> dict:
    if args.tests is not None and args.tests < 1:
        raise UsageError("--tests must be >= 1")
    rows = pair_scan(t, _fit_cfg(args), tests=args.tests)
    if args.pair:
        r, s = _parse_pair(args.pair)
        rows = [row for row in rows if (row.pair.j, row.pair.k) == (r, s)]
        if not rows:
            raise UsageError(f"pair {r},{s} is not a cell for n={t.n}")
    tests = args.tests if args.tests is not None else len(pair_list(t.n))
    return {"scan": {"tests": tests, "rows": [row.as_dict() for row in rows]}}


def cmd_estimate(args, t: PairTable) -> dict:
    fhat, fit_info = _expected(args, t)
    r2 = args.r_squared
    if r2 is None:
        r2 = ChiSquareStatistic(fhat)(t)
    counts = subtable_counts()
    lower = subtable_lower_bound(counts.values())
    binom = log_binomial(*args.binom)
    composed = composed_lower_bound(lower, binom)
    vol = ellipsoid_log_volume(fhat, r2)
    lattice = lattice_correction_magnitude(r2, t.values.shape[0])
    block = {
        "r_squared": r2,
        "cells": int(t.values.shape[0]),
        "subtable_counts": {k: str(v) for k, v in counts.items()},
        "subtable_lower_bound": lower.as_dict(),
        "move_choices": binom.as_dict() | {"n": args.binom[0], "k": args.binom[1]},
        "composed_lower_bound": composed.as_dict(),
        "ellipsoid_volume": vol.as_dict(),
        "lattice_correction": lattice.as_dict(),
        "ratio_vs_composed": fiber_ratio_report(composed.log10_value, vol.log10_value).as_dict(),
        "ratio_vs_floor": fiber_ratio_report(composed.log10_value, vol.log10_value, use_floor=True).as_dict(),
        "expected": fit_info,
    }
    return {"estimate": block}


def cmd_normal_form(args, t: PairTable) -> dict:
    rng = np.random.default_rng(args.seed) if args.random_order else None
    res = normal_form(t, rng=rng)
    return {
        "normal_form": {
            "steps": res.steps,
            "potential_before": reduction_potential(t),
            "potential_after": reduction_potential(res.table),
            "table": [[p.j, p.k, int(v)] for p, v in zip(pair_list(t.n), res.table.values)],
        }
    }


COMMANDS = {
    "fit": cmd_fit,
    "gof": cmd_gof,
    "scan": cmd_scan,
    "estimate": cmd_estimate,
    "normal-form": cmd_normal_form,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("table", nargs="?", help="input table (long CSV, or matrix layout with --matrix)")
    common.add_argument("--example", action="store_true", help="use the bundled 22-category table")
    common.add_argument("--matrix", action="store_true", help="input is an upper-triangular whitespace matrix")
    common.add_argument("--n", type=int, help="number of categories (default: inferred)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "tsv"), default="json")
    common.add_argument("--digits", type=int, default=2, help="significant digits in TSV output")

    fitting = _Parser(add_help=False)
    fitting.add_argument("--model", default="no-proximity", help="no-proximity or pair:r,s")
    fitting.add_argument("--tol", type=float, default=FitConfig.tolerance)
    fitting.add_argument("--max-iter", type=int, default=FitConfig.max_iterations)
    fitting.add_argument("--expected", help="expected-table CSV (chr_a,chr_b,expected) instead of fitting")

    p = _Parser(prog="pairfiber", description="Exact conditional inference for pairwise exchange tables.")
    p.add_argument("--version", action="version", version=f"pairfiber {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("fit", parents=[common, fitting], help="fit a log-linear model")

    g = sub.add_parser("gof", parents=[common, fitting], help="MCMC goodness-of-fit test")
    g.add_argument("--seed", type=int, default=ChainConfig.seed)
    g.add_argument("--burn-in", type=int, default=None, help="default: one thinning interval")
    g.add_argument("--thin", type=int, default=ChainConfig.thinning)
    g.add_argument("--samples", type=int, default=ChainConfig.samples)
    g.add_argument("--target", choices=TARGETS, default=ChainConfig.target)
    g.add_argument("--stream", action="store_true", help="include every sampled statistic")
    g.add_argument("--exact", action="store_true", help="also enumerate the fiber for the exact p-value")
    g.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration cap for --exact")

    s = sub.add_parser("scan", parents=[common, fitting], help="likelihood-ratio scan of all pairs")
    s.add_argument("--tests", type=int, default=None, help="Bonferroni multiplier (default: number of pairs)")
    s.add_argument("--pair", help="report only this pair, 'r,s'")

    e = sub.add_parser("estimate", parents=[common, fitting], help="fiber-size and ellipsoid estimates")
    e.add_argument("--r-squared", type=float, default=None, help="default: observed chi-square")
    e.add_argument("--binom", type=int, nargs=2, default=(27706, 30), metavar=("N", "K"))

    nf = sub.add_parser("normal-form", parents=[common], help="reduce a table to its sorted normal form")
    nf.add_argument("--seed", type=int, default=0)
    nf.add_argument("--random-order", action="store_true", help="visit quadruples in seeded random order")
    return p


def _config(args) -> dict:
    skip = {"command", "out", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _tsv(report: dict, digits: int) -> str:
    block_name = report["command"].replace("-", "_")
    block = report[block_name]
    lines = []
    if block_name == "fit":
        lines.append("chr_a\tchr_b\tfitted")
        lines += [f"{j}\t{k}\t{_sig(v, digits)}" for j, k, v in block["fitted"]]
    elif block_name == "scan":
        lines.append("chr_a\tchr_b\tstatistic\tp_raw\tp_adjusted\tflag")
        for r in block["rows"]:
            j, k = r["pair"]
            vals = (_sig(r[c], digits) for c in ("statistic", "p_raw", "p_adjusted"))
            lines.append("\t".join([str(j), str(k), *vals, r["flag"] or ""]))
    elif block_name == "normal_form":
        lines.append("chr_a\tchr_b\tcount")
        lines += [f"{j}\t{k}\t{v}" for j, k, v in block["table"]]
    elif block_name == "estimate":
        lines.append("quantity\tlog10\tscientific")
        for name, v in block.items():
            if isinstance(v, dict) and "log10" in v:
                lines.append(f"{name}\t{_sig(v['log10'], digits + 3)}\t{v['scientific']}")
    else:
        for key, v in block.items():
            if not isinstance(v, (dict, list)):
                lines.append(f"{key}\t{_sig(v, digits) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def run(argv: list[str] | None = None) -> tuple[int, str, str]:
    """Run the CLI; returns ``(exit_code, stdout_text, stderr_text)``."""
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        t, source = _load(args)
        report = {
            "tool": "pairfiber",
            "version": __version__,
            "command": command,
            "seed": getattr(args, "seed", None),
            "config": _config(args),
            "input": _digest(t, source),
        }
        report.update(COMMANDS[command](args, t))
        report = _clean(report)
        if args.format == "tsv":
            text = _tsv(report, args.digits)
        else:
            text = json.dumps(report, indent=2, allow_nan=False) + "\n"
        if args.out:
            Path(args.out).write_text(text)
            return EXIT_OK, "", ""
        return EXIT_OK, text, ""
    except BoundaryError as exc:
        return _error(exc, EXIT_BOUNDARY, command)
    except FiberTooLarge as exc:
        return _error(exc, EXIT_CAP, command)
    except (UsageError, PairFiberError, OSError, ValueError) as exc:
        return _error(exc, EXIT_USAGE, command)


def _error(exc: Exception, code: int, command: str | None) -> tuple[int, str, str]:
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "command": command, "exit_code": code}}
    return code, "", json.dumps(err) + "\n"


def main(argv: list[str] | None = None) -> int:
    code, out, err = run(argv)
    if out:
        sys.stdout.write(out)
    if err:
        sys.stderr.write(err)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
