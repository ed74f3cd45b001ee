"""Command-line entry point: ``par-nonlocal-pucci <command> [flags]``.

Exit codes: 0 all hard checks pass, 1 usage or configuration error,
2 a hard check failed, 3 a quadrature missed its tolerance or an inf-convolution
minimizer hit the search boundary.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
from rich.console import Console
from rich.table import Table

from . import __version__
from .config import COMMANDS, FORMATS, RunConfig, load_config
from .counterexample import (
    CEReport,
    CERow,
    CounterexampleParams,
    mminus_field,
    run_report,
    u_N_consistency,
    u_N_profile,
)
from .debug import DebugLevel, debug_error, debug_info, debug_trace, is_enabled, log_snapshot
from .errors import ConfigError, DomainError, QuadratureAccuracyError, ResolutionError
from .fields import InfConvParams, bump, neg_bump, plateau, scaled
from .nonlocal_ops import (
    abp_ratio,
    hessian_consistency,
    infconv_suite,
    inversion_points,
    parallel_map,
    riesz_inf_ratio,
    riesz_inversion,
)
from .quad import fractional_hessian, radial_reduce_hessian
from .special import KernelParams, compute_M0, constants, kernel_ratio, kernel_ratio_limits, m0_expression

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2
EXIT_ACCURACY = 3

# u_N battery parameters when the configured (n, sigma) admit no member of the family
BATTERY_FALLBACK_SIGMA = {2: 1.6, 3: 1.8}

# verify-riesz presets: inversion at n=2, sigma=1.5; infimum relation at n=3, sigma=1
INVERSION_PRESET = (2, 1.5)
INF_RATIO_PRESET = (3, 1.0)


class SuiteResult:
    """Rows, column order and verdict of one suite run."""

    def __init__(self, title: str, columns: Sequence[str], rows: list[dict[str, Any]], passed: bool) -> None:
        self.title = title
        self.columns = list(columns)
        self.rows = rows
        self.passed = passed
        self.extra: dict[str, Any] = {}


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def _suite_constants(config: RunConfig) -> SuiteResult:
    rows = []
    for n in (2, 3, 4, 5):
        at_zero, at_two = kernel_ratio_limits(n)
        for sigma in np.round(np.arange(0.1, 2.0, 0.1), 10):
            params = KernelParams(n=n, sigma=float(sigma))
            consts = constants(params)
            m0 = compute_M0(n, float(sigma))
            rows.append(
                {
                    "n": n,
                    "sigma": float(sigma),
                    "a_pos": consts.a_pos,
                    "a_neg": consts.a_neg,
                    "a_neg_dual": consts.a_neg_dual,
                    "M0": m0,
                    "identity_residual": consts.identity_residual(params),
                    "m0_residual": abs(m0_expression(n, float(sigma), m0) - 0.5),
                    "ratio_low": kernel_ratio(n, 1e-6) / at_zero - 1.0,
                    "ratio_high": kernel_ratio(n, 2.0 - 1e-6) / at_two - 1.0,
                }
            )
    passed = all(
        r["identity_residual"] <= 1e-12
        and r["m0_residual"] <= 1e-12
        and abs(r["ratio_low"]) <= 1e-4
        and abs(r["ratio_high"]) <= 1e-4
        for r in rows
    )
    columns = ["n", "sigma", "a_pos", "a_neg", "a_neg_dual", "M0", "identity_residual", "m0_residual"]
    return SuiteResult("normalizing constants", columns, rows, passed)


def _battery_params(config: RunConfig) -> CounterexampleParams | None:
    try:
        return config.counterexample_params()[0]
    except DomainError as exc:
        sigma = BATTERY_FALLBACK_SIGMA.get(config.n)
        if sigma is None:
            debug_info("CLI", f"no u_N battery at n={config.n}: {exc}")
            return None
        debug_info("CLI", f"u_N battery falls back to sigma={sigma}: {exc}")
        lam_hi = max(config.Lam, (1.0 + sigma) * config.lam)
        return CounterexampleParams(n=config.n, sigma=sigma, lam=config.lam, Lam=lam_hi)


def _suite_hessian(config: RunConfig) -> SuiteResult:
    params = config.kernel_params()
    spec = config.quad_spec()
    n = params.n
    u = bump(n)
    points = [np.zeros(n), np.r_[0.3, np.zeros(n - 1)], np.r_[0.5, 0.2, np.zeros(n - 2)]]

    def check(x: np.ndarray) -> dict[str, Any]:
        full = fractional_hessian(u, x, params, spec)
        fast = radial_reduce_hessian(u, x, params, spec)
        gap = float(np.linalg.norm(full.value - fast.value))
        consistency = hessian_consistency(u, x, params, spec) if not np.any(x) else None
        return {
            "field": u.name,
            "x": " ".join(f"{c:g}" for c in x),
            "trace": float(np.trace(full.value)),
            "err_bound": full.err_bound,
            "radial_gap": gap,
            "radial_budget": full.err_bound + fast.err_bound,
            "consistency_rel": math.nan if consistency is None else consistency.relative,
            "passed": gap <= full.err_bound + fast.err_bound and (consistency is None or consistency.passed),
        }

    rows = parallel_map(check, points, config.workers)
    ce = _battery_params(config)
    if ce is not None:
        for rep in u_N_consistency(ce, spec, workers=config.workers):
            rows.append(
                {
                    "field": f"u_N(N={ce.N})",
                    "x": " ".join(f"{c:g}" for c in rep.x),
                    "trace": float(np.trace(rep.rhs)),
                    "err_bound": rep.budget,
                    "interp_err": rep.interp_err,
                    "consistency_rel": rep.relative,
                    "discrepancy": rep.discrepancy,
                    "passed": rep.passed,
                }
            )
    columns = [
        "field",
        "x",
        "trace",
        "err_bound",
        "radial_gap",
        "radial_budget",
        "interp_err",
        "discrepancy",
        "consistency_rel",
        "passed",
    ]
    return SuiteResult("fractional Hessian consistency", columns, rows, all(r["passed"] for r in rows))


def _suite_riesz(config: RunConfig) -> SuiteResult:
    spec = config.quad_spec()
    inv_params = KernelParams(
        n=INVERSION_PRESET[0], sigma=INVERSION_PRESET[1], lam=config.lam, Lam=config.Lam, eta=config.eta
    )
    ratio_params = KernelParams(
        n=INF_RATIO_PRESET[0], sigma=INF_RATIO_PRESET[1], lam=config.lam, Lam=config.Lam, eta=config.eta
    )
    inversion = riesz_inversion(
        bump(inv_params.n), inversion_points(inv_params.n), inv_params, spec, workers=config.workers
    )
    rows: list[dict[str, Any]] = [
        {
            "check": "inversion",
            "n": inv_params.n,
            "sigma": inv_params.sigma,
            "x": f"{x[0]:.4f} {x[1]:.4f}",
            "value": rec,
            "target": tgt,
            "rel_error": rel,
        }
        for x, rec, tgt, rel in zip(
            inversion.points, inversion.recovered, inversion.v_values, inversion.rel_errors
        )
    ]
    ratio_checks = []
    n = ratio_params.n
    for field in (neg_bump(n), scaled(plateau(n), -1.0)):
        report = riesz_inf_ratio(field, 1.0, ratio_params, spec, seed=config.seed, workers=config.workers)
        ratio_checks.append(report.passed)
        rows.append(
            {
                "check": f"inf_ratio[{field.name}]",
                "n": n,
                "sigma": ratio_params.sigma,
                "x": f"M0={report.m0:.4f}",
                "value": report.inf_outside,
                "target": 0.5 * report.inf_inside,
                "rel_error": report.margin,
            }
        )
    passed = inversion.passed and all(ratio_checks)
    columns = ["check", "n", "sigma", "x", "value", "target", "rel_error"]
    return SuiteResult("Riesz potential", columns, rows, passed)


def _suite_infconv(config: RunConfig) -> SuiteResult:
    params = config.kernel_params()
    spec = config.quad_spec()
    report = infconv_suite(
        neg_bump(params.n),
        InfConvParams(h=0.05),
        params,
        spec,
        seed=config.seed,
        workers=config.workers,
    )
    rows = [{"check": name, "passed": ok} for name, ok in report.checks.items()]
    rows += [
        {"check": f"cauchy[point={r['point']}]", "passed": r["d2"] <= r["d1"] + r["err"], **r}
        for r in report.cauchy_rows
    ]
    result = SuiteResult("inf-convolution", ["check", "passed", "d1", "d2", "err"], rows, report.passed)
    result.extra = {"report": report.to_dict()}
    return result


def _suite_counterexample(config: RunConfig) -> SuiteResult:
    ce = config.counterexample_params()
    report: CEReport = run_report(ce, config.quad_spec(), workers=config.workers)
    rows = [{col: getattr(row, col) for col in CERow.CSV_COLUMNS} for row in report.rows]
    result = SuiteResult("ABP counterexample", list(CERow.CSV_COLUMNS), rows, report.passed)
    result.extra = {"report": report.to_dict()}
    if report.accuracy_failures:
        result.extra["accuracy_failures"] = report.accuracy_failures
    return result


def _suite_abp(config: RunConfig) -> SuiteResult:
    ce = config.counterexample_params()
    kp = ce[0].kernel_params()
    p = ce[0].p0 if config.p is None else config.p
    spec = config.quad_spec()

    def row(params: CounterexampleParams) -> dict[str, Any]:
        un = u_N_profile(params, spec)
        report = abp_ratio(un.field(), mminus_field(params), p, kp, spec, seed=config.seed, outside_tol=un.err_bound)
        return {"N": params.N, **report.to_dict()}

    rows = parallel_map(row, ce, config.workers)
    columns = ["N", "p", "lhs", "f_norm", "factor", "ratio", "outside_nonnegative", "samples", "outside_samples"]
    # the ABP constant is not explicit, so this suite reports data only
    return SuiteResult(f"ABP quotient at p={p:.6g}", columns, rows, True)


SUITES = {
    "constants": _suite_constants,
    "verify-hessian": _suite_hessian,
    "verify-riesz": _suite_riesz,
    "verify-infconv": _suite_infconv,
    "counterexample": _suite_counterexample,
    "abp-check": _suite_abp,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.14e" % float(value)
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return f if math.isfinite(f) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_csv(path: Path, result: SuiteResult) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_format_cell(row.get(col, "")) for col in result.columns])


def write_json(path: Path, config: RunConfig, result: SuiteResult) -> None:
    payload = {
        "command": config.command,
        "params": config.to_dict(),
        "results": result.rows,
        "pass": result.passed,
        "version": __version__,
        **result.extra,
    }
    path.write_text(json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _print_summary(console: Console, result: SuiteResult) -> None:
    table = Table(title=result.title)
    for col in result.columns:
        table.add_column(col, justify="right")
    for row in result.rows:
        cells = []
        for col in result.columns:
            value = row.get(col, "")
            cells.append(f"{value:.6g}" if isinstance(value, float) else str(value))
        table.add_row(*cells)
    console.print(table)
    verdict = "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]"
    console.print(f"{result.title}: {verdict}")


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def run(config: RunConfig, console: Console | None = None) -> int:
    """Execute the configured suite, write its report and return the exit status."""
    console = console or Console()
    debug_trace("CLI", f"config {config.to_dict()}")
    try:
        result = SUITES[config.command](config)
    except DomainError as exc:
        debug_error("CLI", f"{config.command}: {exc}")
        console.print(f"[red]error:[/red] {exc}")
        return EXIT_USAGE
    except (QuadratureAccuracyError, ResolutionError) as exc:
        debug_error("CLI", f"{config.command}: {exc}")
        console.print(f"[red]accuracy:[/red] {exc}")
        return EXIT_ACCURACY
    if is_enabled(DebugLevel.TRACE):
        log_snapshot(result.title, json.dumps(_json_safe(result.rows), indent=2, sort_keys=True))
    if config.out is not None:
        path = Path(config.out)
        if config.format == "csv":
            write_csv(path, result)
        else:
            write_json(path, config, result)
        debug_info("CLI", f"wrote {config.format} report to {path}")
    if not config.quiet:
        _print_summary(console, result)
    if result.extra.get("accuracy_failures"):
        return EXIT_ACCURACY
    return EXIT_OK if result.passed else EXIT_FAILED


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    defaults = RunConfig()
    parser = argparse.ArgumentParser(
        prog="par-nonlocal-pucci",
        description="Verification suites for fractional Hessians, Pucci operators and Riesz potentials.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} suite")
        cmd.add_argument("--config", help="JSON RunConfig; flags override it")
        cmd.add_argument("--n", type=int, help=f"dimension (default {defaults.n})")
        cmd.add_argument("--sigma", type=float, help=f"operator order (default {defaults.sigma})")
        cmd.add_argument("--lambda", dest="lam", type=float, help=f"lower ellipticity bound (default {defaults.lam})")
        cmd.add_argument("--Lambda", dest="Lam", type=float, help=f"upper ellipticity bound (default {defaults.Lam})")
        cmd.add_argument("--eta", type=float, help=f"lower matrix cutoff (default {defaults.eta})")
        cmd.add_argument("--tol", type=float, help=f"quadrature tolerance (default {defaults.tol})")
        cmd.add_argument("--r-inner", dest="r_inner", type=float, help="fixed inner quadrature radius (default auto)")
        cmd.add_argument("--r-outer", dest="r_outer", type=float, help="fixed tail radius (default auto)")
        cmd.add_argument("--angular-points", dest="angular_points", type=int, help="sphere rule size (default auto)")
        cmd.add_argument(
            "--N", type=_int_list, help=f"comma-separated N ladder (default {','.join(map(str, defaults.N))})"
        )
        cmd.add_argument("--p", type=float, help="integrability exponent for abp-check (default p0)")
        cmd.add_argument("--out", help="report path (default: no file)")
        cmd.add_argument("--format", choices=FORMATS, help=f"report format (default {defaults.format})")
        cmd.add_argument("--seed", type=int, help=f"sampling seed (default {defaults.seed})")
        cmd.add_argument("--workers", type=int, help=f"worker threads (default {defaults.workers})")
        cmd.add_argument("--quiet", action="store_true", default=None, help="suppress the summary table")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config) if args.config else RunConfig()
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    return base.merged(overrides)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    console = Console()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        config = config_from_args(args)
        if config.command in ("counterexample", "abp-check"):
            config.counterexample_params()
        else:
            config.kernel_params()
    except (ConfigError, DomainError) as exc:
        console.print(f"[red]error:[/red] {exc}")
        return EXIT_USAGE
    return run(config, console)


if __name__ == "__main__":
    sys.exit(main())
