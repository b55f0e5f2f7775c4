"""Command-line interface: hypothesis tests, intervals, the bundled example,
and simulation grids, with table or JSON output."""

from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import math
import os
import sys
from pathlib import Path

from .classical import ahmed_ci, ahmed_test, baklizi_ci, gupta_li_ci, gupta_li_test, lr_test
from .generalized import MCConfig, PivotMethod, TestSpec, gci, gp_value
from .model import LOGNORMAL_MEAN, Dataset, ModelSpec, SampleSummary, summarize
from .outcomes import Alternative
from .rmrs import RMRS_SUMMARY_ROWS, rmrs_dataset
from .simulate import (ConfigError, cells_from_config, load_grid_config,
                       normalize_method, parse_grid_config, run_grid, write_csv,
                       CI_METHODS, METHOD_ORDER, TEST_METHODS)

SEED_ENV_VAR = "LNMEAN_SEED"

_GENERALIZED = {"gv-weighted": PivotMethod.WEIGHTED, "gv-umvue": PivotMethod.UMVUE}
_TWO_SIDED_ONLY = {"lrt", "gupta-li"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lnmean",
        description="Inference for the common mean of several lognormal populations "
                    "(and the general shared-mean normal family).")
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", help="hypothesis test for the common mean")
    _add_input_args(test)
    null = test.add_mutually_exclusive_group(required=True)
    null.add_argument("--phi0", type=float, help="null value on the original scale")
    null.add_argument("--mu0", type=float, help="null value on the log scale")
    test.add_argument("--alt", default="two-sided", choices=["less", "greater", "two-sided"])
    _add_mc_args(test)
    _add_format_arg(test)

    ci = sub.add_parser("ci", help="confidence interval for the common mean")
    _add_input_args(ci)
    ci.add_argument("--level", type=float, default=0.95)
    _add_mc_args(ci)
    _add_format_arg(ci)

    example = sub.add_parser("example", help="run the bundled RMRS example end to end")
    example.add_argument("--phi0", type=float, default=20000.0)
    example.add_argument("--level", type=float, default=0.95)
    example.add_argument("--reps", type=int, default=100_000)
    example.add_argument("--seed", type=int, default=None)
    _add_format_arg(example)

    simulate = sub.add_parser("simulate", help="run a simulation grid from a config file")
    simulate.add_argument("--config", required=True,
                          help="TOML or JSON grid config (bundled name or path)")
    simulate.add_argument("--output", help="write CSV here instead of stdout")
    simulate.add_argument("--dry-run", action="store_true",
                          help="print the cell and replicate counts, run nothing")
    simulate.add_argument("--workers", type=int, default=1)
    return parser


def _add_input_args(parser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", metavar="CSV",
                        help="raw observations, header 'group,value'")
    source.add_argument("--summary", metavar="CSV",
                        help="group summaries, header 'group,n,mean_log,var_log' "
                             "(var_log uses the n-1 divisor)")
    source.add_argument("--example", choices=["rmrs"], help="bundled dataset")
    parser.add_argument("--model-a", type=float, default=None,
                        help="mean-structure constant a (default: lognormal mean, a=1)")
    parser.add_argument("--model-b", type=float, default=None,
                        help="mean-structure constant b (default: lognormal mean, b=-0.5)")


def _add_mc_args(parser) -> None:
    parser.add_argument("--method", default="all",
                        help="comma-separated methods, or 'all' "
                             f"(known: {', '.join(METHOD_ORDER)})")
    parser.add_argument("--reps", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=None,
                        help=f"Monte Carlo seed (default: ${SEED_ENV_VAR} or 0)")


def _add_format_arg(parser) -> None:
    parser.add_argument("--format", default="table", choices=["table", "json"])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"test": _cmd_test, "ci": _cmd_ci,
               "example": _cmd_example, "simulate": _cmd_simulate}[args.command]
    try:
        return handler(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


# ---------------------------------------------------------------------------
# dataset loading


def _resolve_seed(seed) -> int:
    if seed is not None:
        return seed
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _resolve_model(args) -> ModelSpec:
    if args.model_a is None and args.model_b is None:
        return LOGNORMAL_MEAN
    if args.model_a is None or args.model_b is None:
        raise ValueError("--model-a and --model-b must be given together")
    return ModelSpec(a=args.model_a, b=args.model_b)


def _load_dataset(args) -> tuple[list[str], Dataset]:
    model = _resolve_model(args)
    if args.example is not None:
        if (args.model_a, args.model_b) != (None, None):
            raise ValueError("the bundled example fixes the lognormal-mean model")
        return list(label for label, *_ in RMRS_SUMMARY_ROWS), rmrs_dataset()
    if args.summary is not None:
        labels, groups = _read_summary_csv(args.summary)
        return labels, Dataset(groups=tuple(groups), model=model)
    labels, raw_groups = _read_raw_csv(args.input)
    ds = summarize(raw_groups, model=model, log_transform=model.is_lognormal_mean)
    return labels, ds


def _read_raw_csv(path) -> tuple[list[str], list[list[float]]]:
    groups: dict[str, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader, path, ("group", "value"))
        for line, row in enumerate(reader, start=2):
            label = (row["group"] or "").strip()
            if not label:
                raise ValueError(f"{path}:{line}: empty group label")
            try:
                value = float(row["value"])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{line}: bad value {row['value']!r}") from None
            groups.setdefault(label, []).append(value)
    if not groups:
        raise ValueError(f"{path}: no data rows")
    return list(groups), list(groups.values())


def _read_summary_csv(path) -> tuple[list[str], list[SampleSummary]]:
    labels: list[str] = []
    groups: list[SampleSummary] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader, path, ("group", "n", "mean_log", "var_log"))
        for line, row in enumerate(reader, start=2):
            try:
                labels.append((row["group"] or "").strip())
                groups.append(SampleSummary(n=int(row["n"]), mean=float(row["mean_log"]),
                                            variance=float(row["var_log"])))
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    if not groups:
        raise ValueError(f"{path}: no data rows")
    return labels, groups


def _require_columns(reader, path, names) -> None:
    have = reader.fieldnames or ()
    missing = [name for name in names if name not in have]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")


# ---------------------------------------------------------------------------
# method selection


def _resolve_methods(requested: str, ds: Dataset, capability: frozenset,
                     alternative: Alternative | None = None) -> list[str]:
    wanted = [item for item in (piece.strip() for piece in requested.split(",")) if item]
    if not wanted:
        raise ValueError("no methods requested")
    if len(wanted) == 1 and wanted[0].lower() == "all":
        names = [name for name in METHOD_ORDER if name in capability]
        if not ds.model.is_lognormal_mean:
            names = [name for name in names if name in _GENERALIZED]
        if ds.k != 2:
            names = [name for name in names if name != "gupta-li"]
        if alternative is not None and alternative is not Alternative.TWO_SIDED:
            names = [name for name in names if name not in _TWO_SIDED_ONLY]
        return names
    names = [normalize_method(name) for name in wanted]
    for name in names:
        if name not in capability:
            kind = "test" if capability is TEST_METHODS else "confidence interval"
            raise ValueError(f"method {name!r} has no {kind}")
        if name not in _GENERALIZED and not ds.model.is_lognormal_mean:
            raise ValueError(f"method {name!r} requires the lognormal-mean model")
        if name == "gupta-li" and ds.k != 2:
            raise ValueError("gupta-li requires exactly two groups")
        if alternative is not None and alternative is not Alternative.TWO_SIDED \
                and name in _TWO_SIDED_ONLY:
            raise ValueError(f"method {name!r} supports the two-sided alternative only")
    return names


# ---------------------------------------------------------------------------
# test / ci / example


def _null_values(args, model: ModelSpec) -> tuple[float, float | None]:
    if args.phi0 is not None:
        if not model.is_lognormal_mean:
            raise ValueError("--phi0 applies to the lognormal-mean model; use --mu0")
        if args.phi0 <= 0:
            raise ValueError("phi0 must be positive")
        return math.log(args.phi0), args.phi0
    phi0 = math.exp(args.mu0) if model.is_lognormal_mean else None
    return args.mu0, phi0


def _test_results(ds: Dataset, methods, mu0: float, phi0: float | None,
                  alternative: Alternative, reps: int, seed: int) -> list[dict]:
    results = []
    for name in methods:
        if name in _GENERALIZED:
            cfg = MCConfig(reps=reps, seed=seed, method=_GENERALIZED[name])
            outcome = gp_value(ds, TestSpec(mu0=mu0, alternative=alternative), cfg)
        elif name == "lrt":
            outcome = lr_test(ds, phi0)
        elif name == "ahmed":
            outcome = ahmed_test(ds, phi0, alternative)
        else:
            outcome = gupta_li_test(ds, phi0)
        results.append({
            "method": name,
            "p_value": outcome.p_value,
            "mc_std_error": outcome.mc_std_error if name in _GENERALIZED else None,
            "statistic": outcome.statistic,
        })
    return results


def _ci_results(ds: Dataset, methods, level: float, reps: int, seed: int) -> list[dict]:
    results = []
    for name in methods:
        if name in _GENERALIZED:
            cfg = MCConfig(reps=reps, seed=seed, method=_GENERALIZED[name])
            interval = gci(ds, level, cfg)
        elif name == "ahmed":
            interval = ahmed_ci(ds, level)
        elif name == "baklizi":
            interval = baklizi_ci(ds, level)
        else:
            interval = gupta_li_ci(ds, level)
        if interval is None:
            results.append({"method": name, "empty": True})
            continue
        results.append({
            "method": name,
            "mu_lower": interval.lower,
            "mu_upper": interval.upper,
            "phi_lower": interval.phi_lower,
            "phi_upper": interval.phi_upper,
            "estimate": interval.estimate,
        })
    return results


def _group_entries(labels, ds: Dataset) -> list[dict]:
    return [
        {"label": label, "n": group.n, "mean": group.mean, "variance": group.variance}
        for label, group in zip(labels, ds.groups)
    ]


def _cmd_test(args) -> int:
    labels, ds = _load_dataset(args)
    alternative = Alternative.coerce(args.alt)
    mu0, phi0 = _null_values(args, ds.model)
    seed = _resolve_seed(args.seed)
    methods = _resolve_methods(args.method, ds, TEST_METHODS, alternative)
    report = {
        "command": "test",
        "model": {"a": ds.model.a, "b": ds.model.b},
        "groups": _group_entries(labels, ds),
        "mu0": mu0,
        "phi0": phi0,
        "alternative": alternative.value,
        "seed": seed,
        "reps": args.reps,
        "results": _test_results(ds, methods, mu0, phi0, alternative, args.reps, seed),
    }
    _emit(report, args.format, _render_test_table)
    return 0


def _cmd_ci(args) -> int:
    labels, ds = _load_dataset(args)
    if not 0.0 < args.level < 1.0:
        raise ValueError("level must be in (0, 1)")
    seed = _resolve_seed(args.seed)
    methods = _resolve_methods(args.method, ds, CI_METHODS)
    report = {
        "command": "ci",
        "model": {"a": ds.model.a, "b": ds.model.b},
        "groups": _group_entries(labels, ds),
        "level": args.level,
        "seed": seed,
        "reps": args.reps,
        "results": _ci_results(ds, methods, args.level, args.reps, seed),
    }
    _emit(report, args.format, _render_ci_table)
    return 0


def _cmd_example(args) -> int:
    ds = rmrs_dataset()
    if args.phi0 <= 0:
        raise ValueError("phi0 must be positive")
    if not 0.0 < args.level < 1.0:
        raise ValueError("level must be in (0, 1)")
    seed = _resolve_seed(args.seed)
    mu0 = math.log(args.phi0)
    test_methods = [name for name in METHOD_ORDER if name in TEST_METHODS]
    ci_methods = [name for name in METHOD_ORDER if name in CI_METHODS]
    report = {
        "command": "example",
        "dataset": "rmrs",
        "model": {"a": ds.model.a, "b": ds.model.b},
        "groups": [
            {"label": label, "n": n, "mean": mean, "variance_published": var,
             "variance": group.variance}
            for (label, n, mean, var), group in zip(RMRS_SUMMARY_ROWS, ds.groups)
        ],
        "phi0": args.phi0,
        "mu0": mu0,
        "level": args.level,
        "seed": seed,
        "reps": args.reps,
        "test_results": _test_results(ds, test_methods, mu0, args.phi0,
                                      Alternative.TWO_SIDED, args.reps, seed),
        "ci_results": _ci_results(ds, ci_methods, args.level, args.reps, seed),
    }
    if args.format == "json":
        print(json.dumps(report, indent=2))
        return 0
    lines = ["RMRS example (summary data, log scale)"]
    lines.append(f"  {'group':<18} {'n':>4} {'mean':>9} {'variance':>10} {'published':>10}")
    for entry in report["groups"]:
        lines.append(f"  {entry['label']:<18} {entry['n']:>4} {entry['mean']:>9.5f} "
                     f"{entry['variance']:>10.6f} {entry['variance_published']:>10.3f}")
    lines.append("")
    lines.append(_render_test_table(report))
    lines.append("")
    lines.append(_render_ci_table(report | {"results": report["ci_results"]}))
    print("\n".join(lines))
    return 0


def _emit(report: dict, fmt: str, renderer) -> None:
    if fmt == "json":
        print(json.dumps(report, indent=2))
    else:
        print(renderer(report))


def _render_test_table(report: dict) -> str:
    mu0 = report["mu0"]
    phi0 = report.get("phi0")
    null = f"mu0 = {mu0:g}" if phi0 is None else f"phi0 = {phi0:g} (mu0 = {mu0:.6f})"
    alt = report.get("alternative", "two-sided")
    lines = [
        f"Hypothesis test: {null}, alternative = {alt}",
        f"model: a = {report['model']['a']:g}, b = {report['model']['b']:g}; "
        f"seed = {report['seed']}, reps = {report['reps']}",
        "",
        f"  {'method':<14} {'p-value':>9} {'mc-se':>9} {'statistic':>11}",
    ]
    for row in report.get("results", report.get("test_results", [])):
        se = f"{row['mc_std_error']:.5f}" if row.get("mc_std_error") is not None else "-"
        stat = f"{row['statistic']:.4f}" if row.get("statistic") is not None else "-"
        lines.append(f"  {row['method']:<14} {row['p_value']:>9.4f} {se:>9} {stat:>11}")
    return "\n".join(lines)


def _render_ci_table(report: dict) -> str:
    lines = [
        f"Confidence intervals: level = {report['level']:g}; "
        f"seed = {report['seed']}, reps = {report['reps']}",
        "",
        f"  {'method':<14} {'mu scale':>22} {'original scale':>26} {'estimate':>11}",
    ]
    for row in report["results"]:
        if row.get("empty"):
            lines.append(f"  {row['method']:<14} {'(empty acceptance set)':>22}")
            continue
        mu_part = f"({row['mu_lower']:.4f}, {row['mu_upper']:.4f})"
        phi_part = f"({row['phi_lower']:.2f}, {row['phi_upper']:.2f})"
        est = f"{row['estimate']:.2f}" if row.get("estimate") is not None else "-"
        lines.append(f"  {row['method']:<14} {mu_part:>22} {phi_part:>26} {est:>11}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# simulate


def _load_config(path_str: str) -> dict:
    path = Path(path_str)
    if path.exists():
        return load_grid_config(path)
    if path.name == path_str:  # bare name: try the bundled configs
        resource = importlib.resources.files("lnmean").joinpath(path.name)
        if resource.is_file():
            kind = "json" if path.suffix.lower() == ".json" else "toml"
            return parse_grid_config(resource.read_text(encoding="utf-8"), kind,
                                     source=f"bundled {path.name}")
    raise FileNotFoundError(f"config file not found: {path_str}")


def _cmd_simulate(args) -> int:
    try:
        config = _load_config(args.config)
        cells = cells_from_config(config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.dry_run:
        total = sum(cell.outer_reps for cell in cells)
        print(f"{len(cells)} cells, {total} outer replicates "
              f"({cells[0].inner_reps if cells else 0} inner Monte Carlo reps each)")
        return 0
    results = run_grid(cells, workers=max(1, args.workers))
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            write_csv(results, fh)
    else:
        write_csv(results, sys.stdout)
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
