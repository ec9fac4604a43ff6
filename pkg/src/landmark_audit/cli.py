"""Command-line interface.

Subcommands: audit (manifest -> report), compare (audit JSON reports ->
trend table), power (sample-size calculation), simulate (spec ->
dataset files). Results go to stdout or --out; diagnostics go to
stderr. Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .audit import AuditConfig, AuditError, audit_dataset, compare_trends
from .ingest import ParseError, build_records, load_manifest
from .report import (
    RenderConfig,
    render_audit_table,
    render_trend_table,
    rows_from_doc,
)
from .simulate import load_simulation_spec, write_simulated_dataset
from .stats import PowerSpec, required_sample_size

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Flag/usage problems are validation errors (exit 1), not argparse's 2.
    def error(self, message: str):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="landmark-audit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    audit = sub.add_parser("audit", help="audit a dataset from a manifest")
    audit.add_argument("--manifest", required=True, help="dataset manifest JSON")
    audit.add_argument("--format", choices=("markdown", "csv", "json"),
                       default="markdown")
    audit.add_argument("--out", help="write the report here instead of stdout")
    audit.add_argument("--test", choices=("welch", "permutation"),
                       help="override the manifest's significance test")
    audit.add_argument("--alpha", type=float, help="override the manifest's alpha")
    audit.add_argument("--bonferroni", action="store_true",
                       help="divide alpha by the number of attributes")
    audit.add_argument("--seed", type=int,
                       help="override the manifest's seed (permutation test)")

    compare = sub.add_parser("compare", help="compare bias trends across reports")
    compare.add_argument("reports", nargs="+", help=">= 2 audit JSON reports")
    compare.add_argument("--format", choices=("markdown", "csv", "json"),
                         default="markdown")
    compare.add_argument("--out", help="write the trend table here instead of stdout")

    power = sub.add_parser("power", help="required per-group sample size")
    power.add_argument("--delta", type=float, required=True,
                       help="minimal detectable mean difference")
    power.add_argument("--sigma", type=float, required=True,
                       help="assumed common standard deviation")
    power.add_argument("--alpha", type=float, default=0.05,
                       help="two-sided significance level")
    power.add_argument("--power", type=float, default=0.8, help="target power")

    simulate = sub.add_parser("simulate", help="emit a planted-bias dataset")
    simulate.add_argument("--spec", required=True, help="simulation spec JSON")
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.add_argument("--seed", type=int, help="override the spec's seed")

    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def _cmd_audit(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    records, summary = build_records(manifest)
    config = AuditConfig(
        normalization=manifest.normalization,
        correspondence=manifest.correspondence,
        test=args.test if args.test is not None else manifest.test,
        alpha=args.alpha if args.alpha is not None else manifest.alpha,
        bonferroni=args.bonferroni or manifest.bonferroni,
        seed=args.seed if args.seed is not None else manifest.seed,
    )
    rows = audit_dataset(records, manifest.attribute_names, config)
    print(
        f"ingest: joined={summary.joined} missing_pred={summary.missing_pred} "
        f"missing_attr={summary.missing_attr} orphan_pred={summary.orphan_pred}",
        file=sys.stderr,
    )
    _emit(render_audit_table(rows, RenderConfig(format=args.format)), args.out)
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    if len(args.reports) < 2:
        raise _UsageError("compare needs at least 2 report files")
    rows = []
    for report_path in args.reports:
        text = Path(report_path).read_text(encoding="utf-8")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{report_path}: invalid JSON: {exc}") from None
        rows.extend(rows_from_doc(doc))
    comparisons = compare_trends(rows)
    _emit(render_trend_table(comparisons, RenderConfig(format=args.format)), args.out)
    return 0


def _cmd_power(args: argparse.Namespace) -> int:
    spec = PowerSpec(delta=args.delta, sigma=args.sigma,
                     alpha=args.alpha, power=args.power)
    print(required_sample_size(spec))
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = load_simulation_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    paths = write_simulated_dataset(spec, args.out)
    total = sum(a.n_with + a.n_without for a in spec.attributes)
    print(f"simulated {total} records for dataset {spec.dataset!r}", file=sys.stderr)
    for path in paths.values():
        print(path)
    return 0


_COMMANDS = {
    "audit": _cmd_audit,
    "compare": _cmd_compare,
    "power": _cmd_power,
    "simulate": _cmd_simulate,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ParseError, AuditError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
