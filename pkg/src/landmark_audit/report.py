"""Render audit rows and trend comparisons as markdown, CSV, or JSON.

Markdown and CSV show percent values rounded at the configured
precision; JSON always carries the unrounded numbers. Rendered deltas
are the unrounded delta rounded once - they are never recomputed from
rounded means, which can differ by one unit in the last digit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .audit import AttributeAuditRow, StratumResult, TrendComparison
from .stats import SampleSummary, TestResult

__all__ = [
    "RenderConfig",
    "render_audit_table",
    "render_trend_table",
    "rows_to_doc",
    "rows_from_doc",
]

REPORT_SCHEMA = "landmark-audit/report-v1"
TRENDS_SCHEMA = "landmark-audit/trends-v1"

_FORMATS = ("markdown", "csv", "json")

_SIGN_GLYPH = {"positive": "+", "negative": "-", "zero": "0", "unavailable": "NA"}


@dataclass(frozen=True)
class RenderConfig:
    format: str = "markdown"
    precision: int = 2
    thousands: bool = True  # separators in markdown counts only

    def __post_init__(self) -> None:
        if self.format not in _FORMATS:
            raise ValueError(f"unknown format {self.format!r}; expected {_FORMATS}")
        if self.precision < 0:
            raise ValueError(f"precision must be >= 0, got {self.precision}")


def _percent(value: float, precision: int, suffix: str) -> str:
    return f"{value * 100.0:.{precision}f}{suffix}"


def _count(n: int, thousands: bool) -> str:
    return f"{n:,}" if thousands else str(n)


def _row_cells(
    row: AttributeAuditRow, cfg: RenderConfig, thousands: bool, suffix: str
) -> list[str]:
    if not row.available:
        values = ["NA"] * 5
    else:
        assert row.with_ is not None and row.without is not None
        assert row.delta is not None
        values = [
            _percent(row.with_.summary.mean, cfg.precision, suffix),
            _count(row.with_.summary.n, thousands),
            _percent(row.without.summary.mean, cfg.precision, suffix),
            _count(row.without.summary.n, thousands),
            _percent(row.delta, cfg.precision, suffix),
        ]
    return [row.attribute, row.dataset, *values]


_AUDIT_COLUMNS = (
    "attribute",
    "dataset",
    "mean NME (w/)",
    "# samples (w/)",
    "mean NME (w/o)",
    "# samples (w/o)",
    "delta",
)


def _markdown_table(header: Sequence[str], body: Iterable[Sequence[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    for cells in body:
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _csv_table(header: Sequence[str], body: Iterable[Sequence[str]]) -> str:
    lines = [",".join(header)]
    for cells in body:
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def render_audit_table(rows: Sequence[AttributeAuditRow], cfg: RenderConfig) -> str:
    """Render rows in Table-1 column order; unavailable rows show NA."""
    if not rows:
        raise ValueError("no audit rows to render")
    if cfg.format == "json":
        return json.dumps(rows_to_doc(rows), indent=2) + "\n"
    if cfg.format == "markdown":
        body = [_row_cells(row, cfg, cfg.thousands, "%") for row in rows]
        return _markdown_table(_AUDIT_COLUMNS, body)
    header = (
        "attribute", "dataset", "mean_nme_with_pct", "n_with",
        "mean_nme_without_pct", "n_without", "delta_pct",
    )
    body = [_row_cells(row, cfg, False, "") for row in rows]
    return _csv_table(header, body)


def render_trend_table(
    comparisons: Sequence[TrendComparison], cfg: RenderConfig
) -> str:
    """Per-attribute delta signs by dataset plus the agreement verdict."""
    if not comparisons:
        raise ValueError("no trend comparisons to render")
    datasets: list[str] = []
    for comp in comparisons:
        for ds in comp.signs:
            if ds not in datasets:
                datasets.append(ds)
    if cfg.format == "json":
        doc = {
            "schema": TRENDS_SCHEMA,
            "datasets": datasets,
            "trends": [
                {
                    "attribute": comp.attribute,
                    "signs": {ds: comp.signs.get(ds, "unavailable") for ds in datasets},
                    "agreement": comp.agreement,
                }
                for comp in comparisons
            ],
        }
        return json.dumps(doc, indent=2) + "\n"
    header = ["attribute", *datasets, "agreement"]
    body = [
        [
            comp.attribute,
            *(_SIGN_GLYPH[comp.signs.get(ds, "unavailable")] for ds in datasets),
            "yes" if comp.agreement else "no",
        ]
        for comp in comparisons
    ]
    if cfg.format == "markdown":
        return _markdown_table(header, body)
    return _csv_table(header, body)


# ---------------------------------------------------------------------------
# JSON report schema (lossless round-trip of audit rows)
# ---------------------------------------------------------------------------

def _summary_to_json(stratum: StratumResult | None) -> dict[str, Any] | None:
    if stratum is None:
        return None
    s = stratum.summary
    return {"n": s.n, "mean": s.mean, "variance": s.variance}


def _test_to_json(test: TestResult | None) -> dict[str, Any] | None:
    if test is None:
        return None
    return {
        "method": test.method,
        "statistic": test.statistic,
        "p_value": test.p_value,
        "detail": test.detail,
        "degenerate": test.degenerate,
    }


def rows_to_doc(rows: Sequence[AttributeAuditRow]) -> dict[str, Any]:
    """Audit rows as a JSON-ready document with unrounded values."""
    datasets = {row.dataset for row in rows}
    return {
        "schema": REPORT_SCHEMA,
        "dataset": rows[0].dataset if len(datasets) == 1 else sorted(datasets),
        "rows": [
            {
                "attribute": row.attribute,
                "dataset": row.dataset,
                "status": row.status,
                "reason": row.reason,
                "with": _summary_to_json(row.with_),
                "without": _summary_to_json(row.without),
                "delta": row.delta,
                "test": _test_to_json(row.test),
                "significant": row.significant,
                "alpha": row.alpha,
                "excluded_missing_pred": row.excluded_missing_pred,
                "excluded_unknown_attr": row.excluded_unknown_attr,
            }
            for row in rows
        ],
    }


def _summary_from_json(obj: dict[str, Any] | None, label: str) -> StratumResult | None:
    if obj is None:
        return None
    variance = obj["variance"]
    return StratumResult(
        label,
        SampleSummary(
            n=int(obj["n"]),
            mean=float(obj["mean"]),
            variance=None if variance is None else float(variance),
        ),
    )


def _test_from_json(obj: dict[str, Any] | None) -> TestResult | None:
    if obj is None:
        return None
    detail = obj["detail"]
    return TestResult(
        method=str(obj["method"]),
        statistic=float(obj["statistic"]),
        p_value=float(obj["p_value"]),
        detail=None if detail is None else float(detail),
        degenerate=bool(obj.get("degenerate", False)),
    )


def rows_from_doc(doc: dict[str, Any]) -> list[AttributeAuditRow]:
    """Rebuild audit rows from a report document (inverse of rows_to_doc)."""
    if not isinstance(doc, dict) or doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(
            f"not an audit report document (expected schema {REPORT_SCHEMA!r})"
        )
    rows = []
    for obj in doc["rows"]:
        delta = obj["delta"]
        rows.append(
            AttributeAuditRow(
                attribute=str(obj["attribute"]),
                dataset=str(obj["dataset"]),
                status=str(obj["status"]),
                with_=_summary_from_json(obj["with"], "with"),
                without=_summary_from_json(obj["without"], "without"),
                delta=None if delta is None else float(delta),
                test=_test_from_json(obj["test"]),
                significant=obj["significant"],
                alpha=float(obj["alpha"]),
                excluded_missing_pred=int(obj["excluded_missing_pred"]),
                excluded_unknown_attr=int(obj["excluded_unknown_attr"]),
                reason=obj.get("reason"),
            )
        )
    return rows
