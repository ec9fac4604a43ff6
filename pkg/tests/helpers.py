"""Shared test fixtures: planted-error records and row construction."""

from __future__ import annotations

from landmark_audit.audit import AttributeAuditRow, FaceRecord, StratumResult
from landmark_audit.metrics import LandmarkSet, NormalizationSpec
from landmark_audit.stats import SampleSummary, TestResult

# Two-point face: eye centers 100 px apart, so inter-ocular d = 100.
INTEROCULAR_PAIR = NormalizationSpec.interocular([0], [1])

GT_PAIR = LandmarkSet.from_pairs("pair2", ((0.0, 0.0), (100.0, 0.0)))


def make_record(
    rec_id: str,
    error: float | None,
    attributes: dict[str, str],
    dataset: str = "test",
) -> FaceRecord:
    """Record whose NME under INTEROCULAR_PAIR is exactly `error`.

    error=None encodes a detection failure (no prediction).
    """
    if error is None:
        pred = None
    else:
        pred = LandmarkSet.from_pairs(
            "pair2", ((2.0 * error * 100.0, 0.0), (100.0, 0.0))
        )
    return FaceRecord(
        id=rec_id, dataset=dataset, gt=GT_PAIR, pred=pred, attributes=attributes
    )


def make_row(
    attribute: str,
    dataset: str,
    delta: float | None,
    n_with: int = 100,
    n_without: int = 100,
    alpha: float = 0.001,
) -> AttributeAuditRow:
    """Minimal audit row for trend-comparison tests; delta=None is NA."""
    if delta is None:
        return AttributeAuditRow(
            attribute=attribute,
            dataset=dataset,
            status="unavailable",
            with_=None,
            without=None,
            delta=None,
            test=None,
            significant=None,
            alpha=alpha,
            excluded_missing_pred=0,
            excluded_unknown_attr=0,
            reason="attribute not annotated",
        )
    mean_without = 0.04
    return AttributeAuditRow(
        attribute=attribute,
        dataset=dataset,
        status="ok",
        with_=StratumResult("with", SampleSummary(n_with, mean_without + delta, 1e-4)),
        without=StratumResult("without", SampleSummary(n_without, mean_without, 1e-4)),
        delta=delta,
        test=TestResult("welch-t", 1.0, 0.5, 10.0),
        significant=False,
        alpha=alpha,
        excluded_missing_pred=0,
        excluded_unknown_attr=0,
    )
