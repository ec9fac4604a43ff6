"""Attribute-stratified error audit.

Stratifies per-face NME by appearance attributes, produces one audit
row per attribute (group means, sample counts, delta, significance),
and compares bias direction across datasets. Delta convention is
mean(with) - mean(without), computed from unrounded means.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .metrics import (
    CorrespondenceMap,
    LandmarkSet,
    NormalizationSpec,
    compute_nme,
    map_landmarks,
)
from .stats import SampleSummary, TestResult, permutation_test, summarize, welch_t_test

__all__ = [
    "WITH",
    "WITHOUT",
    "UNKNOWN",
    "FaceRecord",
    "StratumResult",
    "AttributeAuditRow",
    "TrendComparison",
    "AuditConfig",
    "AuditError",
    "StratumTooSmallError",
    "stratify",
    "audit_attribute",
    "audit_dataset",
    "compare_trends",
]

# Tri-state attribute values. CelebA-style strata do not always cover a
# dataset, so records outside both strata stay representable.
WITH = "with"
WITHOUT = "without"
UNKNOWN = "unknown"

_TRI_STATE = frozenset((WITH, WITHOUT, UNKNOWN))

# |delta| below this band counts as sign "zero" so float noise cannot
# flip trend agreement.
DEFAULT_ZERO_BAND = 1e-12


class AuditError(ValueError):
    """Audit could not be computed for the given records/config."""


class StratumTooSmallError(AuditError):
    """A stratum retained fewer than two predicted records."""

    def __init__(self, attribute: str, stratum: str, size: int):
        self.attribute = attribute
        self.stratum = stratum
        self.size = size
        super().__init__(
            f"attribute {attribute!r}: stratum {stratum!r} has {size} "
            "predicted record(s), need >= 2"
        )


@dataclass(frozen=True)
class FaceRecord:
    """One evaluated face.

    pred is None when the detector produced no landmarks for this face.
    attributes maps attribute name to "with"/"without"/"unknown";
    names absent from the mapping read as unknown.
    """

    id: str
    dataset: str
    gt: LandmarkSet
    pred: LandmarkSet | None
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, value in self.attributes.items():
            if value not in _TRI_STATE:
                raise ValueError(
                    f"record {self.id!r}: attribute {name!r} has value {value!r}, "
                    f"expected one of {sorted(_TRI_STATE)}"
                )

    def attribute_value(self, name: str) -> str:
        return self.attributes.get(name, UNKNOWN)


@dataclass(frozen=True)
class StratumResult:
    label: str  # "with" or "without"
    summary: SampleSummary


@dataclass(frozen=True)
class AttributeAuditRow:
    """One audit table row (one attribute on one dataset).

    status "unavailable" marks rows that could not be computed (e.g. a
    dataset without the attribute annotation); their value fields are
    None and reason says why.
    """

    attribute: str
    dataset: str
    status: str  # "ok" | "unavailable"
    with_: StratumResult | None
    without: StratumResult | None
    delta: float | None
    test: TestResult | None
    significant: bool | None
    alpha: float
    excluded_missing_pred: int
    excluded_unknown_attr: int
    reason: str | None = None

    @property
    def available(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class TrendComparison:
    """Cross-dataset delta signs for one attribute.

    signs maps dataset -> "negative" | "zero" | "positive" | "unavailable".
    agreement is True iff at least two datasets have an available sign
    and all available signs are identical.
    """

    attribute: str
    signs: Mapping[str, str]
    agreement: bool


@dataclass(frozen=True)
class AuditConfig:
    """Everything audit_attribute needs besides the records."""

    normalization: NormalizationSpec
    correspondence: CorrespondenceMap | None = None
    test: str = "welch"  # "welch" | "permutation"
    alpha: float = 0.001
    bonferroni: bool = False
    permutation_mode: str = "montecarlo"
    permutation_iterations: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.test not in ("welch", "permutation"):
            raise ValueError(f"unknown test {self.test!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")


def stratify(
    records: Sequence[FaceRecord], attribute: str
) -> tuple[list[FaceRecord], list[FaceRecord], list[FaceRecord]]:
    """Three-way partition by attribute value, order preserved."""
    if not attribute:
        raise ValueError("attribute name must be non-empty")
    with_group: list[FaceRecord] = []
    without_group: list[FaceRecord] = []
    unknown_group: list[FaceRecord] = []
    for rec in records:
        value = rec.attribute_value(attribute)
        if value == WITH:
            with_group.append(rec)
        elif value == WITHOUT:
            without_group.append(rec)
        else:
            unknown_group.append(rec)
    return with_group, without_group, unknown_group


def _record_error(rec: FaceRecord, config: AuditConfig) -> float:
    pred = rec.pred
    assert pred is not None
    try:
        if pred.scheme != rec.gt.scheme:
            if config.correspondence is None:
                raise AuditError(
                    f"pred scheme {pred.scheme!r} differs from gt scheme "
                    f"{rec.gt.scheme!r} and no correspondence map is configured"
                )
            pred = map_landmarks(pred, config.correspondence)
        return compute_nme(pred, rec.gt, config.normalization)
    except AuditError:
        raise
    except ValueError as exc:
        raise AuditError(f"record {rec.id!r}: {exc}") from exc


def _predicted_errors(
    records: Sequence[FaceRecord], config: AuditConfig
) -> tuple[list[tuple[FaceRecord, float]], int]:
    """Per-record NME for records with predictions; count of those without."""
    scored: list[tuple[FaceRecord, float]] = []
    missing = 0
    for rec in records:
        if rec.pred is None:
            missing += 1
        else:
            scored.append((rec, _record_error(rec, config)))
    return scored, missing


def _run_test(with_errors: list[float], without_errors: list[float],
              config: AuditConfig) -> TestResult:
    if config.test == "welch":
        return welch_t_test(with_errors, without_errors)
    return permutation_test(
        with_errors,
        without_errors,
        mode=config.permutation_mode,
        iterations=config.permutation_iterations,
        seed=config.seed,
    )


def _audit_scored(
    scored: Sequence[tuple[FaceRecord, float]],
    missing_pred: int,
    dataset: str,
    attribute: str,
    config: AuditConfig,
    alpha_applied: float,
) -> AttributeAuditRow:
    with_errors: list[float] = []
    without_errors: list[float] = []
    unknown = 0
    for rec, err in scored:
        value = rec.attribute_value(attribute)
        if value == WITH:
            with_errors.append(err)
        elif value == WITHOUT:
            without_errors.append(err)
        else:
            unknown += 1
    if len(with_errors) < 2:
        raise StratumTooSmallError(attribute, WITH, len(with_errors))
    if len(without_errors) < 2:
        raise StratumTooSmallError(attribute, WITHOUT, len(without_errors))

    with_summary = summarize(with_errors)
    without_summary = summarize(without_errors)
    delta = with_summary.mean - without_summary.mean
    test = _run_test(with_errors, without_errors, config)
    return AttributeAuditRow(
        attribute=attribute,
        dataset=dataset,
        status="ok",
        with_=StratumResult(WITH, with_summary),
        without=StratumResult(WITHOUT, without_summary),
        delta=delta,
        test=test,
        significant=test.p_value < alpha_applied,
        alpha=alpha_applied,
        excluded_missing_pred=missing_pred,
        excluded_unknown_attr=unknown,
    )


def _dataset_name(records: Sequence[FaceRecord]) -> str:
    names = {rec.dataset for rec in records}
    if len(names) != 1:
        raise AuditError(
            f"records span {len(names)} datasets ({sorted(names)}); "
            "audit one dataset at a time"
        )
    return next(iter(names))


def audit_attribute(
    records: Sequence[FaceRecord], attribute: str, config: AuditConfig
) -> AttributeAuditRow:
    """Audit one attribute on one dataset's records.

    Records without a prediction are excluded and counted in
    excluded_missing_pred; predicted records whose attribute value is
    unknown are excluded and counted in excluded_unknown_attr. Both
    remaining strata must keep >= 2 records.
    """
    if not records:
        raise AuditError("no records to audit")
    dataset = _dataset_name(records)
    scored, missing = _predicted_errors(records, config)
    return _audit_scored(scored, missing, dataset, attribute, config, config.alpha)


def audit_dataset(
    records: Sequence[FaceRecord],
    attributes: Sequence[str],
    config: AuditConfig,
) -> list[AttributeAuditRow]:
    """One row per attribute; per-attribute failures become unavailable rows.

    With Bonferroni enabled the per-test threshold is alpha / m, where m
    is the number of attributes requested; rows carry the applied
    threshold alongside the raw p-value.
    """
    if not attributes:
        raise AuditError("attribute list must be non-empty")
    if not records:
        raise AuditError("no records to audit")
    dataset = _dataset_name(records)
    alpha_applied = config.alpha / len(attributes) if config.bonferroni else config.alpha
    scored, missing = _predicted_errors(records, config)

    rows: list[AttributeAuditRow] = []
    for attribute in attributes:
        try:
            rows.append(
                _audit_scored(scored, missing, dataset, attribute, config, alpha_applied)
            )
        except AuditError as exc:
            unknown = sum(
                1 for rec, _ in scored if rec.attribute_value(attribute) == UNKNOWN
            )
            rows.append(
                AttributeAuditRow(
                    attribute=attribute,
                    dataset=dataset,
                    status="unavailable",
                    with_=None,
                    without=None,
                    delta=None,
                    test=None,
                    significant=None,
                    alpha=alpha_applied,
                    excluded_missing_pred=missing,
                    excluded_unknown_attr=unknown,
                    reason=str(exc),
                )
            )
    return rows


def _delta_sign(delta: float, zero_band: float) -> str:
    if abs(delta) <= zero_band:
        return "zero"
    return "negative" if delta < 0 else "positive"


def compare_trends(
    rows: Iterable[AttributeAuditRow],
    zero_band: float = DEFAULT_ZERO_BAND,
) -> list[TrendComparison]:
    """Per-attribute delta signs across datasets and their agreement.

    Unavailable rows contribute an "unavailable" sign and are excluded
    from the agreement vote; agreement needs >= 2 available signs, all
    identical. Requires rows from >= 2 datasets overall.
    """
    rows = list(rows)
    datasets: list[str] = []
    by_attribute: dict[str, dict[str, str]] = {}
    for row in rows:
        if row.dataset not in datasets:
            datasets.append(row.dataset)
        signs = by_attribute.setdefault(row.attribute, {})
        if row.available:
            assert row.delta is not None
            signs[row.dataset] = _delta_sign(row.delta, zero_band)
        else:
            signs[row.dataset] = "unavailable"
    if len(datasets) < 2:
        raise AuditError(
            f"trend comparison needs rows from >= 2 datasets, got {len(datasets)}"
        )

    comparisons = []
    for attribute, signs in by_attribute.items():
        # Datasets with no row for this attribute are unavailable too.
        full = {ds: signs.get(ds, "unavailable") for ds in datasets}
        available = [s for s in full.values() if s != "unavailable"]
        agreement = len(available) >= 2 and len(set(available)) == 1
        comparisons.append(TrendComparison(attribute, full, agreement))
    return comparisons
