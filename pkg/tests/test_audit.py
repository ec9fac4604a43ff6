from __future__ import annotations

import numpy as np
import pytest

from landmark_audit.audit import (
    AuditConfig,
    AuditError,
    StratumTooSmallError,
    UNKNOWN,
    WITH,
    WITHOUT,
    audit_attribute,
    audit_dataset,
    compare_trends,
    stratify,
)
from landmark_audit.metrics import (
    IBUG68_TO_CELEBA5,
    LandmarkSet,
    NormalizationSpec,
)
from landmark_audit.audit import FaceRecord
from landmark_audit.simulate import AttributeBias, SimulationSpec, simulate_records

from helpers import INTEROCULAR_PAIR, make_record, make_row

CFG = AuditConfig(normalization=INTEROCULAR_PAIR)


def test_stratify_three_way_partition():
    records = [
        make_record("a", 0.1, {"young": WITH}),
        make_record("b", 0.1, {"young": WITHOUT}),
        make_record("c", 0.1, {"young": WITH}),
        make_record("d", 0.1, {"young": UNKNOWN}),
    ]
    w, wo, unk = stratify(records, "young")
    assert [r.id for r in w] == ["a", "c"]
    assert [r.id for r in wo] == ["b"]
    assert [r.id for r in unk] == ["d"]


def test_stratify_all_with_and_missing_name():
    records = [make_record(str(i), 0.1, {"young": WITH}) for i in range(5)]
    w, wo, unk = stratify(records, "young")
    assert (len(w), len(wo), len(unk)) == (5, 0, 0)
    # Records lacking the attribute entirely land in unknown.
    w, wo, unk = stratify(records, "beard")
    assert (len(w), len(wo), len(unk)) == (0, 0, 5)
    with pytest.raises(ValueError):
        stratify(records, "")


def test_stratify_completeness_property():
    rng = np.random.default_rng(44)
    values = [WITH, WITHOUT, UNKNOWN]
    for _ in range(30):
        records = [
            make_record(str(i), 0.1, {"x": values[int(rng.integers(0, 3))]})
            for i in range(int(rng.integers(1, 40)))
        ]
        w, wo, unk = stratify(records, "x")
        assert len(w) + len(wo) + len(unk) == len(records)


def test_audit_attribute_hand_case():
    records = [
        make_record("a", 0.04, {"young": WITH}),
        make_record("b", 0.05, {"young": WITH}),
        make_record("c", 0.03, {"young": WITHOUT}),
        make_record("d", 0.05, {"young": WITHOUT}),
        make_record("e", 0.07, {"young": WITHOUT}),
        make_record("f", None, {"young": WITH}),      # detection failure
        make_record("g", 0.10, {"young": UNKNOWN}),   # unknown attribute
    ]
    row = audit_attribute(records, "young", CFG)
    assert row.status == "ok"
    assert row.with_.summary.n == 2
    assert row.without.summary.n == 3
    assert row.with_.summary.mean == pytest.approx(0.045, rel=1e-14)
    assert row.without.summary.mean == pytest.approx(0.05, rel=1e-14)
    assert row.delta == pytest.approx(-0.005, rel=1e-12)
    assert row.excluded_missing_pred == 1
    assert row.excluded_unknown_attr == 1
    assert row.significant == (row.test.p_value < row.alpha)
    # Exclusion bookkeeping: strata plus exclusions cover the input.
    assert (
        row.with_.summary.n
        + row.without.summary.n
        + row.excluded_missing_pred
        + row.excluded_unknown_attr
        == len(records)
    )


def test_audit_complement_antisymmetry():
    rng = np.random.default_rng(3)
    flip = {WITH: WITHOUT, WITHOUT: WITH}
    records = [
        make_record(str(i), float(e), {"x": WITH if i % 3 else WITHOUT})
        for i, e in enumerate(rng.uniform(0.01, 0.2, 40))
    ]
    flipped = [
        FaceRecord(r.id, r.dataset, r.gt, r.pred, {"x": flip[r.attributes["x"]]})
        for r in records
    ]
    row = audit_attribute(records, "x", CFG)
    row_f = audit_attribute(flipped, "x", CFG)
    assert row_f.delta == -row.delta
    assert row_f.test.p_value == row.test.p_value
    assert row_f.with_.summary == row.without.summary


def test_audit_pooled_mean_consistency():
    rng = np.random.default_rng(13)
    records = [
        make_record(str(i), float(e), {"x": WITH if rng.random() < 0.3 else WITHOUT})
        for i, e in enumerate(rng.uniform(0.01, 0.2, 200))
    ]
    row = audit_attribute(records, "x", CFG)
    nw = row.with_.summary.n
    nwo = row.without.summary.n
    pooled = (nw * row.with_.summary.mean + nwo * row.without.summary.mean) / (nw + nwo)
    from landmark_audit.metrics import compute_nme
    from landmark_audit.stats import summarize

    errors = [compute_nme(r.pred, r.gt, CFG.normalization) for r in records]
    assert pooled == pytest.approx(summarize(errors).mean, rel=1e-10)


def test_audit_stratum_too_small():
    records = [
        make_record("a", 0.04, {"x": WITH}),
        make_record("b", 0.05, {"x": WITH}),
        make_record("c", 0.03, {"x": WITHOUT}),
    ]
    with pytest.raises(StratumTooSmallError) as exc:
        audit_attribute(records, "x", CFG)
    assert "x" in str(exc.value)
    assert "without" in str(exc.value)


def test_audit_rejects_mixed_datasets():
    records = [
        make_record("a", 0.04, {"x": WITH}, dataset="d1"),
        make_record("b", 0.05, {"x": WITHOUT}, dataset="d2"),
    ]
    with pytest.raises(AuditError):
        audit_attribute(records, "x", CFG)


def test_audit_applies_correspondence_map():
    # 68-point predictions against 5-point ground truth; only the left
    # eye center is off, by 10 px, with inter-ocular distance 100 px.
    gt = LandmarkSet.from_pairs(
        "celeba5", [(0, 0), (100, 0), (50, 50), (30, 80), (70, 80)]
    )
    pts = [(0.0, 0.0)] * 68
    for i in range(36, 42):
        pts[i] = (10.0, 0.0)
    for i in range(42, 48):
        pts[i] = (100.0, 0.0)
    pts[30] = (50.0, 50.0)
    pts[48] = (30.0, 80.0)
    pts[54] = (70.0, 80.0)
    pred = LandmarkSet.from_pairs("ibug68", pts)

    config = AuditConfig(
        normalization=NormalizationSpec.interocular([0], [1]),
        correspondence=IBUG68_TO_CELEBA5,
    )
    records = [
        FaceRecord(f"r{i}", "t", gt, pred, {"x": WITH if i < 2 else WITHOUT})
        for i in range(4)
    ]
    row = audit_attribute(records, "x", config)
    # NME = (10 + 0 + 0 + 0 + 0) / 5 / 100 = 0.02 for every record.
    assert row.with_.summary.mean == pytest.approx(0.02, rel=1e-12)
    assert row.delta == pytest.approx(0.0, abs=1e-15)


def test_audit_scheme_mismatch_without_map_names_record():
    gt = LandmarkSet.from_pairs("celeba5", [(0, 0), (100, 0), (50, 50), (30, 80), (70, 80)])
    pred = LandmarkSet.from_pairs("pair2", [(0, 0), (100, 0)])
    records = [
        FaceRecord("weird-id", "t", gt, pred, {"x": WITH}),
        FaceRecord("b", "t", gt, None, {"x": WITHOUT}),
    ]
    with pytest.raises(AuditError):
        audit_attribute(records, "x", AuditConfig(normalization=INTEROCULAR_PAIR))


def test_audit_dataset_bonferroni_threshold():
    rng = np.random.default_rng(19)
    records = [
        make_record(
            str(i),
            float(e),
            {
                "a1": WITH if i % 2 else WITHOUT,
                "a2": WITH if i % 3 else WITHOUT,
                "a3": WITH if i % 5 else WITHOUT,
                "a4": WITH if i % 7 else WITHOUT,
            },
        )
        for i, e in enumerate(rng.uniform(0.01, 0.2, 120))
    ]
    cfg = AuditConfig(normalization=INTEROCULAR_PAIR, alpha=0.001, bonferroni=True)
    rows = audit_dataset(records, ["a1", "a2", "a3", "a4"], cfg)
    assert all(row.alpha == 0.001 / 4 for row in rows)
    assert all(row.significant == (row.test.p_value < 0.00025) for row in rows)


def test_audit_dataset_single_attribute_matches_audit_attribute():
    records = [
        make_record(str(i), 0.02 + 0.01 * i, {"x": WITH if i % 2 else WITHOUT})
        for i in range(10)
    ]
    assert audit_dataset(records, ["x"], CFG) == [audit_attribute(records, "x", CFG)]


def test_audit_dataset_unavailable_attribute_row():
    records = [
        make_record(str(i), 0.02 + 0.01 * i, {"x": WITH if i % 2 else WITHOUT})
        for i in range(10)
    ]
    rows = audit_dataset(records, ["x", "beard"], CFG)
    ok, na = rows
    assert ok.status == "ok"
    assert na.status == "unavailable"
    assert na.attribute == "beard"
    assert na.delta is None and na.test is None and na.significant is None
    assert "beard" in na.reason
    assert na.excluded_unknown_attr == 10


def test_audit_dataset_planted_bias_on_two_of_four():
    # Two attributes carry a planted difference, two are null; only the
    # planted ones may come out significant at alpha = .001.
    spec = SimulationSpec(
        dataset="planted",
        seed=2024,
        attributes=(
            AttributeBias("a1", 5000, 5000, 4.5, 4.0, 1.5),
            AttributeBias("a2", 5000, 5000, 4.0, 4.5, 1.5),
            AttributeBias("a3", 5000, 5000, 4.2, 4.2, 1.5),
            AttributeBias("a4", 5000, 5000, 4.2, 4.2, 1.5),
        ),
    )
    records = simulate_records(spec)
    rows = audit_dataset(records, ["a1", "a2", "a3", "a4"], CFG)
    by_name = {row.attribute: row for row in rows}
    assert by_name["a1"].significant and by_name["a1"].delta > 0
    assert by_name["a2"].significant and by_name["a2"].delta < 0
    assert not by_name["a3"].significant
    assert not by_name["a4"].significant


def test_compare_trends_table1_shapes():
    rows = [
        make_row("young", "celeba", -0.0040),
        make_row("young", "ffhq-aging", -0.0021),
        make_row("young", "synthetic", -0.0079),
        make_row("beard", "celeba", 0.0050),
        make_row("beard", "ffhq-aging", None),
        make_row("beard", "synthetic", 0.0100),
    ]
    comps = {c.attribute: c for c in compare_trends(rows)}
    young = comps["young"]
    assert young.agreement
    assert set(young.signs.values()) == {"negative"}
    beard = comps["beard"]
    assert beard.agreement  # two available positives agree
    assert beard.signs["ffhq-aging"] == "unavailable"
    assert beard.signs["celeba"] == "positive"


def test_compare_trends_disagreement_and_zero_band():
    rows = [
        make_row("x", "d1", 0.3),
        make_row("x", "d2", -0.3),
        make_row("z", "d1", 5e-13),
        make_row("z", "d2", -5e-13),
    ]
    comps = {c.attribute: c for c in compare_trends(rows)}
    assert not comps["x"].agreement
    # Both inside the zero band: signs are "zero" and they agree.
    assert comps["z"].signs == {"d1": "zero", "d2": "zero"}
    assert comps["z"].agreement


def test_compare_trends_single_available_is_not_agreement():
    rows = [
        make_row("x", "d1", 0.3),
        make_row("x", "d2", None),
        make_row("y", "d1", 0.1),
        make_row("y", "d2", 0.2),
    ]
    comps = {c.attribute: c for c in compare_trends(rows)}
    assert not comps["x"].agreement
    assert comps["y"].agreement


def test_compare_trends_needs_two_datasets():
    with pytest.raises(AuditError):
        compare_trends([make_row("x", "only", 0.1)])
