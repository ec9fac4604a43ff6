from __future__ import annotations

import math

import numpy as np
import pytest

from landmark_audit.metrics import (
    CorrespondenceMap,
    DegenerateGeometryError,
    IBUG68_TO_CELEBA5,
    LandmarkSet,
    NormalizationSpec,
    Point2D,
    SchemeError,
    compute_nme,
    map_landmarks,
    normalizer,
    register_scheme,
    scheme_point_count,
)

register_scheme("quad4", 4)


def _ibug_set(fn):
    return LandmarkSet.from_pairs("ibug68", [fn(i) for i in range(68)])


def test_point_rejects_non_finite():
    with pytest.raises(ValueError):
        Point2D(float("nan"), 0.0)
    with pytest.raises(ValueError):
        Point2D(0.0, float("inf"))


def test_landmark_set_enforces_scheme_count():
    with pytest.raises(SchemeError):
        LandmarkSet.from_pairs("pair2", [(0, 0), (1, 1), (2, 2)])
    with pytest.raises(SchemeError):
        LandmarkSet.from_pairs("no-such-scheme", [(0, 0)])


def test_register_scheme_conflicts_rejected():
    register_scheme("quad4", 4)  # same count is fine
    with pytest.raises(SchemeError):
        register_scheme("quad4", 5)
    assert scheme_point_count("quad4") == 4


def test_map_hexagon_centroid():
    # Points 36..41 form a regular hexagon centered at (100, 50).
    hexagon = [
        (110.0, 50.0),
        (105.0, 58.66025403784439),
        (95.0, 58.66025403784439),
        (90.0, 50.0),
        (95.0, 41.33974596215561),
        (105.0, 41.33974596215561),
    ]
    pts = [(0.0, 0.0)] * 68
    for k, p in enumerate(hexagon):
        pts[36 + k] = p
    src = LandmarkSet.from_pairs("ibug68", pts)
    cmap = CorrespondenceMap("ibug68", "pair2", (tuple(range(36, 42)), (0,)))
    out = map_landmarks(src, cmap)
    assert out.points[0].x == pytest.approx(100.0, abs=1e-12)
    assert out.points[0].y == pytest.approx(50.0, abs=1e-12)


def test_identity_map_returns_input():
    identity = CorrespondenceMap("quad4", "quad4", ((0,), (1,), (2,), (3,)))
    src = LandmarkSet.from_pairs("quad4", [(1, 2), (3, 4), (5, 6), (7, 8)])
    out = map_landmarks(src, identity)
    assert out == src
    # Centroid maps are idempotent under the identity in the target scheme.
    assert map_landmarks(out, identity) == out


def test_default_68_to_5_map_hand_values():
    # points[i] = (i, 2i): group means are exact decimals.
    src = _ibug_set(lambda i: (float(i), 2.0 * i))
    out = map_landmarks(src, IBUG68_TO_CELEBA5)
    assert out.scheme == "celeba5"
    assert (out.points[0].x, out.points[0].y) == (38.5, 77.0)   # mean 36..41
    assert (out.points[1].x, out.points[1].y) == (44.5, 89.0)   # mean 42..47
    assert (out.points[2].x, out.points[2].y) == (30.0, 60.0)   # nose tip
    assert (out.points[3].x, out.points[3].y) == (48.0, 96.0)   # mouth corners
    assert (out.points[4].x, out.points[4].y) == (54.0, 108.0)


def test_map_scheme_mismatch():
    src = LandmarkSet.from_pairs("pair2", [(0, 0), (1, 1)])
    with pytest.raises(SchemeError):
        map_landmarks(src, IBUG68_TO_CELEBA5)


def test_correspondence_validates_indices():
    with pytest.raises(SchemeError):
        CorrespondenceMap("pair2", "pair2", ((0,), (2,)))
    with pytest.raises(SchemeError):
        CorrespondenceMap("pair2", "pair2", ((0,), ()))


def test_interocular_normalizer_hand_distance():
    gt = LandmarkSet.from_pairs("pair2", [(0, 0), (3, 4)])
    assert normalizer(gt, NormalizationSpec.interocular([0], [1])) == 5.0


def test_bbox_normalizer_and_degenerate():
    gt = LandmarkSet.from_pairs("quad4", [(0, 0), (3, 0), (0, 4), (3, 4)])
    assert normalizer(gt, NormalizationSpec.bbox_diagonal()) == 5.0
    flat = LandmarkSet.from_pairs("quad4", [(1, 1)] * 4)
    with pytest.raises(DegenerateGeometryError):
        normalizer(flat, NormalizationSpec.bbox_diagonal())


def test_constant_normalizer_ignores_points():
    gt = LandmarkSet.from_pairs("pair2", [(7, 7), (7, 7)])
    assert normalizer(gt, NormalizationSpec.constant(100.0)) == 100.0
    with pytest.raises(ValueError):
        NormalizationSpec.constant(0.0)


def test_interocular_degenerate_eyes():
    gt = LandmarkSet.from_pairs("pair2", [(5, 5), (5, 5)])
    with pytest.raises(DegenerateGeometryError):
        normalizer(gt, NormalizationSpec.interocular([0], [1]))


def test_normalizer_index_out_of_range():
    gt = LandmarkSet.from_pairs("pair2", [(0, 0), (1, 0)])
    with pytest.raises(SchemeError):
        normalizer(gt, NormalizationSpec.interocular([0], [5]))


def test_nme_identity_is_zero():
    gt = LandmarkSet.from_pairs("quad4", [(0, 0), (10, 0), (0, 10), (10, 10)])
    assert compute_nme(gt, gt, NormalizationSpec.bbox_diagonal()) == 0.0


def test_nme_hand_345_case():
    gt = LandmarkSet.from_pairs("pair2", [(0, 0), (10, 0)])
    pred = LandmarkSet.from_pairs("pair2", [(3, 4), (10, 0)])
    nme = compute_nme(pred, gt, NormalizationSpec.constant(10.0))
    assert nme == pytest.approx(0.25, rel=1e-15)


def test_nme_scheme_mismatch():
    gt = LandmarkSet.from_pairs("celeba5", [(i, i) for i in range(5)])
    pred = LandmarkSet.from_pairs("pair2", [(0, 0), (1, 1)])
    with pytest.raises(SchemeError):
        compute_nme(pred, gt, NormalizationSpec.constant(1.0))


def test_nme_scale_and_translation_invariance():
    rng = np.random.default_rng(42)
    spec = NormalizationSpec.interocular([0], [1])
    for _ in range(200):
        gt_xy = rng.uniform(-50, 50, size=(4, 2))
        gt_xy[1] += (60.0, 0.0)  # keep the eyes apart
        pred_xy = gt_xy + rng.normal(0, 3, size=(4, 2))
        gt = LandmarkSet.from_pairs("quad4", gt_xy)
        pred = LandmarkSet.from_pairs("quad4", pred_xy)
        base = compute_nme(pred, gt, spec)

        s = float(rng.uniform(0.1, 20))
        scaled = compute_nme(
            LandmarkSet.from_pairs("quad4", pred_xy * s),
            LandmarkSet.from_pairs("quad4", gt_xy * s),
            spec,
        )
        assert scaled == pytest.approx(base, rel=1e-12)

        offset = rng.uniform(-1000, 1000, size=2)
        shifted = compute_nme(
            LandmarkSet.from_pairs("quad4", pred_xy + offset),
            LandmarkSet.from_pairs("quad4", gt_xy + offset),
            spec,
        )
        assert shifted == pytest.approx(base, rel=1e-9)


def test_nme_single_point_monotonicity():
    rng = np.random.default_rng(7)
    spec = NormalizationSpec.constant(50.0)
    for _ in range(200):
        gt_xy = rng.uniform(0, 100, size=(4, 2))
        pred_xy = gt_xy + rng.normal(0, 2, size=(4, 2))
        idx = int(rng.integers(0, 4))
        # Guarantee a non-zero offset to stretch.
        pred_xy[idx] = gt_xy[idx] + (1.0, 0.5)
        gt = LandmarkSet.from_pairs("quad4", gt_xy)
        base = compute_nme(LandmarkSet.from_pairs("quad4", pred_xy), gt, spec)
        farther = pred_xy.copy()
        farther[idx] = gt_xy[idx] + (pred_xy[idx] - gt_xy[idx]) * float(
            rng.uniform(1.1, 5)
        )
        worse = compute_nme(LandmarkSet.from_pairs("quad4", farther), gt, spec)
        assert worse > base
