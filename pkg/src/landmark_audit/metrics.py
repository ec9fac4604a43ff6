"""Per-face landmark error metrics.

Normalized Mean Error (NME) of a predicted landmark set against ground
truth: mean Euclidean point error divided by a face-scale normalizer.
Stored as a dimensionless fraction; rendering as percent happens at the
report layer. Also provides scheme-to-scheme correspondence mapping
(e.g. a 68-point prediction matched against 5-point annotations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

__all__ = [
    "Point2D",
    "LandmarkSet",
    "NormalizationSpec",
    "CorrespondenceMap",
    "SchemeError",
    "DegenerateGeometryError",
    "register_scheme",
    "scheme_point_count",
    "map_landmarks",
    "normalizer",
    "compute_nme",
    "IBUG68_TO_CELEBA5",
    "DEFAULT_EYE_INDICES",
]

# Normalizers below this many pixels are treated as corrupt annotations.
DEGENERATE_NORMALIZER_EPS = 1e-9


class SchemeError(ValueError):
    """Unknown scheme, scheme mismatch, or out-of-range point index."""


class DegenerateGeometryError(ValueError):
    """Normalizer collapsed to (near) zero, e.g. coincident eye centers."""


# Landmark layouts known out of the box; extend via register_scheme().
_SCHEMES: dict[str, int] = {
    "ibug68": 68,
    "celeba5": 5,
    "pair2": 2,
}

# Eye-center index groups used when a manifest omits the normalization
# block: (left eye indices, right eye indices) per scheme.
DEFAULT_EYE_INDICES: dict[str, tuple[tuple[int, ...], tuple[int, ...]]] = {
    "ibug68": (tuple(range(36, 42)), tuple(range(42, 48))),
    "celeba5": ((0,), (1,)),
    "pair2": ((0,), (1,)),
}


def register_scheme(name: str, point_count: int) -> None:
    """Register a landmark scheme so sets under it can be validated."""
    if not name:
        raise SchemeError("scheme name must be non-empty")
    if point_count < 1:
        raise SchemeError(f"scheme {name!r} must have >= 1 point, got {point_count}")
    existing = _SCHEMES.get(name)
    if existing is not None and existing != point_count:
        raise SchemeError(
            f"scheme {name!r} already registered with {existing} points, "
            f"cannot re-register with {point_count}"
        )
    _SCHEMES[name] = point_count


def scheme_point_count(name: str) -> int:
    try:
        return _SCHEMES[name]
    except KeyError:
        raise SchemeError(f"unknown landmark scheme {name!r}") from None


@dataclass(frozen=True)
class Point2D:
    """One landmark position in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinate ({self.x}, {self.y})")


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered landmark points under a named scheme."""

    scheme: str
    points: tuple[Point2D, ...]

    def __post_init__(self) -> None:
        expected = scheme_point_count(self.scheme)
        if len(self.points) != expected:
            raise SchemeError(
                f"scheme {self.scheme!r} declares {expected} points, "
                f"got {len(self.points)}"
            )

    @classmethod
    def from_pairs(cls, scheme: str, pairs: Iterable[tuple[float, float]]) -> "LandmarkSet":
        return cls(scheme, tuple(Point2D(float(x), float(y)) for x, y in pairs))


@dataclass(frozen=True)
class NormalizationSpec:
    """How to derive the face-scale divisor for NME.

    kind is one of:
      "interocular"   - distance between the two eye centers, each the
                        centroid of its index group in the ground truth;
      "bbox-diag"     - diagonal of the axis-aligned box over all ground
                        truth points;
      "constant"      - a fixed pixel value.
    """

    kind: str
    left_eye: tuple[int, ...] = ()
    right_eye: tuple[int, ...] = ()
    value: float = 0.0
    epsilon: float = DEGENERATE_NORMALIZER_EPS

    def __post_init__(self) -> None:
        if self.kind not in ("interocular", "bbox-diag", "constant"):
            raise ValueError(f"unknown normalization kind {self.kind!r}")
        if self.kind == "interocular" and (not self.left_eye or not self.right_eye):
            raise ValueError("interocular normalization needs eye index groups")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError(f"constant normalizer must be > 0, got {self.value}")

    @classmethod
    def interocular(
        cls, left_eye: Sequence[int], right_eye: Sequence[int]
    ) -> "NormalizationSpec":
        return cls("interocular", tuple(left_eye), tuple(right_eye))

    @classmethod
    def bbox_diagonal(cls) -> "NormalizationSpec":
        return cls("bbox-diag")

    @classmethod
    def constant(cls, value: float) -> "NormalizationSpec":
        return cls("constant", value=float(value))

    @classmethod
    def default_for_scheme(cls, scheme: str) -> "NormalizationSpec":
        """Inter-ocular normalization with the scheme's stock eye indices."""
        try:
            left, right = DEFAULT_EYE_INDICES[scheme]
        except KeyError:
            raise SchemeError(
                f"no default eye indices for scheme {scheme!r}; "
                "specify normalization explicitly"
            ) from None
        return cls.interocular(left, right)


@dataclass(frozen=True)
class CorrespondenceMap:
    """Rule converting a source scheme to a target scheme.

    mapping[i] lists the source indices whose centroid produces target
    point i.
    """

    source_scheme: str
    target_scheme: str
    mapping: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        n_target = scheme_point_count(self.target_scheme)
        n_source = scheme_point_count(self.source_scheme)
        if len(self.mapping) != n_target:
            raise SchemeError(
                f"map produces {len(self.mapping)} points but scheme "
                f"{self.target_scheme!r} declares {n_target}"
            )
        for i, group in enumerate(self.mapping):
            if not group:
                raise SchemeError(f"target point {i} has no source indices")
            for idx in group:
                if not 0 <= idx < n_source:
                    raise SchemeError(
                        f"target point {i} references source index {idx}, "
                        f"valid range is 0..{n_source - 1}"
                    )


# Standard iBUG 68 layout reduced to the CelebA 5-point layout:
# eye centers averaged over the eye contours, nose tip, mouth corners.
IBUG68_TO_CELEBA5 = CorrespondenceMap(
    source_scheme="ibug68",
    target_scheme="celeba5",
    mapping=(
        tuple(range(36, 42)),
        tuple(range(42, 48)),
        (30,),
        (48,),
        (54,),
    ),
)

# Named maps addressable from manifests.
NAMED_CORRESPONDENCES: dict[str, CorrespondenceMap] = {
    "ibug68:celeba5": IBUG68_TO_CELEBA5,
}


def _centroid(points: Sequence[Point2D], indices: Sequence[int]) -> tuple[float, float]:
    xs = 0.0
    ys = 0.0
    for idx in indices:
        p = points[idx]
        xs += p.x
        ys += p.y
    n = len(indices)
    return xs / n, ys / n


def map_landmarks(src: LandmarkSet, cmap: CorrespondenceMap) -> LandmarkSet:
    """Convert src into cmap's target scheme by centroid-averaging groups."""
    if src.scheme != cmap.source_scheme:
        raise SchemeError(
            f"map expects source scheme {cmap.source_scheme!r}, got {src.scheme!r}"
        )
    out = []
    for group in cmap.mapping:
        x, y = _centroid(src.points, group)
        out.append(Point2D(x, y))
    return LandmarkSet(cmap.target_scheme, tuple(out))


def normalizer(gt: LandmarkSet, spec: NormalizationSpec) -> float:
    """Face-scale divisor in pixels for the given ground truth."""
    if spec.kind == "constant":
        return spec.value

    if spec.kind == "interocular":
        n = len(gt.points)
        for idx in (*spec.left_eye, *spec.right_eye):
            if not 0 <= idx < n:
                raise SchemeError(
                    f"eye index {idx} out of range for scheme {gt.scheme!r} ({n} points)"
                )
        lx, ly = _centroid(gt.points, spec.left_eye)
        rx, ry = _centroid(gt.points, spec.right_eye)
        d = math.hypot(lx - rx, ly - ry)
    else:  # bbox-diag
        xs = [p.x for p in gt.points]
        ys = [p.y for p in gt.points]
        d = math.hypot(max(xs) - min(xs), max(ys) - min(ys))

    if d < spec.epsilon:
        raise DegenerateGeometryError(
            f"{spec.kind} normalizer is {d!r} px (< {spec.epsilon}); "
            "ground truth geometry is degenerate"
        )
    return d


def compute_nme(pred: LandmarkSet, gt: LandmarkSet, spec: NormalizationSpec) -> float:
    """Normalized Mean Error of pred against gt, as a fraction.

    (1/N) * sum_i ||pred_i - gt_i|| / d, with d = normalizer(gt, spec).
    Both sets must be in the same scheme; apply map_landmarks first when
    the prediction scheme differs.
    """
    if pred.scheme != gt.scheme:
        raise SchemeError(
            f"scheme mismatch: pred {pred.scheme!r} vs gt {gt.scheme!r}"
        )
    d = normalizer(gt, spec)
    total = 0.0
    for p, g in zip(pred.points, gt.points):
        total += math.hypot(p.x - g.x, p.y - g.y)
    return total / len(gt.points) / d
