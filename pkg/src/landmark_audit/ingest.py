"""File ingestion: landmark CSVs, attribute files, dataset manifests.

Joins ground truth, predictions, and attribute annotations into
FaceRecords. Ids are opaque strings and are never normalized; a missing
prediction row encodes a detection failure (no sentinel coordinates).

Formats (all UTF-8, LF line endings):

* landmark CSV - header exactly ``id,x0,y0,...,x{N-1},y{N-1}`` for an
  N-point scheme, one row per face, plain or scientific decimal
  coordinates with a dot separator.
* celeba-attr - line 1: record count; line 2: attribute names; then one
  row per face: id followed by +1/-1 per attribute.
* csv attributes - header ``id,<name>,...``; cells from the tri-state
  token set below, empty cell = unknown.
* json-lines attributes - one JSON object per line carrying "id" plus
  attribute fields; null = unknown.

Tri-state value tokens (case-insensitive for strings): positive is
true/1/"yes"/"with"; negative is false/-1/0/"no"/"without"; null or an
empty cell is unknown.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .audit import UNKNOWN, WITH, WITHOUT, FaceRecord
from .metrics import (
    CorrespondenceMap,
    LandmarkSet,
    NormalizationSpec,
    NAMED_CORRESPONDENCES,
    Point2D,
    register_scheme,
    scheme_point_count,
)

__all__ = [
    "ParseError",
    "AttributeAlias",
    "AttributeFile",
    "DatasetManifest",
    "IngestSummary",
    "parse_celeba_attributes",
    "parse_csv_attributes",
    "parse_jsonl_attributes",
    "parse_landmark_csv",
    "format_celeba_attributes",
    "format_csv_attributes",
    "format_jsonl_attributes",
    "format_landmark_csv",
    "load_manifest",
    "build_records",
]

# Locale-independent coordinate grammar: optional sign, decimal digits
# with optional fraction, optional exponent. No inf/nan/underscores.
_FLOAT_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")

ATTRIBUTE_FORMATS = ("celeba-attr", "csv", "json-lines")


class ParseError(ValueError):
    """Malformed input file; message carries file/line context."""


def _ctx(source: str | None, line: int | None = None) -> str:
    parts = []
    if source:
        parts.append(source)
    if line is not None:
        parts.append(f"line {line}")
    return (": ".join(parts) + ": ") if parts else ""


def _parse_coordinate(token: str, source: str | None, line: int, column: int) -> float:
    if not _FLOAT_RE.match(token):
        raise ParseError(
            f"{_ctx(source, line)}column {column}: invalid coordinate {token!r}"
        )
    return float(token)


_POSITIVE_TOKENS = frozenset(("1", "true", "yes", "with"))
_NEGATIVE_TOKENS = frozenset(("-1", "0", "false", "no", "without"))


def _tri_state_from_token(token: str, source: str | None, line: int, column: int) -> str:
    if token == "" or token.lower() == "unknown":
        return UNKNOWN
    if token.lower() in _POSITIVE_TOKENS:
        return WITH
    if token.lower() in _NEGATIVE_TOKENS:
        return WITHOUT
    raise ParseError(
        f"{_ctx(source, line)}column {column}: invalid attribute token {token!r}"
    )


def _tri_state_from_json(value: Any, source: str | None, line: int, name: str) -> str:
    if value is None:
        return UNKNOWN
    if isinstance(value, bool):
        return WITH if value else WITHOUT
    if isinstance(value, (int, float)):
        if value == 1:
            return WITH
        if value in (0, -1):
            return WITHOUT
    elif isinstance(value, str):
        try:
            return _tri_state_from_token(value, source, line, 0)
        except ParseError:
            pass
    raise ParseError(
        f"{_ctx(source, line)}field {name!r} has invalid attribute value {value!r}"
    )


# ---------------------------------------------------------------------------
# Attribute file parsers
# ---------------------------------------------------------------------------

def parse_celeba_attributes(
    content: str, source: str | None = None
) -> dict[str, dict[str, str]]:
    """Parse the CelebA list_attr layout: count, names, then id +-1 rows."""
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 2:
        raise ParseError(f"{_ctx(source)}expected a count line and a header line")
    try:
        declared = int(lines[0].strip())
    except ValueError:
        raise ParseError(
            f"{_ctx(source, 1)}expected integer record count, got {lines[0]!r}"
        ) from None
    names = lines[1].split()
    if not names:
        raise ParseError(f"{_ctx(source, 2)}no attribute names")

    rows = lines[2:]
    if len(rows) != declared:
        raise ParseError(
            f"{_ctx(source)}header declares {declared} records but file has {len(rows)}"
        )
    out: dict[str, dict[str, str]] = {}
    for offset, raw in enumerate(rows):
        line_no = offset + 3
        tokens = raw.split()
        if len(tokens) != len(names) + 1:
            raise ParseError(
                f"{_ctx(source, line_no)}expected id plus {len(names)} values, "
                f"got {len(tokens)} tokens"
            )
        rec_id = tokens[0]
        if rec_id in out:
            raise ParseError(f"{_ctx(source, line_no)}duplicate id {rec_id!r}")
        values: dict[str, str] = {}
        for col, token in enumerate(tokens[1:], start=1):
            if token == "1":
                values[names[col - 1]] = WITH
            elif token == "-1":
                values[names[col - 1]] = WITHOUT
            else:
                raise ParseError(
                    f"{_ctx(source, line_no)}column {col}: invalid token {token!r} "
                    "(expected 1 or -1)"
                )
        out[rec_id] = values
    return out


def parse_csv_attributes(
    content: str, source: str | None = None
) -> dict[str, dict[str, str]]:
    """Parse ``id,<name>,...`` attribute CSV; empty cells are unknown."""
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(f"{_ctx(source)}empty attribute csv")
    header = lines[0].split(",")
    if header[0] != "id" or len(header) < 2:
        raise ParseError(
            f"{_ctx(source, 1)}expected header 'id,<attribute>,...', got {lines[0]!r}"
        )
    names = header[1:]
    out: dict[str, dict[str, str]] = {}
    for offset, raw in enumerate(lines[1:]):
        line_no = offset + 2
        cells = raw.split(",")
        if len(cells) != len(header):
            raise ParseError(
                f"{_ctx(source, line_no)}expected {len(header)} cells, got {len(cells)}"
            )
        rec_id = cells[0]
        if rec_id in out:
            raise ParseError(f"{_ctx(source, line_no)}duplicate id {rec_id!r}")
        out[rec_id] = {
            names[col - 1]: _tri_state_from_token(cell, source, line_no, col)
            for col, cell in enumerate(cells[1:], start=1)
        }
    return out


def parse_jsonl_attributes(
    content: str, source: str | None = None
) -> dict[str, dict[str, str]]:
    """Parse JSON-lines attributes: one object per line with an "id" key."""
    out: dict[str, dict[str, str]] = {}
    for offset, raw in enumerate(content.split("\n")):
        line_no = offset + 1
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{_ctx(source, line_no)}invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ParseError(f"{_ctx(source, line_no)}expected a JSON object")
        if "id" not in obj:
            raise ParseError(f"{_ctx(source, line_no)}object lacks an 'id' field")
        rec_id = str(obj["id"])
        if rec_id in out:
            raise ParseError(f"{_ctx(source, line_no)}duplicate id {rec_id!r}")
        out[rec_id] = {
            name: _tri_state_from_json(value, source, line_no, name)
            for name, value in obj.items()
            if name != "id"
        }
    return out


# ---------------------------------------------------------------------------
# Landmark CSV
# ---------------------------------------------------------------------------

def _landmark_header(scheme: str) -> str:
    n = scheme_point_count(scheme)
    cols = ",".join(f"x{i},y{i}" for i in range(n))
    return f"id,{cols}"


def parse_landmark_csv(
    content: str, scheme: str, source: str | None = None
) -> dict[str, LandmarkSet]:
    """Parse a landmark CSV into LandmarkSets under the given scheme.

    Faces absent from the file are simply absent (detection failures
    are encoded by omission).
    """
    n = scheme_point_count(scheme)
    expected_header = _landmark_header(scheme)
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(f"{_ctx(source)}empty landmark csv")
    if lines[0] != expected_header:
        raise ParseError(
            f"{_ctx(source, 1)}header does not match scheme {scheme!r} "
            f"({n} points); expected {expected_header!r}"
        )
    out: dict[str, LandmarkSet] = {}
    for offset, raw in enumerate(lines[1:]):
        line_no = offset + 2
        cells = raw.split(",")
        if len(cells) != 2 * n + 1:
            raise ParseError(
                f"{_ctx(source, line_no)}expected 1 id and {2 * n} coordinates, "
                f"got {len(cells)} cells"
            )
        rec_id = cells[0]
        if rec_id in out:
            raise ParseError(f"{_ctx(source, line_no)}duplicate id {rec_id!r}")
        points = []
        for i in range(n):
            x = _parse_coordinate(cells[1 + 2 * i], source, line_no, 1 + 2 * i)
            y = _parse_coordinate(cells[2 + 2 * i], source, line_no, 2 + 2 * i)
            points.append(Point2D(x, y))
        out[rec_id] = LandmarkSet(scheme, tuple(points))
    return out


# ---------------------------------------------------------------------------
# Writers (round-trip partners of the parsers; also used by the simulator)
# ---------------------------------------------------------------------------

def _format_float(v: float) -> str:
    return repr(v)


def format_landmark_csv(landmarks: Mapping[str, LandmarkSet], scheme: str) -> str:
    lines = [_landmark_header(scheme)]
    for rec_id, lset in landmarks.items():
        if lset.scheme != scheme:
            raise ValueError(f"record {rec_id!r} is in scheme {lset.scheme!r}, not {scheme!r}")
        coords = ",".join(f"{_format_float(p.x)},{_format_float(p.y)}" for p in lset.points)
        lines.append(f"{rec_id},{coords}")
    return "\n".join(lines) + "\n"


def format_celeba_attributes(
    values: Mapping[str, Mapping[str, str]], names: Sequence[str]
) -> str:
    lines = [str(len(values)), " ".join(names)]
    for rec_id, row in values.items():
        tokens = [rec_id]
        for name in names:
            value = row.get(name, UNKNOWN)
            if value == WITH:
                tokens.append("1")
            elif value == WITHOUT:
                tokens.append("-1")
            else:
                raise ValueError(
                    f"celeba-attr format cannot represent unknown "
                    f"({rec_id!r}, {name!r}); use csv or json-lines"
                )
        lines.append(" ".join(tokens))
    return "\n".join(lines) + "\n"


def format_csv_attributes(
    values: Mapping[str, Mapping[str, str]], names: Sequence[str]
) -> str:
    token = {WITH: "1", WITHOUT: "-1", UNKNOWN: ""}
    lines = ["id," + ",".join(names)]
    for rec_id, row in values.items():
        lines.append(rec_id + "," + ",".join(token[row.get(name, UNKNOWN)] for name in names))
    return "\n".join(lines) + "\n"


def format_jsonl_attributes(values: Mapping[str, Mapping[str, str]]) -> str:
    flag = {WITH: True, WITHOUT: False, UNKNOWN: None}
    lines = []
    for rec_id, row in values.items():
        obj: dict[str, Any] = {"id": rec_id}
        for name, value in row.items():
            obj[name] = flag[value]
        lines.append(json.dumps(obj, separators=(", ", ": ")))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttributeAlias:
    """Canonical attribute -> dataset-native column, with polarity."""

    source: str
    positive_is_with: bool = True

    def apply(self, value: str) -> str:
        if value == UNKNOWN or self.positive_is_with:
            return value
        return WITHOUT if value == WITH else WITH


@dataclass(frozen=True)
class AttributeFile:
    path: Path
    format: str

    def __post_init__(self) -> None:
        if self.format not in ATTRIBUTE_FORMATS:
            raise ValueError(
                f"unknown attribute format {self.format!r}; "
                f"expected one of {ATTRIBUTE_FORMATS}"
            )


@dataclass(frozen=True)
class DatasetManifest:
    """Declares one dataset's files, schemes, and audit configuration."""

    dataset: str
    gt_landmarks: Path
    pred_landmarks: Path
    attributes: tuple[AttributeFile, ...]
    gt_scheme: str
    pred_scheme: str
    correspondence: CorrespondenceMap | None
    normalization: NormalizationSpec
    aliases: dict[str, AttributeAlias]
    test: str = "welch"
    alpha: float = 0.001
    bonferroni: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        sources = [alias.source for alias in self.aliases.values()]
        if len(sources) != len(set(sources)):
            raise ValueError(
                f"manifest {self.dataset!r}: two canonical attributes map to "
                "the same source column"
            )

    @property
    def attribute_names(self) -> list[str]:
        return list(self.aliases.keys())


@dataclass(frozen=True)
class IngestSummary:
    """Join bookkeeping: every count here is observable in the output."""

    joined: int
    missing_pred: int
    missing_attr: int
    orphan_pred: int


_MANIFEST_REQUIRED = (
    "dataset", "gt_landmarks", "pred_landmarks", "attributes",
    "gt_scheme", "pred_scheme", "aliases",
)
_MANIFEST_OPTIONAL = (
    "correspondence", "normalization", "test", "alpha",
    "bonferroni", "seed", "schemes",
)


def _manifest_error(path: Path, message: str) -> ParseError:
    return ParseError(f"{path}: {message}")


def _build_correspondence(value: Any, path: Path) -> CorrespondenceMap | None:
    if value is None:
        return None
    if isinstance(value, str):
        try:
            return NAMED_CORRESPONDENCES[value]
        except KeyError:
            raise _manifest_error(
                path,
                f"unknown correspondence {value!r}; "
                f"known names: {sorted(NAMED_CORRESPONDENCES)}",
            ) from None
    if isinstance(value, dict):
        try:
            return CorrespondenceMap(
                source_scheme=value["source_scheme"],
                target_scheme=value["target_scheme"],
                mapping=tuple(tuple(int(i) for i in group) for group in value["mapping"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise _manifest_error(path, f"invalid correspondence block: {exc}") from None
    raise _manifest_error(path, "correspondence must be null, a name, or an object")


def _build_normalization(value: Any, gt_scheme: str, path: Path) -> NormalizationSpec:
    if value is None:
        return NormalizationSpec.default_for_scheme(gt_scheme)
    if not isinstance(value, dict) or "kind" not in value:
        raise _manifest_error(path, "normalization must be an object with a 'kind'")
    kind = value["kind"]
    try:
        if kind == "interocular":
            return NormalizationSpec.interocular(
                [int(i) for i in value["left_eye"]],
                [int(i) for i in value["right_eye"]],
            )
        if kind == "bbox-diag":
            return NormalizationSpec.bbox_diagonal()
        if kind == "constant":
            return NormalizationSpec.constant(float(value["value"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise _manifest_error(path, f"invalid normalization block: {exc}") from None
    raise _manifest_error(path, f"unknown normalization kind {kind!r}")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a manifest JSON document.

    Relative file paths are resolved against the manifest's directory.
    An optional "schemes" object registers custom point counts before
    anything else is validated.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise _manifest_error(path, f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise _manifest_error(path, "manifest must be a JSON object")
    unknown = set(doc) - set(_MANIFEST_REQUIRED) - set(_MANIFEST_OPTIONAL)
    if unknown:
        raise _manifest_error(path, f"unknown manifest keys: {sorted(unknown)}")
    missing = [key for key in _MANIFEST_REQUIRED if key not in doc]
    if missing:
        raise _manifest_error(path, f"missing manifest keys: {missing}")

    for name, count in (doc.get("schemes") or {}).items():
        register_scheme(name, int(count))

    base = path.parent
    try:
        attr_files = tuple(
            AttributeFile(base / entry["path"], entry["format"])
            for entry in doc["attributes"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise _manifest_error(
            path, f"attributes entries need 'path' and 'format': {exc}"
        ) from None

    aliases: dict[str, AttributeAlias] = {}
    if not isinstance(doc["aliases"], dict) or not doc["aliases"]:
        raise _manifest_error(path, "aliases must be a non-empty object")
    for canonical, spec in doc["aliases"].items():
        if not isinstance(spec, dict) or "source" not in spec:
            raise _manifest_error(
                path, f"alias {canonical!r} needs an object with a 'source'"
            )
        aliases[canonical] = AttributeAlias(
            source=str(spec["source"]),
            positive_is_with=bool(spec.get("positive_is_with", True)),
        )

    gt_scheme = str(doc["gt_scheme"])
    pred_scheme = str(doc["pred_scheme"])
    try:
        return DatasetManifest(
            dataset=str(doc["dataset"]),
            gt_landmarks=base / doc["gt_landmarks"],
            pred_landmarks=base / doc["pred_landmarks"],
            attributes=attr_files,
            gt_scheme=gt_scheme,
            pred_scheme=pred_scheme,
            correspondence=_build_correspondence(doc.get("correspondence"), path),
            normalization=_build_normalization(
                doc.get("normalization"), gt_scheme, path
            ),
            aliases=aliases,
            test=str(doc.get("test", "welch")),
            alpha=float(doc.get("alpha", 0.001)),
            bonferroni=bool(doc.get("bonferroni", False)),
            seed=int(doc.get("seed", 0)),
        )
    except ParseError:
        raise
    except ValueError as exc:
        raise _manifest_error(path, str(exc)) from None


# ---------------------------------------------------------------------------
# Join
# ---------------------------------------------------------------------------

def _parse_attribute_file(entry: AttributeFile) -> dict[str, dict[str, str]]:
    content = entry.path.read_text(encoding="utf-8")
    source = str(entry.path)
    if entry.format == "celeba-attr":
        return parse_celeba_attributes(content, source)
    if entry.format == "csv":
        return parse_csv_attributes(content, source)
    return parse_jsonl_attributes(content, source)


def build_records(manifest: DatasetManifest) -> tuple[list[FaceRecord], IngestSummary]:
    """Join all manifest files into FaceRecords, one per ground-truth id.

    Ground truth is mandatory per record; predictions are optional
    (absent = detection failure). Attribute values are canonicalized
    through the alias map with polarity applied; records or columns the
    sources lack come out unknown. Orphan predictions (ids with no
    ground truth) are counted, never silently dropped.
    """
    gt = parse_landmark_csv(
        manifest.gt_landmarks.read_text(encoding="utf-8"),
        manifest.gt_scheme,
        str(manifest.gt_landmarks),
    )
    if not gt:
        raise ParseError(f"{manifest.gt_landmarks}: ground-truth file has no records")
    pred = parse_landmark_csv(
        manifest.pred_landmarks.read_text(encoding="utf-8"),
        manifest.pred_scheme,
        str(manifest.pred_landmarks),
    )

    merged: dict[str, dict[str, str]] = {}
    for entry in manifest.attributes:
        for rec_id, row in _parse_attribute_file(entry).items():
            slot = merged.setdefault(rec_id, {})
            for name, value in row.items():
                if name in slot:
                    raise ParseError(
                        f"{entry.path}: attribute column {name!r} for id {rec_id!r} "
                        "already provided by an earlier file"
                    )
                slot[name] = value

    records: list[FaceRecord] = []
    missing_pred = 0
    missing_attr = 0
    for rec_id, gt_set in gt.items():
        pred_set = pred.get(rec_id)
        if pred_set is None:
            missing_pred += 1
        source_row = merged.get(rec_id, {})
        attributes: dict[str, str] = {}
        for canonical, alias in manifest.aliases.items():
            value = alias.apply(source_row.get(alias.source, UNKNOWN))
            if value == UNKNOWN:
                missing_attr += 1
            attributes[canonical] = value
        records.append(
            FaceRecord(
                id=rec_id,
                dataset=manifest.dataset,
                gt=gt_set,
                pred=pred_set,
                attributes=attributes,
            )
        )

    orphan_pred = sum(1 for rec_id in pred if rec_id not in gt)
    summary = IngestSummary(
        joined=len(records),
        missing_pred=missing_pred,
        missing_attr=missing_attr,
        orphan_pred=orphan_pred,
    )
    return records, summary
