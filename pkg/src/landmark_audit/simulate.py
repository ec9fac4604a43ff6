"""Synthetic populations with planted per-attribute biases.

Every simulated face carries real landmark geometry constructed so the
metric layer reproduces the drawn error exactly: a fixed two-point
ground truth with inter-ocular distance 100 px, and a prediction whose
first point is displaced horizontally by 2*e*100 px, giving NME == e
under inter-ocular normalization. Auditing simulated records therefore
exercises ingestion, metrics, and statistics end to end, not just the
statistics.

Errors are drawn from a normal truncated at zero (NME is non-negative);
at the default sigma/mu ratios the truncation shifts stratum means by
far less than sampling noise. Record i consumes exactly the i-th
variate of the seeded stream, so generation is reproducible and
order-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .audit import UNKNOWN, WITH, WITHOUT, FaceRecord
from .ingest import format_jsonl_attributes, format_landmark_csv
from .metrics import LandmarkSet
from .stats import PowerSpec, norm_cdf, norm_ppf, required_sample_size

__all__ = [
    "AttributeBias",
    "SimulationSpec",
    "CompositionPlan",
    "simulate_records",
    "plan_composition",
    "write_simulated_dataset",
    "load_simulation_spec",
]

# Fixed simulation geometry: eye centers 100 px apart on the x axis.
SIM_SCHEME = "pair2"
_EYE_DISTANCE = 100.0
_GT_POINTS = ((0.0, 0.0), (_EYE_DISTANCE, 0.0))


@dataclass(frozen=True)
class AttributeBias:
    """Stratum sizes and error means for one attribute."""

    name: str
    n_with: int
    n_without: int
    mu_with: float
    mu_without: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("attribute name must be non-empty")
        if self.n_with < 2 or self.n_without < 2:
            raise ValueError(
                f"attribute {self.name!r}: stratum sizes must be >= 2, "
                f"got {self.n_with}/{self.n_without}"
            )
        if not self.sigma > 0:
            raise ValueError(f"attribute {self.name!r}: sigma must be > 0")
        if self.mu_with < 0 or self.mu_without < 0:
            raise ValueError(f"attribute {self.name!r}: error means must be >= 0")


@dataclass(frozen=True)
class SimulationSpec:
    dataset: str
    seed: int
    attributes: tuple[AttributeBias, ...]

    def __post_init__(self) -> None:
        if not self.attributes:
            raise ValueError("simulation needs at least one attribute")
        names = [a.name for a in self.attributes]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate attribute names in simulation spec: {names}")


@dataclass(frozen=True)
class CompositionPlan:
    """Test-set sizing: per-attribute per-stratum counts and the total.

    Under single-attribute stratification one pool of faces serves every
    attribute, so the pool size is the max over attributes of twice the
    per-stratum requirement.
    """

    per_stratum: dict[str, int]
    total: int


def _truncated_normal_ppf(u: float, mu: float, sigma: float) -> float:
    # Inverse CDF of N(mu, sigma) truncated to [0, inf), one uniform in.
    lo = norm_cdf(-mu / sigma)
    return mu + sigma * norm_ppf(lo + u * (1.0 - lo))


def _record_geometry(error: float) -> tuple[LandmarkSet, LandmarkSet]:
    gt = LandmarkSet.from_pairs(SIM_SCHEME, _GT_POINTS)
    displaced = (2.0 * error * _EYE_DISTANCE, 0.0)
    pred = LandmarkSet.from_pairs(SIM_SCHEME, (displaced, _GT_POINTS[1]))
    return gt, pred


def simulate_records(spec: SimulationSpec) -> list[FaceRecord]:
    """Generate the full record population for a simulation spec.

    Records come out in a fixed order: attributes in spec order, the
    "with" stratum then the "without" stratum, indexed within each
    stratum. Each record's attributes carry its own stratum value and
    unknown for every other attribute, so per-attribute audits never
    interfere.
    """
    all_names = [a.name for a in spec.attributes]
    total = sum(a.n_with + a.n_without for a in spec.attributes)
    uniforms = np.random.default_rng(spec.seed & 0xFFFFFFFFFFFFFFFF).random(total)

    records: list[FaceRecord] = []
    cursor = 0
    for bias in spec.attributes:
        for label, count, mu in (
            (WITH, bias.n_with, bias.mu_with),
            (WITHOUT, bias.n_without, bias.mu_without),
        ):
            for k in range(count):
                error = _truncated_normal_ppf(float(uniforms[cursor]), mu, bias.sigma)
                cursor += 1
                gt, pred = _record_geometry(error)
                attributes = {name: UNKNOWN for name in all_names}
                attributes[bias.name] = label
                records.append(
                    FaceRecord(
                        id=f"{bias.name}-{label}-{k:05d}",
                        dataset=spec.dataset,
                        gt=gt,
                        pred=pred,
                        attributes=attributes,
                    )
                )
    return records


def plan_composition(specs: Mapping[str, PowerSpec]) -> CompositionPlan:
    """Per-attribute stratum sizes from power analysis, plus pool total."""
    if not specs:
        raise ValueError("plan_composition needs at least one attribute spec")
    per_stratum: dict[str, int] = {}
    for name, spec in specs.items():
        try:
            per_stratum[name] = required_sample_size(spec)
        except ValueError as exc:
            raise ValueError(f"attribute {name!r}: {exc}") from exc
    total = max(2 * n for n in per_stratum.values())
    return CompositionPlan(per_stratum=per_stratum, total=total)


# ---------------------------------------------------------------------------
# Spec documents and dataset emission
# ---------------------------------------------------------------------------

def load_simulation_spec(path: str | Path) -> SimulationSpec:
    """Read a SimulationSpec JSON document.

    Layout: {"dataset": str, "seed": int, "attributes": [{"name", "n_with",
    "n_without", "mu_with", "mu_without", "sigma"}, ...]}.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON: {exc}") from None
    try:
        attributes = tuple(
            AttributeBias(
                name=str(entry["name"]),
                n_with=int(entry["n_with"]),
                n_without=int(entry["n_without"]),
                mu_with=float(entry["mu_with"]),
                mu_without=float(entry["mu_without"]),
                sigma=float(entry["sigma"]),
            )
            for entry in doc["attributes"]
        )
        return SimulationSpec(
            dataset=str(doc.get("dataset", "synthetic")),
            seed=int(doc.get("seed", 0)),
            attributes=attributes,
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: invalid simulation spec: {exc}") from None


def write_simulated_dataset(spec: SimulationSpec, out_dir: str | Path) -> dict[str, Path]:
    """Emit a simulated dataset in the ingest file formats, plus a manifest.

    Writes gt.csv, pred.csv, attributes.jsonl, and manifest.json into
    out_dir; the manifest feeds the audit pipeline unmodified.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = simulate_records(spec)

    gt = {rec.id: rec.gt for rec in records}
    pred = {rec.id: rec.pred for rec in records if rec.pred is not None}
    attrs = {rec.id: dict(rec.attributes) for rec in records}

    paths = {
        "gt": out_dir / "gt.csv",
        "pred": out_dir / "pred.csv",
        "attributes": out_dir / "attributes.jsonl",
        "manifest": out_dir / "manifest.json",
    }
    paths["gt"].write_text(format_landmark_csv(gt, SIM_SCHEME), encoding="utf-8")
    paths["pred"].write_text(format_landmark_csv(pred, SIM_SCHEME), encoding="utf-8")
    paths["attributes"].write_text(format_jsonl_attributes(attrs), encoding="utf-8")

    manifest = {
        "dataset": spec.dataset,
        "gt_landmarks": "gt.csv",
        "pred_landmarks": "pred.csv",
        "attributes": [{"path": "attributes.jsonl", "format": "json-lines"}],
        "gt_scheme": SIM_SCHEME,
        "pred_scheme": SIM_SCHEME,
        "correspondence": None,
        "normalization": {"kind": "interocular", "left_eye": [0], "right_eye": [1]},
        "aliases": {
            bias.name: {"source": bias.name, "positive_is_with": True}
            for bias in spec.attributes
        },
        "test": "welch",
        "alpha": 0.001,
        "seed": spec.seed,
    }
    paths["manifest"].write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return paths
