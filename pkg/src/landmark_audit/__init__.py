"""Bias audit harness for facial landmark detectors.

Computes per-face Normalized Mean Error, stratifies it by appearance
attributes, tests group differences for significance, compares bias
trends across datasets, plans test-set sizes, and simulates populations
with planted biases.
"""

from .audit import (
    AttributeAuditRow,
    AuditConfig,
    AuditError,
    FaceRecord,
    StratumResult,
    StratumTooSmallError,
    TrendComparison,
    UNKNOWN,
    WITH,
    WITHOUT,
    audit_attribute,
    audit_dataset,
    compare_trends,
    stratify,
)
from .ingest import (
    AttributeAlias,
    DatasetManifest,
    IngestSummary,
    ParseError,
    build_records,
    load_manifest,
)
from .metrics import (
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
)
from .report import RenderConfig, render_audit_table, render_trend_table
from .simulate import (
    AttributeBias,
    CompositionPlan,
    SimulationSpec,
    plan_composition,
    simulate_records,
    write_simulated_dataset,
)
from .stats import (
    PowerSpec,
    SampleSummary,
    TestResult,
    bootstrap_mean_diff_ci,
    permutation_test,
    required_sample_size,
    summarize,
    welch_t_test,
)

__version__ = "0.1.0"
