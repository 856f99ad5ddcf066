"""Benchmark harness for GD&T extraction from 2D engineering drawings.

The pipeline: build a manifest of drawings and ground-truth annotations,
fan out query paraphrases, run batch inference against an HTTP endpoint,
repair and normalize the raw model text, score predictions by exact
key-value-pair matching, and emit baseline-relative comparison reports.
"""

from .annotation_io import (
    ManifestRecord,
    parse_annotation,
    read_annotation,
    read_manifest,
    serialize_annotation,
    write_annotation,
    write_manifest,
)
from .client import EndpointConfig, RawModelOutput, load_endpoint_config, run_batch
from .dataset import (
    QueryTemplatePool,
    SplitSpec,
    augment_queries,
    build_manifest,
    split_train_val,
)
from .errors import GdtBenchError
from .model import (
    DrawingAnnotation,
    FeatureControlFrame,
    FieldKind,
    KeyValuePair,
    flatten_pairs,
    normalize_field_value,
)
from .repair import repair_directory, repair_prediction
from .report import RunResult, comparison_table, relative_change, run_from_rows
from .scoring import (
    MatchCounts,
    Metrics,
    ScoreRow,
    aggregate_micro,
    compute_metrics,
    match_counts,
    score_records,
    stratify_by_entry_count,
)
from .symbols import GeometricCharacteristic, canonical_symbol

__version__ = "0.1.0"

__all__ = [
    "DrawingAnnotation",
    "EndpointConfig",
    "FeatureControlFrame",
    "FieldKind",
    "GdtBenchError",
    "GeometricCharacteristic",
    "KeyValuePair",
    "ManifestRecord",
    "MatchCounts",
    "Metrics",
    "QueryTemplatePool",
    "RawModelOutput",
    "RunResult",
    "ScoreRow",
    "SplitSpec",
    "aggregate_micro",
    "augment_queries",
    "build_manifest",
    "canonical_symbol",
    "comparison_table",
    "compute_metrics",
    "flatten_pairs",
    "load_endpoint_config",
    "match_counts",
    "normalize_field_value",
    "parse_annotation",
    "read_annotation",
    "read_manifest",
    "relative_change",
    "repair_directory",
    "repair_prediction",
    "run_batch",
    "run_from_rows",
    "score_records",
    "serialize_annotation",
    "split_train_val",
    "stratify_by_entry_count",
    "write_annotation",
    "write_manifest",
]
