"""Exact-match scoring of predicted vs ground-truth annotations.

Both annotations are flattened to key-value-pair multisets and intersected:
tp is the multiset overlap, fp the unmatched predictions, fn the unmatched
ground truth. Matching is order-free and pools pairs across frames by
default; ``strict_frames`` switches to a one-to-one frame assignment that
maximizes total pair overlap. Metrics follow the usual precision/recall/F1
definitions plus a hallucination rate equal to 1 - precision.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

from ._fs import write_text_atomic
from .annotation_io import ManifestRecord, read_annotation
from .errors import MalformedJson
from .model import DrawingAnnotation, KeyValuePair, flatten_pairs

DEFAULT_OVERFLOW_BUCKET = 15


@dataclass(frozen=True)
class MatchCounts:
    """Pair-level true positives, false positives, false negatives."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class Metrics:
    """Fractions in [0, 1]; hallucination is always 1 - precision."""

    precision: float
    recall: float
    f1: float
    hallucination: float


@dataclass(frozen=True)
class Stratum:
    """Micro-aggregated results for one entry-count bucket."""

    counts: MatchCounts
    metrics: Metrics
    n_images: int


@dataclass(frozen=True)
class ScoreRow:
    """Per-record scoring result, one JSONL line."""

    record_id: str
    tp: int
    fp: int
    fn: int
    gt_count: int

    @property
    def counts(self) -> MatchCounts:
        return MatchCounts(self.tp, self.fp, self.fn)


def match_counts(
    pred: DrawingAnnotation, gt: DrawingAnnotation, strict_frames: bool = False
) -> MatchCounts:
    """Count matches between two normalized annotations.

    Default mode intersects the pooled pair multisets, so a pair may match
    across frame boundaries and frame order never matters. Strict mode first
    assigns predicted frames to ground-truth frames one-to-one (maximizing
    total pair overlap) and only counts overlap within assigned frames.
    """
    if strict_frames:
        return _match_counts_frames(pred, gt)
    predicted = flatten_pairs(pred)
    truth = flatten_pairs(gt)
    tp = (predicted & truth).total()
    return MatchCounts(tp=tp, fp=predicted.total() - tp, fn=truth.total() - tp)


def _frame_pairs(annotation: DrawingAnnotation) -> list[Counter[KeyValuePair]]:
    return [
        flatten_pairs(DrawingAnnotation(annotation.drawing_id, (fcf,)))
        for fcf in annotation.fcfs
    ]


def _match_counts_frames(pred: DrawingAnnotation, gt: DrawingAnnotation) -> MatchCounts:
    pred_pairs = _frame_pairs(pred)
    gt_pairs = _frame_pairs(gt)
    total_pred = sum(c.total() for c in pred_pairs)
    total_gt = sum(c.total() for c in gt_pairs)
    if not pred_pairs or not gt_pairs:
        return MatchCounts(tp=0, fp=total_pred, fn=total_gt)

    import numpy as np
    from scipy.optimize import linear_sum_assignment

    overlap = np.zeros((len(pred_pairs), len(gt_pairs)))
    for i, pc in enumerate(pred_pairs):
        for j, gc in enumerate(gt_pairs):
            overlap[i, j] = (pc & gc).total()
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    tp = int(overlap[rows, cols].sum())
    return MatchCounts(tp=tp, fp=total_pred - tp, fn=total_gt - tp)


def compute_metrics(c: MatchCounts) -> Metrics:
    """Precision, recall, F1, hallucination from one set of counts.

    All-zero counts mean vacuous perfect agreement (both sides empty) and
    score (1, 1, 1, 0). Any other 0/0 ratio evaluates to 0, and
    hallucination = 1 - precision holds in every case.
    """
    if c.tp == 0 and c.fp == 0 and c.fn == 0:
        return Metrics(precision=1.0, recall=1.0, f1=1.0, hallucination=0.0)
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(precision=precision, recall=recall, f1=f1, hallucination=1.0 - precision)


def aggregate_micro(per_image: list[MatchCounts]) -> Metrics:
    """Sum counts across images, then compute metrics once."""
    total = MatchCounts()
    for counts in per_image:
        total = total + counts
    return compute_metrics(total)


def stratify_by_entry_count(
    per_image: list[tuple[int, MatchCounts]],
    overflow_bucket: int = DEFAULT_OVERFLOW_BUCKET,
) -> dict[int, Stratum]:
    """Micro-aggregate per ground-truth entry count.

    Images with counts >= overflow_bucket pool into that bucket; empty
    buckets are omitted. Keys come back in ascending order.
    """
    grouped: dict[int, list[MatchCounts]] = defaultdict(list)
    for gt_count, counts in per_image:
        grouped[min(gt_count, overflow_bucket)].append(counts)
    strata = {}
    for bucket in sorted(grouped):
        members = grouped[bucket]
        total = MatchCounts()
        for counts in members:
            total = total + counts
        strata[bucket] = Stratum(
            counts=total, metrics=compute_metrics(total), n_images=len(members)
        )
    return strata


def score_records(
    records: list[ManifestRecord],
    pred_dir: Path | str,
    strict_frames: bool = False,
) -> list[ScoreRow]:
    """Score every manifest record against ``<pred_dir>/<record_id>.json``.

    A missing prediction file counts as an empty prediction (everything in
    the ground truth becomes a false negative). Rows keep manifest order.
    """
    pred_dir = Path(pred_dir)
    rows = []
    for record in records:
        gt = read_annotation(Path(record.annotation_path), drawing_id=record.record_id)
        pred_path = pred_dir / f"{record.record_id}.json"
        if pred_path.exists():
            pred = read_annotation(pred_path, drawing_id=record.record_id)
        else:
            pred = DrawingAnnotation(drawing_id=record.record_id)
        counts = match_counts(pred, gt, strict_frames=strict_frames)
        rows.append(
            ScoreRow(
                record_id=record.record_id,
                tp=counts.tp,
                fp=counts.fp,
                fn=counts.fn,
                gt_count=gt.entry_count,
            )
        )
    return rows


def write_scores_jsonl(rows: list[ScoreRow], path: Path | str) -> None:
    lines = [
        json.dumps(
            {
                "record_id": row.record_id,
                "tp": row.tp,
                "fp": row.fp,
                "fn": row.fn,
                "gt_count": row.gt_count,
            },
            ensure_ascii=False,
        )
        for row in rows
    ]
    write_text_atomic(Path(path), "\n".join(lines) + ("\n" if lines else ""))


def read_scores_jsonl(path: Path | str) -> list[ScoreRow]:
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedJson(f"{path}:{lineno}: {exc}") from exc
        try:
            rows.append(
                ScoreRow(
                    record_id=str(payload["record_id"]),
                    tp=int(payload["tp"]),
                    fp=int(payload["fp"]),
                    fn=int(payload["fn"]),
                    gt_count=int(payload["gt_count"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedJson(f"{path}:{lineno}: bad score row: {exc}") from exc
    return rows
