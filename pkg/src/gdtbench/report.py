"""Comparison tables and figure-data CSVs.

Metrics are displayed as percentages rounded half-away-from-zero to two
decimals. Each non-baseline run carries signed relative changes against the
best baseline chosen per metric: the highest baseline value for precision,
recall, and F1, the lowest for hallucination. Deltas are computed from the
rounded percentages so the printed table is self-consistent.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

from .errors import NoBaseline, ZeroBaseline
from .scoring import ScoreRow, Stratum, Metrics, aggregate_micro, stratify_by_entry_count

METRIC_FIELDS = ("precision", "recall", "f1", "hallucination")

# Lower is better only for hallucination.
_MINIMIZED_FIELDS = frozenset({"hallucination"})


@dataclass(frozen=True)
class RunResult:
    """One scored run: aggregate metrics plus per-bucket breakdown."""

    run_name: str
    metrics: Metrics
    strata: dict[int, Stratum]
    is_baseline: bool = False


@dataclass(frozen=True)
class ComparisonRow:
    run_name: str
    is_baseline: bool
    percents: dict[str, float]
    deltas: dict[str, float] | None  # None for baseline rows


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    best_baseline: dict[str, float]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["run_name", "is_baseline"]
        for field in METRIC_FIELDS:
            header += [field, f"{field}_delta"]
        writer.writerow(header)
        for row in self.rows:
            cells = [row.run_name, "true" if row.is_baseline else "false"]
            for field in METRIC_FIELDS:
                cells.append(f"{row.percents[field]:.2f}")
                cells.append("" if row.deltas is None else f"{row.deltas[field]:+.2f}")
            writer.writerow(cells)
        return buf.getvalue()

    def to_text(self) -> str:
        cells = []
        for row in self.rows:
            line = [row.run_name]
            for field in METRIC_FIELDS:
                if row.deltas is None:
                    line.append(f"{row.percents[field]:.2f}")
                else:
                    line.append(f"{row.percents[field]:.2f} ({row.deltas[field]:+.2f}%)")
            cells.append(line)
        header = ["run"] + list(METRIC_FIELDS)
        widths = [
            max(len(header[i]), *(len(line[i]) for line in cells)) if cells else len(header[i])
            for i in range(len(header))
        ]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
            "  ".join("-" * w for w in widths),
        ]
        for line in cells:
            lines.append("  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip())
        return "\n".join(lines) + "\n"


def round_half_away(value: float, digits: int = 2) -> float:
    """Round half away from zero (the built-in rounds halves to even)."""
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def as_percent(fraction: float) -> float:
    return round_half_away(100.0 * fraction)


def relative_change(value: float, baseline: float) -> float:
    """Signed percent change of ``value`` against ``baseline``.

    Both arguments are percentages; the result is rounded half away from
    zero to two decimals. A zero baseline has no defined relative change.
    """
    if baseline == 0:
        raise ZeroBaseline("relative change against a zero baseline is undefined")
    return round_half_away(100.0 * (value - baseline) / baseline)


def comparison_table(runs: list[RunResult]) -> ComparisonTable:
    """Build the baseline-relative comparison for a set of runs.

    Row order follows input order. Raises NoBaseline when no run is marked
    as a baseline and ValueError on duplicate run names.
    """
    names = [run.run_name for run in runs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate run names in report: {names}")
    baselines = [run for run in runs if run.is_baseline]
    if not baselines:
        raise NoBaseline("comparison requires at least one baseline run")

    best_baseline = {}
    for field in METRIC_FIELDS:
        values = [as_percent(getattr(run.metrics, field)) for run in baselines]
        best_baseline[field] = min(values) if field in _MINIMIZED_FIELDS else max(values)

    rows = []
    for run in runs:
        percents = {field: as_percent(getattr(run.metrics, field)) for field in METRIC_FIELDS}
        deltas = None
        if not run.is_baseline:
            deltas = {
                field: relative_change(percents[field], best_baseline[field])
                for field in METRIC_FIELDS
            }
        rows.append(
            ComparisonRow(
                run_name=run.run_name,
                is_baseline=run.is_baseline,
                percents=percents,
                deltas=deltas,
            )
        )
    return ComparisonTable(rows=tuple(rows), best_baseline=best_baseline)


def run_from_rows(run_name: str, rows: list[ScoreRow], is_baseline: bool = False) -> RunResult:
    """Aggregate per-record score rows into a RunResult."""
    return RunResult(
        run_name=run_name,
        metrics=aggregate_micro([row.counts for row in rows]),
        strata=stratify_by_entry_count([(row.gt_count, row.counts) for row in rows]),
        is_baseline=is_baseline,
    )


def histogram_csv(counts: dict[int, int]) -> str:
    """Figure data: drawings per ground-truth entry count."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["entry_count", "drawings"])
    for entry_count in sorted(counts):
        writer.writerow([entry_count, counts[entry_count]])
    return buf.getvalue()


def strata_csv(strata: dict[int, Stratum]) -> str:
    """Figure data: metrics per entry-count bucket, percentages at 2dp."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["entry_count", "precision", "recall", "f1", "hallucination", "n_images"])
    for bucket in sorted(strata):
        stratum = strata[bucket]
        writer.writerow(
            [
                bucket,
                f"{as_percent(stratum.metrics.precision):.2f}",
                f"{as_percent(stratum.metrics.recall):.2f}",
                f"{as_percent(stratum.metrics.f1):.2f}",
                f"{as_percent(stratum.metrics.hallucination):.2f}",
                stratum.n_images,
            ]
        )
    return buf.getvalue()
