"""Command-line surface tying the pipeline together.

Subcommands cover the whole benchmark flow: build-manifest, augment, split,
stats, infer, repair, score, report. Every command exits 0 on success and
nonzero with a diagnostic on stderr otherwise. Set GDTB_LOG=debug|info|
warning|error to control verbosity. Relative paths inside a manifest are
resolved against the manifest's own directory when files are read.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ._fs import write_text_atomic
from .annotation_io import (
    entry_count_histogram,
    read_annotation,
    read_manifest,
    resolve_manifest_paths,
    write_manifest,
)
from .client import DEFAULT_INSTRUCTION, load_endpoint_config, run_batch
from .dataset import (
    SplitSpec,
    augment_queries,
    build_manifest,
    load_query_pool,
    split_train_val,
)
from .errors import GdtBenchError, NoBaseline
from .repair import repair_directory
from .report import comparison_table, histogram_csv, run_from_rows, strata_csv
from .scoring import aggregate_micro, read_scores_jsonl, score_records, write_scores_jsonl

logger = logging.getLogger(__name__)

_LOG_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}


def _configure_logging() -> None:
    raw = os.environ.get("GDTB_LOG", "").strip().lower()
    logging.basicConfig(
        level=_LOG_LEVELS.get(raw, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _resolved_manifest(manifest: str):
    records = read_manifest(manifest)
    return records, resolve_manifest_paths(records, Path(manifest).parent)


def _cmd_build_manifest(args: argparse.Namespace) -> int:
    records = build_manifest(args.images, args.annotations)
    write_manifest(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_augment(args: argparse.Namespace) -> int:
    records = read_manifest(args.manifest)
    pool = load_query_pool(args.pool)
    augmented = augment_queries(records, args.queries, pool, args.seed)
    write_manifest(augmented, args.out)
    print(f"augmented {len(records)} records into {len(augmented)}")
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    records, resolved = _resolved_manifest(args.manifest)
    spec = SplitSpec(train_fraction=args.ratio, seed=args.seed, stratify=args.stratify)
    entry_count_for = None
    if args.stratify:
        annotation_path = {r.record_id: r.annotation_path for r in resolved}
        entry_count_for = lambda record: read_annotation(
            annotation_path[record.record_id]
        ).entry_count
    train, val = split_train_val(records, spec, entry_count_for=entry_count_for)
    write_manifest(train, args.train)
    write_manifest(val, args.val)
    print(f"split {len(records)} records into {len(train)} train / {len(val)} val")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    _, resolved = _resolved_manifest(args.manifest)
    annotations = [
        read_annotation(record.annotation_path, drawing_id=record.record_id)
        for record in resolved
    ]
    histogram = entry_count_histogram(annotations)
    write_text_atomic(Path(args.out), histogram_csv(histogram.counts))
    print(f"entry-count histogram over {histogram.total} drawings written to {args.out}")
    return 0


def _cmd_infer(args: argparse.Namespace) -> int:
    config = load_endpoint_config(args.config, args.endpoint)
    _, resolved = _resolved_manifest(args.manifest)
    summary = run_batch(config, resolved, args.out_dir, instruction=args.instruction)
    print(
        f"succeeded={summary.succeeded} skipped={summary.skipped} failed={summary.failed}"
    )
    if summary.failed:
        for record_id, reason in summary.failures:
            print(f"failed {record_id}: {reason}", file=sys.stderr)
        return 1
    return 0


def _cmd_repair(args: argparse.Namespace) -> int:
    endpoint = None
    if args.llm_endpoint:
        if not args.config:
            print("error: --llm-endpoint requires --config", file=sys.stderr)
            return 2
        endpoint = load_endpoint_config(args.config, args.llm_endpoint)
    results = repair_directory(args.in_dir, repair_endpoint=endpoint)
    unparsed = sum(1 for _, report in results if not report.parse_ok)
    dropped = sum(report.dropped_entries for _, report in results)
    print(
        f"repaired {len(results)} records "
        f"(unparseable: {unparsed}, dropped entries: {dropped})"
    )
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    _, resolved = _resolved_manifest(args.manifest)
    rows = score_records(resolved, args.pred_dir, strict_frames=args.strict_frames)
    write_scores_jsonl(rows, args.out)
    metrics = aggregate_micro([row.counts for row in rows])
    print(
        json.dumps(
            {
                "precision": metrics.precision,
                "recall": metrics.recall,
                "f1": metrics.f1,
                "hallucination": metrics.hallucination,
            }
        )
    )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    baseline_names = {name.strip() for name in args.baselines.split(",") if name.strip()}
    runs = []
    for path_text in args.scores:
        path = Path(path_text)
        runs.append(
            run_from_rows(
                path.stem, read_scores_jsonl(path), is_baseline=path.stem in baseline_names
            )
        )
    unknown = baseline_names - {run.run_name for run in runs}
    if unknown:
        raise NoBaseline(f"baseline names not among runs: {sorted(unknown)}")
    table = comparison_table(runs)
    write_text_atomic(Path(args.out), table.to_csv())
    if args.strata_dir:
        strata_dir = Path(args.strata_dir)
        strata_dir.mkdir(parents=True, exist_ok=True)
        for run in runs:
            write_text_atomic(strata_dir / f"{run.run_name}.strata.csv", strata_csv(run.strata))
    print(table.to_text(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdtbench",
        description="Benchmark GD&T extraction from engineering drawings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-manifest", help="index drawings and annotations into a CSV")
    p.add_argument("--images", required=True, help="directory of PNG drawings")
    p.add_argument("--annotations", required=True, help="directory of <stem>.json ground truth")
    p.add_argument("--out", required=True, help="manifest CSV to write")
    p.set_defaults(handler=_cmd_build_manifest)

    p = sub.add_parser("augment", help="expand each record with query paraphrases")
    p.add_argument("--manifest", required=True)
    p.add_argument("--queries", required=True, type=int, choices=(1, 2, 4))
    p.add_argument("--pool", required=True, help="JSON array of query templates")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_augment)

    p = sub.add_parser("split", help="deterministic train/val partition")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratio", required=True, type=float, help="train fraction, e.g. 0.8")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--stratify", action="store_true", help="group by entry count")
    p.add_argument("--train", required=True, help="train manifest to write")
    p.add_argument("--val", required=True, help="val manifest to write")
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("stats", help="entry-count histogram CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("infer", help="batch model inference over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--endpoint", required=True, help="endpoint name in the config file")
    p.add_argument("--config", required=True, help="endpoint config JSON")
    p.add_argument("--out-dir", required=True, help="directory for raw model outputs")
    p.add_argument("--instruction", default=DEFAULT_INSTRUCTION, help=argparse.SUPPRESS)
    p.set_defaults(handler=_cmd_infer)

    p = sub.add_parser("repair", help="turn raw outputs into normalized predictions")
    p.add_argument("--in-dir", required=True, help="directory of *.raw.txt outputs")
    p.add_argument("--llm-endpoint", default="", help="endpoint name for assisted repair")
    p.add_argument("--config", default="", help="endpoint config JSON")
    p.set_defaults(handler=_cmd_repair)

    p = sub.add_parser("score", help="exact-match scoring against ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred-dir", required=True, help="directory of <record_id>.json predictions")
    p.add_argument("--out", required=True, help="per-record scores JSONL")
    p.add_argument("--strict-frames", action="store_true", help="one-to-one frame matching")
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("report", help="baseline-relative comparison table")
    p.add_argument("--scores", required=True, nargs="+", help="score JSONL files, one per run")
    p.add_argument("--baselines", required=True, help="comma-separated baseline run names")
    p.add_argument("--out", required=True, help="comparison CSV to write")
    p.add_argument("--strata-dir", default="", help="also write per-run strata CSVs here")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (GdtBenchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
