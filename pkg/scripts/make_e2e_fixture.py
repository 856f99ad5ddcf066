#!/usr/bin/env python3
"""Generate the bundled end-to-end fixture under tests/fixtures/e2e/.

Ten tiny synthetic drawings with ground-truth annotations, canned noisy
model responses (markdown fences, smart quotes, key synonyms, alias glyphs,
trailing commas, one garbage reply, one object-not-array reply), and the
metrics the pipeline must reproduce. Expected counts come from this
script's own longhand pair matching, written without importing the package
so the fixture stays an independent check on it.

Responses are keyed by image content: index.json maps sha256(image bytes)
to record_id so a stub HTTP server can serve the right canned text without
trusting request metadata.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "e2e"


def png_bytes(width: int, height: int, rgb: tuple[int, int, int]) -> bytes:
    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    header = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + bytes(rgb) * width for _ in range(height))
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", header)
        + chunk(b"IDAT", zlib.compress(raw))
        + chunk(b"IEND", b"")
    )


# Each entry: (characteristic glyph, tolerance, datum text "A|B" or "").
# All values are already in canonical form.
GROUND_TRUTH: dict[str, list[tuple[str, str, str]]] = {
    "d00": [],
    "d01": [("⏥", "0.1", "")],
    "d02": [("⟂", "⌀0.2Ⓜ", "A"), ("∥", "0.05", "B")],
    "d03": [("⌖", "⌀0.5", "A|B"), ("○", "0.2", ""), ("⌒", "0.4", "C")],
    "d04": [
        ("⏤", "0.02", ""),
        ("⌭", "0.15", "A"),
        ("⌓", "0.3", "A|B"),
        ("↗", "0.1", "D"),
    ],
    "d05": [
        ("⌖", "⌀0.25Ⓜ", "A|BⓂ"),
        ("∠", "0.5", "A"),
        ("⌯", "0.08", "B"),
        ("⏥", "0.05", ""),
        ("⌰", "0.12", "A-B"),
    ],
    "d06": [
        ("⏤", "0.01", ""),
        ("⟂", "0.3", "A"),
        ("⌖", "⌀0.1Ⓛ", "A|B"),
        ("○", "0.25", ""),
        ("∥", "0.15", "B"),
        ("⌓", "0.2", "A"),
    ],
    "d07": [("⌖", "⌀0.3", "A|B"), ("⏥", "0.1", "")],
    "d08": [("∠", "0.4", "A"), ("↗", "0.05", "B"), ("⌰", "0.2", "A|B")],
    "d09": [("◎", "0.05", "A")],
}

# What each canned response should normalize to (canonical form).
INTENDED_PREDICTIONS: dict[str, list[tuple[str, str, str]]] = {
    "d00": [],
    "d01": [("⏥", "0.1", "")],
    "d02": [("⟂", "⌀0.2Ⓜ", "A"), ("∥", "0.05", "B")],
    # middle tolerance substituted: 0.3 instead of 0.2
    "d03": [("⌖", "⌀0.5", "A|B"), ("○", "0.3", ""), ("⌒", "0.4", "C")],
    # last frame missed, one spurious frame added
    "d04": [
        ("⏤", "0.02", ""),
        ("⌭", "0.15", "A"),
        ("⌓", "0.3", "A|B"),
        ("◎", "0.9", "Z"),
    ],
    # exact content, shuffled order
    "d05": [
        ("∠", "0.5", "A"),
        ("⌰", "0.12", "A-B"),
        ("⌖", "⌀0.25Ⓜ", "A|BⓂ"),
        ("⌯", "0.08", "B"),
        ("⏥", "0.05", ""),
    ],
    # third frame loses its datums, fourth gains a spurious one
    "d06": [
        ("⏤", "0.01", ""),
        ("⟂", "0.3", "A"),
        ("⌖", "⌀0.1Ⓛ", ""),
        ("○", "0.25", "C"),
        ("∥", "0.15", "B"),
        ("⌓", "0.2", "A"),
    ],
    "d07": [],  # garbage response, no JSON at all
    "d08": [],  # response is a JSON object, not an array
    "d09": [("◎", "0.05", "A")],  # plus one unsalvageable entry that gets dropped
}

# Raw model text replayed by the stub endpoint. Every noisy construction
# here must be undone by the repair pipeline, except d07/d08 which must
# fail cleanly to an empty prediction.
RESPONSES: dict[str, str] = {
    "d00": "The drawing contains no tolerance callouts at all.\n\n[]",
    "d01": (
        "```json\n"
        "[\n"
        '  {"gdt_symbol": "flatness", "tolerance_value": 0.1, "datums": []}\n'
        "]\n"
        "```"
    ),
    "d02": (
        "Here is the extraction you asked for:\n"
        "```json\n"
        "[\n"
        '  {"geometric_characteristic": "⊥", "tolerance": "Ø 0.2 (M)", "datum": "A"},\n'
        '  {"geometric_characteristic": "//", "tolerance": "0.05", "datum": "B"}\n'
        "]\n"
        "```\n"
        "All frames are listed in drawing order."
    ),
    "d03": (
        "[{'characteristic': 'position', 'tol': 'Ø0.5', 'datum': 'A|B'}, "
        "{'characteristic': 'circularity', 'tol': '0.3', 'datum': ''}, "
        "{'characteristic': 'profile of a line', 'tol': '0.4', 'datum': 'C'},]"
    ),
    "d04": (
        "[\n"
        "  {“geometric_characteristic”: “⏤”, “tolerance”: “0.02”, “datum”: “”},\n"
        "  {“geometric_characteristic”: “⌭”, “tolerance”: “0.15”, “datum”: “A”},\n"
        "  {“geometric_characteristic”: “⌓”, “tolerance”: “0.3”, “datum”: “A|B”},\n"
        "  {“geometric_characteristic”: “◎”, “tolerance”: “0.9”, “datum”: “Z”}\n"
        "]"
    ),
    "d05": (
        "```\n"
        "[\n"
        '  {"symbol": "∠", "tolerance": "0.5", "datum_reference": "A"},\n'
        '  {"symbol": "total run out", "tolerance": "0.12", "datum_reference": "A-B"},\n'
        '  {"symbol": "⌖", "tolerance": "Ø 0.25 (M)", "datum_reference": ["A", "B(M)"]},\n'
        '  {"symbol": "⌯", "tolerance": "0.08", "datum_reference": "B"},\n'
        '  {"symbol": "⏥", "tolerance": 0.05, "datum_reference": []}\n'
        "]\n"
        "```"
    ),
    "d06": (
        "[\n"
        '  {"geometric_characteristic": "straightness", "tolerance": "0.01", "datum": ""},\n'
        '  {"geometric_characteristic": "⊥", "tolerance": "0.3", "datum": "A"},\n'
        '  {"geometric_characteristic": "⌖", "tolerance": "Ø 0.1 (L)", "datum": ""},\n'
        '  {"geometric_characteristic": "circularity", "tolerance": "0.25", "datum": "C"},\n'
        '  {"geometric_characteristic": "parallelism", "tolerance": "0.15", "datum": "B"},\n'
        '  {"geometric_characteristic": "⌓", "tolerance": "0.2", "datum": "A"}\n'
        "]"
    ),
    "d07": "I could not find any feature control frames in this drawing, sorry.",
    "d08": (
        '{"entries": [{"geometric_characteristic": "∠", "tolerance": "0.4", '
        '"datum": "A"}]}'
    ),
    "d09": (
        '[{"geometric_characteristic": "wavy", "tolerance": "9.9", "datum": ""}, '
        '{"geometric_characteristic": "concentricity", "tolerance": "0.05", '
        '"datum": "A"}]'
    ),
}


def entry_pairs(entries: list[tuple[str, str, str]]) -> list[tuple[str, str]]:
    pairs = []
    for characteristic, tolerance, datum in entries:
        pairs.append(("characteristic", characteristic))
        pairs.append(("tolerance", tolerance))
        if datum:
            pairs.append(("datum", datum))
    return pairs


def oracle_counts(
    pred: list[tuple[str, str, str]], gt: list[tuple[str, str, str]]
) -> tuple[int, int, int]:
    gt_left = entry_pairs(gt)
    pred_pairs = entry_pairs(pred)
    tp = 0
    for pair in pred_pairs:
        if pair in gt_left:
            gt_left.remove(pair)
            tp += 1
    return tp, len(pred_pairs) - tp, len(gt_left)


def percent_2dp(fraction: float) -> str:
    value = Decimal(repr(100.0 * fraction)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{value:.2f}"


def main() -> None:
    images_dir = FIXTURE_DIR / "images"
    annotations_dir = FIXTURE_DIR / "annotations"
    responses_dir = FIXTURE_DIR / "responses"
    for directory in (images_dir, annotations_dir, responses_dir):
        directory.mkdir(parents=True, exist_ok=True)

    index = {}
    per_record = []
    total_tp = total_fp = total_fn = 0
    for i, record_id in enumerate(sorted(GROUND_TRUTH)):
        image = png_bytes(4 + i, 4, (40 * i % 256, 90, 255 - 20 * i))
        (images_dir / f"{record_id}.png").write_bytes(image)
        index[hashlib.sha256(image).hexdigest()] = record_id

        gt_entries = [
            {"geometric_characteristic": c, "tolerance": t, "datum": d}
            for c, t, d in GROUND_TRUTH[record_id]
        ]
        (annotations_dir / f"{record_id}.json").write_text(
            json.dumps(gt_entries, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        (responses_dir / f"{record_id}.txt").write_text(
            RESPONSES[record_id], encoding="utf-8"
        )

        tp, fp, fn = oracle_counts(INTENDED_PREDICTIONS[record_id], GROUND_TRUTH[record_id])
        per_record.append(
            {
                "record_id": record_id,
                "tp": tp,
                "fp": fp,
                "fn": fn,
                "gt_count": len(GROUND_TRUTH[record_id]),
            }
        )
        total_tp += tp
        total_fp += fp
        total_fn += fn

    (responses_dir / "index.json").write_text(
        json.dumps(index, indent=2) + "\n", encoding="utf-8"
    )

    precision = total_tp / (total_tp + total_fp)
    recall = total_tp / (total_tp + total_fn)
    f1 = 2 * precision * recall / (precision + recall)
    hallucination = 1.0 - precision
    expected = {
        "per_record": per_record,
        "aggregate": {
            "tp": total_tp,
            "fp": total_fp,
            "fn": total_fn,
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "hallucination": hallucination,
        },
        "report_percents": {
            "precision": percent_2dp(precision),
            "recall": percent_2dp(recall),
            "f1": percent_2dp(f1),
            "hallucination": percent_2dp(hallucination),
        },
    }
    (FIXTURE_DIR / "expected_metrics.json").write_text(
        json.dumps(expected, indent=2) + "\n", encoding="utf-8"
    )
    print(f"fixture written to {FIXTURE_DIR}")
    print(f"aggregate counts: tp={total_tp} fp={total_fp} fn={total_fn}")


if __name__ == "__main__":
    main()
