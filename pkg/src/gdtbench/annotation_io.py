"""Annotation JSON and manifest CSV input/output.

The canonical annotation schema is a top-level array of objects with keys
geometric_characteristic, tolerance, datum (datum "" when absent, or a
"|"-joined label list). The writer emits exactly one form; the reader also
accepts key synonyms and datum arrays. Manifests are RFC 4180 CSV with a
fixed header, quoted only where required, UTF-8, LF line endings, so files
written here round-trip byte-identically.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ._fs import write_text_atomic
from .errors import (
    DuplicateRecordId,
    EmptyValue,
    MalformedJson,
    MissingHeader,
    RaggedRow,
    SchemaViolation,
    UnknownSymbol,
)
from .model import (
    DATUM_SEPARATOR,
    DrawingAnnotation,
    FeatureControlFrame,
    FieldKind,
    normalize_field_value,
)
from .symbols import GeometricCharacteristic

CANONICAL_KEYS = ("geometric_characteristic", "tolerance", "datum")

#: Accepted input spellings for each canonical key (reader side only).
KEY_SYNONYMS: dict[str, str] = {
    "geometric_characteristic": "geometric_characteristic",
    "characteristic": "geometric_characteristic",
    "gdt_symbol": "geometric_characteristic",
    "symbol": "geometric_characteristic",
    "tolerance": "tolerance",
    "tolerance_value": "tolerance",
    "tol": "tolerance",
    "datum": "datum",
    "datum_reference": "datum",
    "datums": "datum",
    "datum_references": "datum",
}

MANIFEST_HEADER = ("record_id", "image_path", "query", "annotation_path")


@dataclass(frozen=True)
class ManifestRecord:
    """One dataset row linking an image to its query and ground truth."""

    record_id: str
    image_path: str
    query: str = ""
    annotation_path: str = ""


@dataclass(frozen=True)
class EntryCountHistogram:
    """Drawings per ground-truth entry count; absent counts mean zero."""

    counts: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


# --- annotation JSON ---------------------------------------------------------


def loads_preserving_numbers(text: str):
    # Numbers stay verbatim text ("0.050" must not become "0.05"): exact-match
    # scoring compares the characters the annotator wrote.
    return json.loads(text, parse_float=lambda s: s, parse_int=lambda s: s)


def fold_entry_keys(entry: dict) -> dict[str, object]:
    """Map an entry's keys onto canonical key names via the synonym table.

    Unknown keys are dropped; key casing and space/hyphen separators are
    folded before lookup. First occurrence wins on collisions.
    """
    folded: dict[str, object] = {}
    for key, value in entry.items():
        if not isinstance(key, str):
            continue
        canon = KEY_SYNONYMS.get(key.strip().lower().replace(" ", "_").replace("-", "_"))
        if canon is not None and canon not in folded:
            folded[canon] = value
    return folded


def datum_labels(value: object) -> tuple[str, ...]:
    """Coerce a datum field ("A|B" text or label array) to normalized labels."""
    if value is None:
        return ()
    if isinstance(value, str):
        raw_labels: Iterable[object] = value.split(DATUM_SEPARATOR)
    elif isinstance(value, (list, tuple)):
        raw_labels = value
    else:
        raw_labels = (value,)
    labels = []
    for raw in raw_labels:
        if not isinstance(raw, str):
            if isinstance(raw, bool) or raw is None:
                continue
            raw = str(raw)
        if not raw.strip():
            continue
        labels.append(normalize_field_value(raw, FieldKind.DATUM))
    return tuple(labels)


def _scalar_text(value: object) -> str | None:
    if isinstance(value, str):
        return value
    if isinstance(value, bool) or value is None:
        return None
    if isinstance(value, (int, float)):
        return repr(value)
    return None


def fcf_from_entry(entry: dict) -> FeatureControlFrame:
    """Build a normalized frame from one schema object (synonyms accepted).

    Raises UnknownSymbol / EmptyValue / SchemaViolation; callers decide
    whether those are fatal (ground truth) or droppable (predictions).
    """
    fields = fold_entry_keys(entry)
    raw_characteristic = _scalar_text(fields.get("geometric_characteristic"))
    if raw_characteristic is None:
        raise SchemaViolation("missing geometric_characteristic")
    glyph = normalize_field_value(raw_characteristic, FieldKind.CHARACTERISTIC)
    raw_tolerance = _scalar_text(fields.get("tolerance"))
    if raw_tolerance is None:
        raise SchemaViolation("missing tolerance")
    tolerance = normalize_field_value(raw_tolerance, FieldKind.TOLERANCE)
    datums = datum_labels(fields.get("datum"))
    return FeatureControlFrame(
        characteristic=GeometricCharacteristic(glyph),
        tolerance=tolerance,
        datums=datums,
    )


def parse_annotation(text: str, drawing_id: str = "") -> DrawingAnnotation:
    """Parse canonical-schema JSON into a normalized annotation.

    Raises MalformedJson for non-JSON input, SchemaViolation for a wrong
    shape (non-array top level, non-object entries, missing or empty
    required fields), and UnknownSymbol, tagged with the entry index, for an
    unrecognized characteristic.
    """
    try:
        data = loads_preserving_numbers(text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaViolation(
            f"top level must be an array, got {type(data).__name__}"
        )
    fcfs = []
    for index, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise SchemaViolation(f"entry {index}: expected an object")
        try:
            fcfs.append(fcf_from_entry(entry))
        except UnknownSymbol as exc:
            raise UnknownSymbol(f"entry {index}: {exc}") from exc
        except (SchemaViolation, EmptyValue) as exc:
            raise SchemaViolation(f"entry {index}: {exc}") from exc
    return DrawingAnnotation(drawing_id=drawing_id, fcfs=tuple(fcfs))


def serialize_annotation(annotation: DrawingAnnotation) -> str:
    """Emit canonical-schema JSON: fixed key order, 2-space indent, raw glyphs."""
    entries = [
        {
            "geometric_characteristic": fcf.characteristic.glyph,
            "tolerance": fcf.tolerance,
            "datum": DATUM_SEPARATOR.join(fcf.datums),
        }
        for fcf in annotation.fcfs
    ]
    return json.dumps(entries, indent=2, ensure_ascii=False)


def read_annotation(path: Path | str, drawing_id: str | None = None) -> DrawingAnnotation:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_annotation(text, drawing_id if drawing_id is not None else path.stem)


def write_annotation(annotation: DrawingAnnotation, path: Path | str) -> None:
    write_text_atomic(path, serialize_annotation(annotation) + "\n")


# --- manifest CSV --------------------------------------------------------------


def read_manifest(path: Path | str) -> list[ManifestRecord]:
    """Read a manifest CSV; rejects bad headers, ragged rows, duplicate ids."""
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingHeader(f"{path}: empty manifest") from None
        if tuple(header) != MANIFEST_HEADER:
            raise MissingHeader(
                f"{path}: expected header {','.join(MANIFEST_HEADER)}, got {','.join(header)}"
            )
        records: list[ManifestRecord] = []
        seen: set[str] = set()
        for row in reader:
            if len(row) != len(MANIFEST_HEADER):
                raise RaggedRow(
                    f"{path}: row {reader.line_num} has {len(row)} fields, expected "
                    f"{len(MANIFEST_HEADER)}"
                )
            record = ManifestRecord(*row)
            if record.record_id in seen:
                raise DuplicateRecordId(f"{path}: duplicate record_id {record.record_id!r}")
            seen.add(record.record_id)
            records.append(record)
    return records


def manifest_to_csv(records: Sequence[ManifestRecord]) -> str:
    """Render records as manifest CSV text (stable minimal quoting, LF)."""
    seen: set[str] = set()
    for record in records:
        if record.record_id in seen:
            raise DuplicateRecordId(f"duplicate record_id {record.record_id!r}")
        seen.add(record.record_id)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(MANIFEST_HEADER)
    for record in records:
        writer.writerow(
            (record.record_id, record.image_path, record.query, record.annotation_path)
        )
    return buffer.getvalue()


def write_manifest(records: Sequence[ManifestRecord], path: Path | str) -> None:
    write_text_atomic(path, manifest_to_csv(records))


def resolve_manifest_paths(
    records: Sequence[ManifestRecord], base_dir: Path | str
) -> list[ManifestRecord]:
    """Anchor relative image/annotation paths at base_dir (manifest location)."""
    base = Path(base_dir)

    def resolve(path_text: str) -> str:
        if not path_text:
            return path_text
        path = Path(path_text)
        return path_text if path.is_absolute() else str(base / path)

    return [
        ManifestRecord(
            record_id=r.record_id,
            image_path=resolve(r.image_path),
            query=r.query,
            annotation_path=resolve(r.annotation_path),
        )
        for r in records
    ]


# --- dataset statistics ----------------------------------------------------------


def entry_count_histogram(annotations: Iterable[DrawingAnnotation]) -> EntryCountHistogram:
    """Count drawings by number of entries; histogram total equals input size."""
    counts = Counter(annotation.entry_count for annotation in annotations)
    return EntryCountHistogram(counts=dict(counts))
