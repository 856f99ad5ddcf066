"""Turn raw model text into normalized annotations.

Models rarely emit the output contract exactly: JSON arrives wrapped in
prose or markdown fences, with smart quotes, trailing commas, or
single-quoted strings. The pipeline here is: locate a balanced JSON block,
apply deterministic text repairs, parse, and normalize keys/values into the
canonical schema. An optional endpoint-assisted repair pass handles text
the deterministic stages cannot fix; it is off by default so results stay
reproducible. Records that still fail score as empty predictions.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from ._fs import write_text_atomic
from .annotation_io import (
    fcf_from_entry,
    loads_preserving_numbers,
    serialize_annotation,
)
from .client import (
    EndpointConfig,
    RAW_OUTPUT_SUFFIX,
    build_text_request,
    execute_with_retry,
)
from .errors import (
    EmptyValue,
    GdtBenchError,
    NoJsonFound,
    NotAnArray,
    RepairRefused,
    SchemaViolation,
    UnknownSymbol,
)
from .model import DrawingAnnotation

logger = logging.getLogger(__name__)

REPAIR_INSTRUCTION = (
    "Rewrite the following text as a valid JSON array of objects with keys "
    "geometric_characteristic, tolerance, datum. Change formatting only, "
    "never content."
)

REPORT_SUFFIX = ".repair.json"

_SMART_QUOTES = str.maketrans(
    {
        "“": '"',
        "”": '"',
        "„": '"',
        "‟": '"',
        "‘": "'",
        "’": "'",
        "‚": "'",
        "‛": "'",
    }
)

_FENCE_MARKER = "```"


@dataclass
class RepairReport:
    """What the pipeline did to one record."""

    stage_applied: list[str] = field(default_factory=list)
    parse_ok: bool = False
    dropped_entries: int = 0
    error: str = ""


def extract_json_block(text: str) -> str:
    """Return the first balanced top-level JSON array/object, verbatim.

    Markdown code fences are stripped first; the scan honors quoted spans so
    brackets inside string values cannot unbalance it. Raises NoJsonFound.
    """
    candidate = _strip_code_fences(text)
    for start, ch in enumerate(candidate):
        if ch in "[{":
            end = _scan_balanced(candidate, start)
            if end is not None:
                return candidate[start : end + 1]
    raise NoJsonFound("no balanced JSON array or object in model text")


def _strip_code_fences(text: str) -> str:
    if _FENCE_MARKER not in text:
        return text
    pieces = []
    for i, chunk in enumerate(text.split(_FENCE_MARKER)):
        if i % 2 == 1:
            # Inside a fence: drop the language tag on the opening line.
            first_newline = chunk.find("\n")
            if first_newline != -1 and chunk[:first_newline].strip().isalnum():
                chunk = chunk[first_newline + 1 :]
        pieces.append(chunk)
    return "".join(pieces)


def _scan_balanced(text: str, start: int) -> int | None:
    stack: list[str] = []
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "[{":
            stack.append(ch)
        elif ch in "]}":
            if not stack:
                return None
            opener = stack.pop()
            if (opener, ch) not in (("[", "]"), ("{", "}")):
                return None
            if not stack:
                return i
    return None


def deterministic_repair(text: str) -> str:
    """Fix the common formatting defects without touching content.

    In order: smart quotes become straight quotes, trailing commas before
    ] or } are dropped, and single-quoted strings become double-quoted where
    the context makes them unambiguous. Idempotent on its own output; the
    result may still fail to parse, in which case it is returned best-effort.
    """
    text = text.translate(_SMART_QUOTES)
    text = _drop_trailing_commas(text)
    text = _requote_single_quotes(text)
    return text


def _drop_trailing_commas(text: str) -> str:
    out: list[str] = []
    in_string = False
    escaped = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            i += 1
            continue
        if ch == '"':
            in_string = True
            out.append(ch)
            i += 1
            continue
        if ch == ",":
            j = i + 1
            while j < len(text) and text[j].isspace():
                j += 1
            if j < len(text) and text[j] in "]}":
                i += 1  # swallow the comma; whitespace and bracket follow
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _requote_single_quotes(text: str) -> str:
    out: list[str] = []
    i = 0
    prev_significant = ""
    while i < len(text):
        ch = text[i]
        if ch == '"':
            end = _string_end(text, i)
            if end is None:
                out.append(text[i:])
                break
            out.append(text[i : end + 1])
            prev_significant = '"'
            i = end + 1
            continue
        if ch == "'" and prev_significant in ("", "{", "[", ",", ":"):
            end = _single_string_end(text, i)
            if end is not None:
                inner = text[i + 1 : end]
                inner = inner.replace("\\'", "'").replace('"', '\\"')
                out.append(f'"{inner}"')
                prev_significant = '"'
                i = end + 1
                continue
        out.append(ch)
        if not ch.isspace():
            prev_significant = ch
        i += 1
    return "".join(out)


def _string_end(text: str, start: int) -> int | None:
    escaped = False
    for i in range(start + 1, len(text)):
        ch = text[i]
        if escaped:
            escaped = False
        elif ch == "\\":
            escaped = True
        elif ch == '"':
            return i
    return None


def _single_string_end(text: str, start: int) -> int | None:
    escaped = False
    for i in range(start + 1, len(text)):
        ch = text[i]
        if escaped:
            escaped = False
        elif ch == "\\":
            escaped = True
        elif ch == "'":
            return i
        elif ch == "\n":
            return None  # unterminated on this line: too ambiguous to requote
    return None


def normalize_prediction(
    parsed: object, drawing_id: str = ""
) -> tuple[DrawingAnnotation, RepairReport]:
    """Normalize parsed prediction JSON into an annotation.

    Key synonyms are folded, values go through the shared normalization, and
    entries without a recognizable characteristic or usable tolerance are
    dropped and counted. Entry order is preserved. Raises NotAnArray.
    """
    if not isinstance(parsed, list):
        raise NotAnArray(f"prediction must be a JSON array, got {type(parsed).__name__}")
    fcfs = []
    dropped = 0
    for entry in parsed:
        if not isinstance(entry, dict):
            dropped += 1
            continue
        try:
            fcfs.append(fcf_from_entry(entry))
        except (UnknownSymbol, EmptyValue, SchemaViolation):
            dropped += 1
    report = RepairReport(
        stage_applied=["normalize_prediction"], parse_ok=True, dropped_entries=dropped
    )
    return DrawingAnnotation(drawing_id=drawing_id, fcfs=tuple(fcfs)), report


def _parse_with_stages(text: str, stages: list[str]) -> object | None:
    try:
        block = extract_json_block(text)
    except NoJsonFound:
        return None
    stages.append("extract_json_block")
    try:
        return loads_preserving_numbers(block)
    except json.JSONDecodeError:
        pass
    repaired = deterministic_repair(block)
    stages.append("deterministic_repair")
    try:
        return loads_preserving_numbers(repaired)
    except json.JSONDecodeError:
        return None


def llm_repair(
    raw: str,
    repair_endpoint: EndpointConfig,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Ask a repair endpoint to fix formatting; returns its verbatim text.

    The returned text is validated before being handed back: RepairRefused
    if it still cannot be parsed. Endpoint/client failures propagate.
    """
    request = build_text_request(repair_endpoint, REPAIR_INSTRUCTION, raw)
    output = execute_with_retry(repair_endpoint, request, sleep=sleep)
    if _parse_with_stages(output.model_text, []) is None:
        raise RepairRefused("repair endpoint output still does not parse as JSON")
    return output.model_text


def repair_prediction(
    raw: str,
    drawing_id: str = "",
    repair_endpoint: EndpointConfig | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[DrawingAnnotation, RepairReport]:
    """Run the full pipeline on one record's raw text.

    Never raises: unsalvageable text yields an empty annotation with
    parse_ok=False (it scores as an empty prediction), with the reason in
    the report. Valid text never triggers the optional endpoint pass.
    """
    stages: list[str] = []
    error = ""
    parsed = _parse_with_stages(raw, stages)
    if parsed is None and repair_endpoint is not None:
        try:
            fixed = llm_repair(raw, repair_endpoint, sleep=sleep)
            stages.append("llm_repair")
            parsed = _parse_with_stages(fixed, stages)
        except GdtBenchError as exc:
            error = f"{type(exc).__name__}: {exc}"
            logger.warning("repair endpoint failed for %s: %s", drawing_id, exc)
    if parsed is None:
        return (
            DrawingAnnotation(drawing_id=drawing_id),
            RepairReport(stage_applied=stages, parse_ok=False, error=error or "no parseable JSON"),
        )
    try:
        annotation, norm_report = normalize_prediction(parsed, drawing_id)
    except NotAnArray as exc:
        return (
            DrawingAnnotation(drawing_id=drawing_id),
            RepairReport(stage_applied=stages, parse_ok=False, error=str(exc)),
        )
    stages.append("normalize_prediction")
    return annotation, RepairReport(
        stage_applied=stages, parse_ok=True, dropped_entries=norm_report.dropped_entries
    )


def repair_directory(
    in_dir: Path | str,
    repair_endpoint: EndpointConfig | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[tuple[str, RepairReport]]:
    """Repair every ``*.raw.txt`` in a directory.

    Writes ``<record_id>.json`` (canonical schema) and
    ``<record_id>.repair.json`` next to each raw file; returns the reports.
    """
    in_dir = Path(in_dir)
    results = []
    for raw_path in sorted(in_dir.glob(f"*{RAW_OUTPUT_SUFFIX}")):
        record_id = raw_path.name[: -len(RAW_OUTPUT_SUFFIX)]
        raw = raw_path.read_text(encoding="utf-8")
        annotation, report = repair_prediction(
            raw, drawing_id=record_id, repair_endpoint=repair_endpoint, sleep=sleep
        )
        write_text_atomic(in_dir / f"{record_id}.json", serialize_annotation(annotation) + "\n")
        write_text_atomic(
            in_dir / f"{record_id}{REPORT_SUFFIX}",
            json.dumps(asdict(report), indent=2) + "\n",
        )
        results.append((record_id, report))
    return results
