"""Core domain types: feature control frames, annotations, key-value pairs.

An annotation is the ordered list of feature control frames (FCFs) read off
one drawing. Scoring never compares FCFs directly; it compares the multiset
of (field kind, value) pairs produced by flatten_pairs, so value
normalization here defines the equivalence classes exact-match scoring
operates on.
"""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .errors import EmptyValue
from .symbols import (
    GeometricCharacteristic,
    canonical_symbol,
    fold_diameter_marks,
    fold_modifiers,
)

#: Separator used when several datum labels are joined into one value.
DATUM_SEPARATOR = "|"

_WHITESPACE_RE = re.compile(r"\s+")
# One uppercase letter, optional composite partner (A-B), optional
# material-condition modifier suffix.
_DATUM_LABEL_RE = re.compile(r"^[A-Z](?:-[A-Z])?[ⓂⓁⓈ]?$")


class FieldKind(Enum):
    """The three scored fields of a feature control frame."""

    CHARACTERISTIC = "characteristic"
    TOLERANCE = "tolerance"
    DATUM = "datum"


def normalize_field_value(raw: str, kind: FieldKind) -> str:
    """Bring a field value into its single canonical spelling.

    All kinds: NFC normalization and outer whitespace removal. Tolerances
    additionally lose all internal whitespace; datum values are re-joined
    from their "|"-separated labels with blanks dropped; characteristics
    collapse to the canonical glyph via the symbol table. Diameter marks and
    spelled modifiers fold to their canonical codepoints. Idempotent.

    Raises EmptyValue when nothing remains, UnknownSymbol for an
    unrecognized characteristic.
    """
    text = unicodedata.normalize("NFC", raw).strip()
    if kind is FieldKind.CHARACTERISTIC:
        if not text:
            raise EmptyValue("empty characteristic")
        return canonical_symbol(text).glyph
    if kind is FieldKind.TOLERANCE:
        text = _WHITESPACE_RE.sub("", text)
    elif kind is FieldKind.DATUM:
        labels = [part.strip() for part in text.split(DATUM_SEPARATOR)]
        text = DATUM_SEPARATOR.join(part for part in labels if part)
    text = fold_diameter_marks(text)
    text = fold_modifiers(text)
    if not text:
        raise EmptyValue(f"empty {kind.value} value")
    return text


@dataclass(frozen=True)
class FeatureControlFrame:
    """One GD&T callout: characteristic + tolerance + ordered datum labels."""

    characteristic: GeometricCharacteristic
    tolerance: str
    datums: tuple[str, ...] = ()


@dataclass(frozen=True)
class DrawingAnnotation:
    """All feature control frames of one drawing; zero entries is legal."""

    drawing_id: str
    fcfs: tuple[FeatureControlFrame, ...] = ()

    @property
    def entry_count(self) -> int:
        return len(self.fcfs)


@dataclass(frozen=True)
class KeyValuePair:
    """One scored unit: a field kind together with its normalized value."""

    key: FieldKind
    value: str


@dataclass(frozen=True)
class Violation:
    """One failed invariant, with a machine-readable code."""

    code: str
    message: str


def flatten_pairs(annotation: DrawingAnnotation) -> Counter[KeyValuePair]:
    """Flatten an annotation into the multiset of scoreable key-value pairs.

    Each frame contributes its characteristic glyph and tolerance value, plus
    one joined datum value when it references any datums. Duplicate pairs
    across frames keep their counts.
    """
    pairs: Counter[KeyValuePair] = Counter()
    for fcf in annotation.fcfs:
        pairs[KeyValuePair(FieldKind.CHARACTERISTIC, fcf.characteristic.glyph)] += 1
        pairs[KeyValuePair(FieldKind.TOLERANCE, fcf.tolerance)] += 1
        if fcf.datums:
            joined = DATUM_SEPARATOR.join(fcf.datums)
            pairs[KeyValuePair(FieldKind.DATUM, joined)] += 1
    return pairs


def validate_fcf(fcf: FeatureControlFrame) -> list[Violation]:
    """Check frame invariants; returns one Violation per failure, [] if valid."""
    violations: list[Violation] = []
    if not fcf.tolerance:
        violations.append(Violation("EmptyTolerance", "tolerance must be non-empty"))
    else:
        try:
            normalized = normalize_field_value(fcf.tolerance, FieldKind.TOLERANCE)
        except EmptyValue:
            normalized = ""
        if normalized != fcf.tolerance:
            violations.append(
                Violation(
                    "UnnormalizedTolerance",
                    f"tolerance {fcf.tolerance!r} is not in normalized form",
                )
            )
    for label in fcf.datums:
        if not _DATUM_LABEL_RE.match(label):
            violations.append(
                Violation("BadDatumLabel", f"invalid datum label {label!r}")
            )
    return violations
