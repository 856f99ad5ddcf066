"""Canonical Unicode table for the 14 GD&T geometric characteristics.

One glyph per characteristic is the canonical form everything else folds
into: alias glyphs (visual lookalikes models tend to emit), text names in
any casing/separator style, and compatibility forms via an NFKC retry.
Exact-match scoring depends on both sides of a comparison passing through
this table, so the folding rules live here and nowhere else.
"""

from __future__ import annotations

import enum
import re
import unicodedata

from .errors import UnknownSymbol


class GeometricCharacteristic(enum.Enum):
    """The 14 standardized characteristics, valued by canonical glyph."""

    STRAIGHTNESS = "⏤"            # ⏤
    FLATNESS = "⏥"                # ⏥
    CIRCULARITY = "○"             # ○
    CYLINDRICITY = "⌭"            # ⌭
    PROFILE_OF_A_LINE = "⌒"       # ⌒
    PROFILE_OF_A_SURFACE = "⌓"    # ⌓
    ANGULARITY = "∠"              # ∠
    PERPENDICULARITY = "⟂"        # ⟂
    PARALLELISM = "∥"             # ∥
    POSITION = "⌖"                # ⌖
    CONCENTRICITY = "◎"           # ◎
    SYMMETRY = "⌯"                # ⌯
    CIRCULAR_RUNOUT = "↗"         # ↗
    TOTAL_RUNOUT = "⌰"            # ⌰

    @property
    def glyph(self) -> str:
        return self.value

    @property
    def codepoint(self) -> int:
        return ord(self.value)

    @property
    def display_name(self) -> str:
        return self.name.lower().replace("_", " ")


#: Lookalike glyphs folded into a canonical characteristic.
ALIAS_GLYPHS: dict[str, GeometricCharacteristic] = {
    "⊥": GeometricCharacteristic.PERPENDICULARITY,   # ⊥ up tack
    "‖": GeometricCharacteristic.PARALLELISM,        # ‖ double vertical line
    "ǁ": GeometricCharacteristic.PARALLELISM,        # ǁ lateral click letter
    "//": GeometricCharacteristic.PARALLELISM,            # ASCII rendering
    "◯": GeometricCharacteristic.CIRCULARITY,        # ◯ large circle
    "⊕": GeometricCharacteristic.POSITION,           # ⊕ circled plus
    "◉": GeometricCharacteristic.CONCENTRICITY,      # ◉ fisheye
    "⬈": GeometricCharacteristic.CIRCULAR_RUNOUT,    # ⬈ heavy NE arrow
}

#: Extra accepted spellings beyond each member's display name.
NAME_ALIASES: dict[str, GeometricCharacteristic] = {
    "circular run out": GeometricCharacteristic.CIRCULAR_RUNOUT,
    "total run out": GeometricCharacteristic.TOTAL_RUNOUT,
    "profile of line": GeometricCharacteristic.PROFILE_OF_A_LINE,
    "profile of surface": GeometricCharacteristic.PROFILE_OF_A_SURFACE,
    "true position": GeometricCharacteristic.POSITION,
}

#: Diameter-mark lookalikes folded to ⌀ (U+2300) in tolerance/datum text.
DIAMETER_ALIASES: dict[str, str] = {
    "Ø": "⌀",   # Ø latin capital O with stroke
    "ø": "⌀",   # ø latin small o with stroke
    "∅": "⌀",   # ∅ empty set
}

#: Canonical enclosed-letter material-condition modifiers.
MODIFIER_GLYPHS: dict[str, str] = {
    "M": "Ⓜ",   # Ⓜ maximum material condition
    "L": "Ⓛ",   # Ⓛ least material condition
    "S": "Ⓢ",   # Ⓢ regardless of feature size
}

_DIAMETER_TRANSLATION = str.maketrans(DIAMETER_ALIASES)
_MODIFIER_RE = re.compile(r"\(\s*([MLSmls])\s*\)")
_NAME_SEPARATORS_RE = re.compile(r"[\s_\-]+")

_GLYPH_LOOKUP: dict[str, GeometricCharacteristic] = {
    member.glyph: member for member in GeometricCharacteristic
}
_GLYPH_LOOKUP.update(ALIAS_GLYPHS)


def _name_key(text: str) -> str:
    return _NAME_SEPARATORS_RE.sub(" ", text.casefold()).strip()


_NAME_LOOKUP: dict[str, GeometricCharacteristic] = {
    _name_key(member.display_name): member for member in GeometricCharacteristic
}
_NAME_LOOKUP.update({_name_key(name): member for name, member in NAME_ALIASES.items()})


def canonical_symbol(raw: str) -> GeometricCharacteristic:
    """Resolve any glyph, alias, or name to its geometric characteristic.

    Accepts the canonical glyph, a known lookalike glyph, or a text name in
    any casing with space/hyphen/underscore separators. A final NFKC pass
    absorbs compatibility forms (fullwidth letters and the like).

    Raises UnknownSymbol when nothing in the table matches.
    """
    text = unicodedata.normalize("NFC", raw).strip()
    member = _lookup(text)
    if member is None:
        folded = unicodedata.normalize("NFKC", text)
        if folded != text:
            member = _lookup(folded)
    if member is None:
        raise UnknownSymbol(f"not a geometric characteristic: {raw!r}")
    return member


def _lookup(text: str) -> GeometricCharacteristic | None:
    if not text:
        return None
    hit = _GLYPH_LOOKUP.get(text)
    if hit is not None:
        return hit
    return _NAME_LOOKUP.get(_name_key(text))


def fold_diameter_marks(text: str) -> str:
    """Replace Ø/ø/∅ with the diameter sign ⌀."""
    return text.translate(_DIAMETER_TRANSLATION)


def fold_modifiers(text: str) -> str:
    """Replace spelled material-condition modifiers (M)/(L)/(S) with Ⓜ/Ⓛ/Ⓢ."""
    return _MODIFIER_RE.sub(lambda m: MODIFIER_GLYPHS[m.group(1).upper()], text)
