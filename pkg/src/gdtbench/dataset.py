"""Dataset assembly: manifest building, query augmentation, train/val split.

Everything here is a deterministic function of its inputs and a seed, so a
dataset can be rebuilt bit-identically. Augmented records derive their ids
as ``<base>#q<j>``, and splitting keeps all derived records of one base
image on the same side so no drawing leaks across the split.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .annotation_io import ManifestRecord, read_annotation
from .errors import EmptyDirectory, EmptyInput, MissingAnnotation, NotPng, PoolTooSmall

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

_AUGMENT_SUFFIX_RE = re.compile(r"^(?P<base>.+)#q\d+$")

DEFAULT_QUERY_TEMPLATES = (
    "List every GD&T feature control frame in this drawing as a JSON array "
    "of objects with keys geometric_characteristic, tolerance, datum.",
    "Extract all geometric dimensioning and tolerancing callouts from this "
    "engineering drawing. Respond with only a JSON array whose objects carry "
    "the keys geometric_characteristic, tolerance, datum.",
    "Identify each feature control frame (symbol, tolerance value, datum "
    "references) in the drawing and return them, in drawing order, as a JSON "
    "array with keys geometric_characteristic, tolerance, datum.",
    "What GD&T requirements does this drawing specify? Answer as a JSON "
    "array of objects with the keys geometric_characteristic, tolerance, "
    "datum and nothing else.",
)


@dataclass(frozen=True)
class QueryTemplatePool:
    """At least four distinct extraction queries, each naming the JSON contract."""

    templates: tuple[str, ...] = DEFAULT_QUERY_TEMPLATES

    def __post_init__(self):
        if len(self.templates) < 4:
            raise ValueError("query pool needs at least 4 templates")
        if len(set(self.templates)) != len(self.templates):
            raise ValueError("query templates must be distinct")
        for template in self.templates:
            lowered = template.lower()
            if "json" not in lowered or not all(
                key in lowered for key in ("geometric_characteristic", "tolerance", "datum")
            ):
                raise ValueError(
                    "each template must ask for JSON output with keys "
                    "geometric_characteristic, tolerance, datum"
                )

    def __len__(self) -> int:
        return len(self.templates)


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation split parameters."""

    train_fraction: float = 0.8
    seed: int = 0
    stratify: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be strictly between 0 and 1")


def load_query_pool(path: Path | str) -> QueryTemplatePool:
    """Load a pool from a JSON array of template texts."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list) or not all(isinstance(t, str) for t in data):
        raise ValueError(f"{path}: query pool must be a JSON array of strings")
    return QueryTemplatePool(templates=tuple(data))


def build_manifest(image_dir: Path | str, annotation_dir: Path | str) -> list[ManifestRecord]:
    """Pair each PNG with its same-stem annotation JSON, sorted by record id.

    Verifies the 8-byte PNG signature of every image. Raises NotPng,
    MissingAnnotation (naming the stem), or EmptyDirectory.
    """
    image_dir = Path(image_dir)
    annotation_dir = Path(annotation_dir)
    if not image_dir.is_dir():
        raise EmptyDirectory(f"image directory does not exist: {image_dir}")
    if not annotation_dir.is_dir():
        raise EmptyDirectory(f"annotation directory does not exist: {annotation_dir}")
    images = sorted(image_dir.glob("*.png"))
    if not images:
        raise EmptyDirectory(f"no .png files in {image_dir}")
    records = []
    for image_path in images:
        with open(image_path, "rb") as handle:
            signature = handle.read(len(PNG_SIGNATURE))
        if signature != PNG_SIGNATURE:
            raise NotPng(f"{image_path}: missing PNG signature")
        annotation_path = annotation_dir / f"{image_path.stem}.json"
        if not annotation_path.is_file():
            raise MissingAnnotation(f"no annotation for image stem {image_path.stem!r}")
        records.append(
            ManifestRecord(
                record_id=image_path.stem,
                image_path=str(image_path),
                query="",
                annotation_path=str(annotation_path),
            )
        )
    return records


def augment_queries(
    records: Sequence[ManifestRecord],
    queries_per_image: int,
    pool: QueryTemplatePool,
    seed: int,
) -> list[ManifestRecord]:
    """Expand each record into queries_per_image records with distinct queries.

    The draw is seeded per record id, so one record's queries do not depend
    on the rest of the manifest. Derived ids get a ``#q<j>`` suffix.
    """
    if queries_per_image < 1:
        raise ValueError("queries_per_image must be >= 1")
    if queries_per_image > len(pool):
        raise PoolTooSmall(
            f"{queries_per_image} queries per image requested, pool has {len(pool)}"
        )
    augmented = []
    for record in records:
        rng = random.Random(f"{seed}:{record.record_id}")
        chosen = rng.sample(pool.templates, queries_per_image)
        for j, query in enumerate(chosen):
            augmented.append(
                replace(record, record_id=f"{record.record_id}#q{j}", query=query)
            )
    return augmented


def base_record_id(record_id: str) -> str:
    """Strip an augmentation suffix: ``d017#q2`` -> ``d017``."""
    match = _AUGMENT_SUFFIX_RE.match(record_id)
    return match.group("base") if match else record_id


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_train_val(
    records: Sequence[ManifestRecord],
    spec: SplitSpec,
    entry_count_for: Callable[[ManifestRecord], int] | None = None,
) -> tuple[list[ManifestRecord], list[ManifestRecord]]:
    """Partition records into train/val at spec.train_fraction.

    The partition is decided at base-image granularity so augmented records
    never straddle the split; train takes round(fraction * bases). With
    stratify=True, bases are grouped by ground-truth entry count (read from
    each base's annotation file unless entry_count_for is supplied) and each
    group is split at the same fraction, off by at most one record.
    Deterministic for a fixed seed.
    """
    if not records:
        raise EmptyInput("cannot split an empty record list")
    base_of = {record.record_id: base_record_id(record.record_id) for record in records}
    bases: dict[str, ManifestRecord] = {}
    for record in records:
        bases.setdefault(base_of[record.record_id], record)

    rng = random.Random(spec.seed)
    train_bases: set[str] = set()
    if spec.stratify:
        if entry_count_for is None:
            entry_count_for = lambda record: read_annotation(record.annotation_path).entry_count
        groups: dict[int, list[str]] = {}
        for base, record in bases.items():
            groups.setdefault(entry_count_for(record), []).append(base)
        for count in sorted(groups):
            group = groups[count]
            rng.shuffle(group)
            take = _round_half_up(spec.train_fraction * len(group))
            train_bases.update(group[:take])
    else:
        shuffled = list(bases)
        rng.shuffle(shuffled)
        take = _round_half_up(spec.train_fraction * len(shuffled))
        train_bases.update(shuffled[:take])

    train = [r for r in records if base_of[r.record_id] in train_bases]
    val = [r for r in records if base_of[r.record_id] not in train_bases]
    return train, val
