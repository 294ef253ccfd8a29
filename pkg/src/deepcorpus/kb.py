"""Multilingual knowledge-base snapshots: entity id -> per-language surface forms."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .io import dumps


class KBFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EntityRecord:
    id: str
    # language -> surface forms, canonical form first
    surfaces: Mapping[str, tuple[str, ...]]

    def to_json(self) -> dict:
        return {"id": self.id, "surfaces": {lang: list(forms) for lang, forms in sorted(self.surfaces.items())}}


@dataclass
class KBSnapshot:
    languages: frozenset[str]
    records: dict[str, EntityRecord] = field(default_factory=dict)
    # language -> surface form -> entity ids
    index: dict[str, dict[str, frozenset[str]]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = build_index(self.records.values(), self.languages)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self.records

    def dumps(self) -> str:
        return "".join(dumps(r.to_json()) + "\n" for r in self.records.values())


def build_index(records: Iterable[EntityRecord], languages: Iterable[str]) -> dict[str, dict[str, frozenset[str]]]:
    """Transpose records into language -> form -> ids."""
    acc: dict[str, dict[str, set[str]]] = {lang: {} for lang in languages}
    for rec in records:
        for lang, forms in rec.surfaces.items():
            by_form = acc.setdefault(lang, {})
            for form in forms:
                by_form.setdefault(form, set()).add(rec.id)
    return {lang: {form: frozenset(ids) for form, ids in forms.items()} for lang, forms in acc.items()}


def _parse_record(obj, lineno: int, languages: frozenset[str]) -> tuple[str, dict[str, tuple[str, ...]]]:
    if not isinstance(obj, dict):
        raise KBFormatError(f"line {lineno}: expected a JSON object")
    eid = obj.get("id")
    if not isinstance(eid, str) or not eid:
        raise KBFormatError(f"line {lineno}: 'id' must be a non-empty string")
    surfaces = obj.get("surfaces")
    if not isinstance(surfaces, dict):
        raise KBFormatError(f"line {lineno}: 'surfaces' must be an object")
    kept: dict[str, tuple[str, ...]] = {}
    for lang, forms in surfaces.items():
        if not isinstance(forms, list) or not all(isinstance(f, str) for f in forms):
            raise KBFormatError(f"line {lineno}: surfaces[{lang!r}] must be a list of strings")
        if any(not f for f in forms):
            raise KBFormatError(f"line {lineno}: empty surface form for {eid} in {lang!r}")
        if lang in languages and forms:
            kept[lang] = tuple(dict.fromkeys(forms))
    return eid, kept


def load_kb(path: str | os.PathLike, languages: Iterable[str]) -> KBSnapshot:
    """Load a JSON-lines snapshot, keeping only surfaces in ``languages``.

    Records without any surface in a requested language are dropped. Raises
    :class:`KBFormatError` on malformed lines (with the line number) and on
    duplicate entity ids.
    """
    languages = frozenset(languages)
    if not languages:
        raise ValueError("at least one language is required")
    records: dict[str, EntityRecord] = {}
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise KBFormatError(f"line {lineno}: invalid JSON ({e.msg})") from None
            eid, kept = _parse_record(obj, lineno, languages)
            if eid in seen:
                raise KBFormatError(f"line {lineno}: duplicate entity id {eid!r}")
            seen.add(eid)
            if kept:
                records[eid] = EntityRecord(eid, dict(sorted(kept.items())))
    return KBSnapshot(languages, records)


def from_records(records: Iterable[EntityRecord], languages: Iterable[str]) -> KBSnapshot:
    languages = frozenset(languages)
    kept = {}
    for rec in records:
        if rec.id in kept:
            raise KBFormatError(f"duplicate entity id {rec.id!r}")
        surf = {lang: tuple(dict.fromkeys(forms)) for lang, forms in rec.surfaces.items() if lang in languages and forms}
        if surf:
            kept[rec.id] = EntityRecord(rec.id, dict(sorted(surf.items())))
    return KBSnapshot(languages, kept)


def surface(entity_id: str, kb: KBSnapshot) -> dict[str, list[str]]:
    rec = kb.records.get(entity_id)
    if rec is None:
        return {}
    return {lang: list(forms) for lang, forms in rec.surfaces.items()}


def lookup(entity_id: str, kb: KBSnapshot, lang: str) -> str | None:
    """Canonical (first-listed) surface of the entity in ``lang``, if any."""
    rec = kb.records.get(entity_id)
    if rec is None:
        return None
    forms = rec.surfaces.get(lang)
    return forms[0] if forms else None


def iter_tsv_records(path: str | os.PathLike) -> Iterator[dict]:
    """Group ``id<TAB>lang<TAB>form`` rows into snapshot records.

    Records come out in order of first appearance of their id; forms keep file
    order and are deduplicated.
    """
    grouped: dict[str, dict[str, list[str]]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise KBFormatError(f"line {lineno}: expected id<TAB>lang<TAB>form")
            eid, lang, form = parts
            forms = grouped.setdefault(eid, {}).setdefault(lang, [])
            if form not in forms:
                forms.append(form)
    for eid, surf in grouped.items():
        yield {"id": eid, "surfaces": dict(sorted(surf.items()))}
