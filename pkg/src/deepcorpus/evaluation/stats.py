"""Corpus and entity-coverage statistics."""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from ..linker import LinkedSpan
from ..subword import Segment


def occurrences(links) -> list[str]:
    """Flatten nested link annotations (spans, ids, or lists of either) to entity ids."""
    out: list[str] = []
    stack = [links]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
        elif isinstance(item, LinkedSpan):
            out.append(item.entity_id)
        elif isinstance(item, dict) and "id" in item:
            out.append(item["id"])
        else:
            stack.extend(reversed(list(item)))
    return out


def _pct(num: int, den: int) -> float | None:
    return 100.0 * num / den if den else None


@dataclass
class CoverageStats:
    pretrain_types: int
    pretrain_count: int
    finetune_types: int
    finetune_count: int
    test_types: int
    test_count: int
    # share of finetuning / test entity types and occurrences seen in pre-training
    pf_type_pct: float | None
    pf_count_pct: float | None
    pt_type_pct: float | None
    pt_count_pct: float | None

    def to_json(self) -> dict:
        return asdict(self)


def coverage_stats(pretrain_links, finetune_links, test_links) -> CoverageStats:
    p = Counter(occurrences(pretrain_links))
    f = Counter(occurrences(finetune_links))
    t = Counter(occurrences(test_links))
    seen = set(p)

    def cover(c: Counter):
        types = sum(1 for e in c if e in seen)
        count = sum(k for e, k in c.items() if e in seen)
        return _pct(types, len(c)), _pct(count, sum(c.values()))

    pf_t, pf_c = cover(f)
    pt_t, pt_c = cover(t)
    return CoverageStats(
        len(p), sum(p.values()), len(f), sum(f.values()), len(t), sum(t.values()), pf_t, pf_c, pt_t, pt_c
    )


@dataclass
class CorpusStats:
    segments: int
    tokens: int
    subwords: int
    entity_types: int
    entity_count: int
    # mean entity-span subwords per segment
    n_entity_subwords: float
    # same quantity rescaled to a full 512-subword sequence
    n_per_512: float

    def to_json(self) -> dict:
        return asdict(self)


def corpus_stats(segments: Sequence[Segment], links: Sequence[Iterable[LinkedSpan]]) -> CorpusStats:
    if len(segments) != len(links):
        raise ValueError(f"{len(segments)} segments vs {len(links)} link lists")
    tokens = subwords = ent_sw = 0
    types: set[str] = set()
    count = 0
    per_seg = []
    for seg, spans in zip(segments, links):
        tokens += seg.n_words
        subwords += seg.subwords
        s = 0
        for sp in spans:
            s += sum(seg.word_subwords[sp.sentence_index][sp.token_start : sp.token_end])
            types.add(sp.entity_id)
            count += 1
        per_seg.append(s)
        ent_sw += s
    n = len(segments)
    return CorpusStats(
        n,
        tokens,
        subwords,
        len(types),
        count,
        ent_sw / n if n else 0.0,
        512.0 * ent_sw / subwords if subwords else 0.0,
    )
