"""DAE and DEEP noise functions.

``g_dae`` is the mBART-style noiser: Poisson-length span masking up to a word
budget, then sentence permutation. ``f_deep`` first swaps linked entity spans
for their source-language surface forms from the KB, tops up with span
masking over non-entity words until the replaced+masked share reaches the
budget, then permutes sentences. Both emit a :class:`NoisedExample` pairing
the noised source with the untouched original segment.

Word positions in metadata are flat indices into the original segment
(sentences concatenated); source positions are flat indices into the emitted
source after permutation.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kb import KBSnapshot, lookup
from .linker import LinkedSpan
from .subword import MASK, Segment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseParams:
    lam: float = 3.5
    mask_ratio: float = 0.35
    permute_prob: float = 1.0
    seed: int = 0
    attempt_factor: int = 100
    # force every span to this length (replay/debug); None = Poisson
    span_length: int | None = None
    budget_unit: str = "words"

    def __post_init__(self):
        if not 0 < self.mask_ratio <= 1:
            raise ValueError("mask_ratio must be in (0,1]")
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not 0 <= self.permute_prob <= 1:
            raise ValueError("permute_prob must be in [0,1]")
        if self.attempt_factor < 1:
            raise ValueError("attempt_factor must be >= 1")
        if self.span_length is not None and self.span_length < 1:
            raise ValueError("span_length must be >= 1")
        if self.budget_unit not in ("words", "subwords"):
            raise ValueError("budget_unit must be 'words' or 'subwords'")

    def to_json(self) -> dict:
        return asdict(self)


def segment_rng(seed: int, segment_id: str, *extra: int) -> np.random.Generator:
    """Per-segment generator keyed on (seed, segment_id): order-independent."""
    h = int.from_bytes(hashlib.blake2b(segment_id.encode("utf-8"), digest_size=8).digest(), "little")
    return np.random.default_rng([seed % 2**64, h, *extra])


def budget_for(amount: float, ratio: float) -> int:
    # tolerate float noise: 0.35 * 100 == 35.00000000000001
    return max(0, math.ceil(ratio * amount - 1e-9))


@dataclass
class MaskResult:
    spans: list[tuple[int, int]]
    masked: list[int]
    amount: int
    max_span: int = 0
    warning: bool = False


def _sentence_ends(sentences: Sequence[Sequence[str]]) -> list[int]:
    ends = []
    pos = 0
    for s in sentences:
        pos += len(s)
        ends.extend([pos] * len(s))
    return ends


def mask_spans(
    sentences: Segment | Sequence[Sequence[str]],
    budget: int,
    protected: Iterable[int],
    params: NoiseParams,
    rng: np.random.Generator,
    weights: Sequence[int] | None = None,
) -> MaskResult:
    """Choose spans to mask until ``budget`` words (or weight units) are covered.

    Each attempt draws a length ``max(1, Poisson(lam))`` and a uniform start;
    spans stop at the end of their sentence. A span touching a protected or
    already-masked word is discarded. Gives up after ``attempt_factor * budget``
    attempts, setting ``warning``.
    """
    if isinstance(sentences, Segment):
        sentences = sentences.sentences
    n = sum(len(s) for s in sentences)
    if budget <= 0 or n == 0:
        return MaskResult([], [], 0)
    blocked = np.zeros(n, dtype=bool)
    for p in protected:
        blocked[p] = True
    w = np.ones(n, dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
    free = int(w[~blocked].sum())
    ends = _sentence_ends(sentences)
    spans: list[tuple[int, int]] = []
    amount = 0
    max_span = 0
    limit = params.attempt_factor * budget
    attempts = 0
    while amount < budget and attempts < limit and free > 0:
        attempts += 1
        if params.span_length is not None:
            length = params.span_length
        else:
            length = max(1, int(rng.poisson(params.lam)))
        start = int(rng.integers(n))
        end = min(start + length, ends[start])
        if blocked[start:end].any():
            continue
        blocked[start:end] = True
        got = int(w[start:end].sum())
        amount += got
        free -= got
        spans.append((start, end))
        max_span = max(max_span, end - start)
    spans.sort()
    masked = [p for s, e in spans for p in range(s, e)]
    warning = amount < budget
    if warning:
        log.debug("mask budget %d not reached (%d after %d attempts)", budget, amount, attempts)
    return MaskResult(spans, masked, amount, max_span, warning)


def permute_sentences(
    sentences: Sequence[Sequence[str]], permute_prob: float, rng: np.random.Generator
) -> tuple[list[list[str]], list[int]]:
    """With probability ``permute_prob`` reorder sentences uniformly at random.

    Returns the new sentence list and ``order`` with ``new[i] = old[order[i]]``.
    """
    n = len(sentences)
    order = list(range(n))
    if n > 1 and permute_prob > 0 and rng.random() < permute_prob:
        order = [int(i) for i in rng.permutation(n)]
    return [list(sentences[i]) for i in order], order


@dataclass
class Replacement:
    span: LinkedSpan
    flat_start: int
    flat_end: int
    source_tokens: list[str]


@dataclass
class ReplaceResult:
    sentences: list[list[str]]
    replacements: list[Replacement]
    skipped: list[LinkedSpan]

    @property
    def replaced(self) -> list[int]:
        return [p for r in self.replacements for p in range(r.flat_start, r.flat_end)]


def _offsets(sentences: Sequence[Sequence[str]]) -> list[int]:
    off = [0]
    for s in sentences:
        off.append(off[-1] + len(s))
    return off


def _check_spans(sentences, spans: Sequence[LinkedSpan]) -> None:
    last_end: dict[int, int] = {}
    for sp in sorted(spans, key=lambda s: (s.sentence_index, s.token_start)):
        if not 0 <= sp.sentence_index < len(sentences):
            raise IndexError(f"span {sp} refers to missing sentence")
        if not 0 <= sp.token_start < sp.token_end <= len(sentences[sp.sentence_index]):
            raise IndexError(f"span {sp} out of bounds for sentence of length {len(sentences[sp.sentence_index])}")
        if sp.token_start < last_end.get(sp.sentence_index, 0):
            raise ValueError(f"span {sp} overlaps a previous span")
        last_end[sp.sentence_index] = sp.token_end


def replace_entities(
    segment: Segment | Sequence[Sequence[str]], spans: Sequence[LinkedSpan], kb: KBSnapshot, src_lang: str
) -> ReplaceResult:
    """Swap each linked span for the entity's canonical ``src_lang`` surface.

    Spans whose entity has no ``src_lang`` surface are left in place and
    reported in ``skipped``.
    """
    sentences = segment.sentences if isinstance(segment, Segment) else segment
    _check_spans(sentences, spans)
    off = _offsets(sentences)
    out = [list(s) for s in sentences]
    reps: list[Replacement] = []
    skipped: list[LinkedSpan] = []
    # right to left so earlier indices stay valid while splicing
    for sp in sorted(spans, key=lambda s: (s.sentence_index, s.token_start), reverse=True):
        src = lookup(sp.entity_id, kb, src_lang)
        if src is None:
            skipped.append(sp)
            continue
        toks = src.split()
        out[sp.sentence_index][sp.token_start : sp.token_end] = toks
        base = off[sp.sentence_index]
        reps.append(Replacement(sp, base + sp.token_start, base + sp.token_end, toks))
    reps.reverse()
    skipped.reverse()
    return ReplaceResult(out, reps, skipped)


@dataclass
class NoisedExample:
    task: str
    source_sentences: list[list[str]]
    target_sentences: list[list[str]]
    segment_id: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def src(self) -> list[str]:
        return [t for s in self.source_sentences for t in s]

    @property
    def tgt(self) -> list[str]:
        return [t for s in self.target_sentences for t in s]

    def to_json(self) -> dict:
        return {"id": self.segment_id, "task": self.task, "src": self.src, "tgt": self.tgt, "meta": self.meta}


def _render(sentences, edits, order):
    """Apply non-overlapping flat-position edits, then reorder sentences.

    ``edits`` are ``(flat_start, flat_end, tokens)``. Returns the rendered
    sentences and, per edit, its flat ``(start, end)`` in the rendered output.
    """
    off = _offsets(sentences)
    by_sent: dict[int, list] = {}
    for k, (s, e, toks) in enumerate(edits):
        si = np.searchsorted(off, s, side="right") - 1
        by_sent.setdefault(int(si), []).append((s - off[si], e - off[si], toks, k))
    rendered: list[list[str]] = []
    local: dict[int, tuple[int, int, int]] = {}
    for si, sent in enumerate(sentences):
        new: list[str] = []
        pos = 0
        for s, e, toks, k in sorted(by_sent.get(si, [])):
            new.extend(sent[pos:s])
            local[k] = (si, len(new), len(new) + len(toks))
            new.extend(toks)
            pos = e
        new.extend(sent[pos:])
        rendered.append(new)
    out = [rendered[i] for i in order]
    new_off = {}
    acc = 0
    for i in order:
        new_off[i] = acc
        acc += len(rendered[i])
    where = [None] * len(edits)
    for k, (si, s, e) in local.items():
        where[k] = (new_off[si] + s, new_off[si] + e)
    return out, where


def _weights(segment: Segment, unit: str):
    if unit == "subwords":
        return [c for ws in segment.word_subwords for c in ws]
    return None


def g_dae(segment: Segment, params: NoiseParams, rng: np.random.Generator | None = None) -> NoisedExample:
    if rng is None:
        rng = segment_rng(params.seed, segment.segment_id)
    weights = _weights(segment, params.budget_unit)
    total = segment.n_words if weights is None else sum(weights)
    budget = budget_for(total, params.mask_ratio)
    m = mask_spans(segment.sentences, budget, (), params, rng, weights)
    edits = [(s, e, [MASK]) for s, e in m.spans]
    order = _permutation(segment, params, rng)
    src, _ = _render(segment.sentences, edits, order)
    meta = {
        "masked": m.masked,
        "noised": m.amount,
        "budget": budget,
        "max_span": m.max_span,
        "order": order,
        "warning": m.warning,
    }
    return NoisedExample("DAE", src, [list(s) for s in segment.sentences], segment.segment_id, meta)


def _permutation(segment: Segment, params: NoiseParams, rng) -> list[int]:
    _, order = permute_sentences(segment.sentences, params.permute_prob, rng)
    return order


def f_deep(
    segment: Segment,
    spans: Sequence[LinkedSpan],
    kb: KBSnapshot,
    src_lang: str,
    params: NoiseParams,
    rng: np.random.Generator | None = None,
) -> NoisedExample:
    if rng is None:
        rng = segment_rng(params.seed, segment.segment_id)
    rep = replace_entities(segment, spans, kb, src_lang)
    weights = _weights(segment, params.budget_unit)
    total = segment.n_words if weights is None else sum(weights)
    budget = budget_for(total, params.mask_ratio)
    replaced = rep.replaced
    replaced_amount = len(replaced) if weights is None else sum(weights[p] for p in replaced)
    off = _offsets(segment.sentences)
    protected = [off[sp.sentence_index] + p for sp in spans for p in range(sp.token_start, sp.token_end)]
    m = mask_spans(segment.sentences, budget - replaced_amount, protected, params, rng, weights)
    edits = [(r.flat_start, r.flat_end, r.source_tokens) for r in rep.replacements]
    edits += [(s, e, [MASK]) for s, e in m.spans]
    order = _permutation(segment, params, rng)
    src, where = _render(segment.sentences, edits, order)
    meta = {
        "masked": m.masked,
        "replaced": [
            {"tgt": [r.flat_start, r.flat_end], "src": list(where[k]), "id": r.span.entity_id}
            for k, r in enumerate(rep.replacements)
        ],
        "skipped_spans": len(rep.skipped),
        "noised": replaced_amount + m.amount,
        "budget": budget,
        "max_span": m.max_span,
        "order": order,
        "warning": m.warning and budget > replaced_amount,
    }
    return NoisedExample("DEEP", src, [list(s) for s in segment.sentences], segment.segment_id, meta)


def noise_one(objective: str, segment: Segment, spans, kb, src_lang: str, params: NoiseParams) -> NoisedExample:
    if objective == "DAE":
        return g_dae(segment, params)
    if objective == "DEEP":
        if spans is None:
            raise ValueError(f"segment {segment.segment_id!r} has no link annotations")
        return f_deep(segment, spans, kb, src_lang, params)
    raise ValueError(f"unknown objective {objective!r}")


_worker_state: tuple | None = None


def _init_worker(state) -> None:
    global _worker_state
    _worker_state = state


def _noise_job(item):
    objective, kb, src_lang, params = _worker_state
    segment, spans = item
    return noise_one(objective, segment, spans, kb, src_lang, params)


def noise_corpus(
    segments: Sequence[Segment],
    spans: Sequence[Sequence[LinkedSpan]] | None,
    objective: str,
    params: NoiseParams,
    kb: KBSnapshot | None = None,
    src_lang: str = "en",
    workers: int = 1,
) -> list[NoisedExample]:
    """Noise every segment; results are identical for any worker count."""
    items = list(zip(segments, spans if spans is not None else [None] * len(segments)))
    state = (objective, kb, src_lang, params)
    if workers <= 1 or len(items) < 2:
        _init_worker(state)
        return [_noise_job(it) for it in items]
    from .linker import _mp_context

    chunk = max(1, len(items) // (workers * 4))
    with _mp_context().Pool(workers, initializer=_init_worker, initargs=(state,)) as pool:
        return pool.map(_noise_job, items, chunksize=chunk)
