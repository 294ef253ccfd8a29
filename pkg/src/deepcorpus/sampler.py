"""Single- and multi-task finetuning mixtures.

In multi-task mode every epoch pairs the full parallel set with a fresh random
subset of monolingual segments whose subword total matches the parallel
budget (sum over pairs of the longer side). Each emitted source starts with a
task token in place of the start token.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kb import KBSnapshot
from .linker import LinkedSpan
from .noise import NoiseParams, f_deep, g_dae, segment_rng
from .subword import BOS, TASK_TOKENS, Segment, SubwordVocab

log = logging.getLogger(__name__)

MODES = ("single", "multitask")
OBJECTIVES = ("DAE", "DEEP")

# stream tags keep the subset draw and the shuffle independent of each other
_SUBSET_STREAM = 1
_SHUFFLE_STREAM = 2


@dataclass(frozen=True)
class ParallelPair:
    src_tokens: tuple[str, ...]
    tgt_tokens: tuple[str, ...]
    src_subwords: int
    tgt_subwords: int

    def __post_init__(self):
        if not self.src_tokens or not self.tgt_tokens:
            raise ValueError("parallel pair sides must be non-empty")

    @classmethod
    def from_tokens(cls, src: Sequence[str], tgt: Sequence[str], vocab: SubwordVocab) -> "ParallelPair":
        return cls(tuple(src), tuple(tgt), sum(map(vocab.count, src)), sum(map(vocab.count, tgt)))


@dataclass
class MonoItem:
    segment: Segment
    spans: list[LinkedSpan] | None = None


@dataclass
class PlanEntry:
    task: str
    src: list[str]
    tgt: list[str]
    ref: str

    def to_json(self) -> dict:
        return {"task": self.task, "src": self.src, "tgt": self.tgt, "ref": self.ref}


@dataclass
class EpochPlan:
    epoch: int
    mode: str
    objective: str
    entries: list[PlanEntry] = field(default_factory=list)
    parallel_subwords: int = 0
    mono_subwords: int = 0
    shortfall: bool = False
    max_segment_subwords: int = 0

    def header(self, vocab: SubwordVocab | None = None) -> dict:
        h = {
            "epoch": self.epoch,
            "mode": self.mode,
            "objective": self.objective,
            "parallel_subwords": self.parallel_subwords,
            "mono_subwords": self.mono_subwords,
            "shortfall": self.shortfall,
            "max_segment_subwords": self.max_segment_subwords,
            # multi-task batches carry both tasks: trainers double the batch size
            "batch_scale": 2 if self.mode == "multitask" else 1,
            "n_entries": len(self.entries),
        }
        if vocab is not None:
            # trainers initialise these embeddings from the start-token row
            h["task_token_ids"] = {t: vocab.token_id(TASK_TOKENS[t]) for t in TASK_TOKENS}
            h["start_token_id"] = vocab.token_id(BOS)
        return h

    def rows(self, vocab: SubwordVocab | None = None):
        yield {"header": self.header(vocab)}
        for e in self.entries:
            yield e.to_json()


def parallel_budget(pairs: Sequence[ParallelPair]) -> int:
    return sum(max(p.src_subwords, p.tgt_subwords) for p in pairs)


@dataclass
class MonoSample:
    indices: list[int]
    subwords: int
    shortfall: bool = False


def sample_mono_subset(segments: Sequence[Segment | int], budget: int, seed: int, epoch: int = 0) -> MonoSample:
    """Draw segments uniformly without replacement until their subwords reach ``budget``.

    ``segments`` may be Segment objects or bare subword sizes. The draw for
    each ``(seed, epoch)`` is fixed. If the pool is too small, all of it is
    taken and ``shortfall`` is set.
    """
    sizes = [s if isinstance(s, (int, np.integer)) else s.subwords for s in segments]
    if budget <= 0:
        return MonoSample([], 0)
    rng = np.random.default_rng([seed % 2**64, epoch, _SUBSET_STREAM])
    picked: list[int] = []
    total = 0
    for i in rng.permutation(len(sizes)).tolist():
        if total >= budget:
            break
        picked.append(i)
        total += int(sizes[i])
    shortfall = total < budget
    if shortfall:
        log.warning("mono pool has %d subwords, below the budget of %d", total, budget)
    return MonoSample(picked, total, shortfall)


def with_task_token(tokens: Sequence[str], task: str) -> list[str]:
    tok = TASK_TOKENS[task]
    if tokens and tokens[0] == BOS:
        return [tok, *tokens[1:]]
    return [tok, *tokens]


def build_epoch(
    pairs: Sequence[ParallelPair],
    mono_pool: Sequence[MonoItem],
    mode: str,
    objective: str,
    seed: int,
    epoch: int = 0,
    kb: KBSnapshot | None = None,
    src_lang: str = "en",
    params: NoiseParams | None = None,
) -> EpochPlan:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    if objective == "DEEP":
        missing = [m.segment.segment_id for m in mono_pool if m.spans is None]
        if missing:
            raise ValueError(f"DEEP objective needs link annotations; {len(missing)} segments lack them (first: {missing[0]!r})")
        if mode == "multitask" and kb is None:
            raise ValueError("DEEP objective needs a knowledge base")
    params = params or NoiseParams(seed=seed)

    plan = EpochPlan(epoch, mode, objective)
    plan.parallel_subwords = parallel_budget(pairs)
    plan.entries = [
        PlanEntry("MT", with_task_token(p.src_tokens, "MT"), list(p.tgt_tokens), f"pair:{i}")
        for i, p in enumerate(pairs)
    ]
    if mode == "multitask":
        sample = sample_mono_subset([m.segment for m in mono_pool], plan.parallel_subwords, seed, epoch)
        plan.mono_subwords = sample.subwords
        plan.shortfall = sample.shortfall
        for i in sample.indices:
            item = mono_pool[i]
            seg = item.segment
            rng = segment_rng(params.seed, seg.segment_id, epoch)
            if objective == "DAE":
                ex = g_dae(seg, params, rng)
            else:
                ex = f_deep(seg, item.spans, kb, src_lang, params, rng)
            plan.entries.append(PlanEntry(objective, with_task_token(ex.src, objective), ex.tgt, f"seg:{seg.segment_id}"))
            plan.max_segment_subwords = max(plan.max_segment_subwords, seg.subwords)
    order = np.random.default_rng([seed % 2**64, epoch, _SHUFFLE_STREAM]).permutation(len(plan.entries))
    plan.entries = [plan.entries[i] for i in order.tolist()]
    return plan
