"""Corpus-level BLEU on caller-tokenized text."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuStats:
    matches: list[int]
    totals: list[int]
    hyp_len: int
    ref_len: int

    @property
    def brevity_penalty(self) -> float:
        if self.hyp_len == 0:
            return 0.0
        if self.hyp_len > self.ref_len:
            return 1.0
        return math.exp(1 - self.ref_len / self.hyp_len)

    def score(self, smooth: bool = False) -> float:
        if self.hyp_len == 0:
            return 0.0
        log_p = 0.0
        used = 0
        for n, (m, t) in enumerate(zip(self.matches, self.totals), 1):
            if t == 0:
                # no hypothesis n-grams of this order: precision undefined, skip it
                continue
            if smooth and n > 1:
                # add-one on orders >= 2 (Lin & Och 2004)
                m, t = m + 1, t + 1
            if m == 0:
                return 0.0
            log_p += math.log(m / t)
            used += 1
        return 100.0 * self.brevity_penalty * math.exp(log_p / used)


def bleu_stats(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]], max_order: int = 4) -> BleuStats:
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise ValueError("need at least one sentence")
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            h = ngrams(hyp, n)
            r = ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(0, len(hyp) - n + 1)
    return BleuStats(matches, totals, hyp_len, ref_len)


def corpus_bleu(
    hypotheses: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    max_order: int = 4,
    smooth: bool = False,
) -> float:
    """BLEU in [0, 100]: clipped n-gram precisions, geometric mean, brevity penalty.

    Without ``smooth`` any zero precision gives 0. Orders longer than every
    hypothesis sentence have no n-grams and are left out of the mean.
    """
    return bleu_stats(hypotheses, references, max_order).score(smooth)
