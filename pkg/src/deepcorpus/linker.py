"""Gazetteer-based entity recognition and linking over tokenized text.

Surface forms are whitespace-tokenized and compiled into a token-level trie.
Linking is leftmost-longest and non-overlapping; a surface shared by several
entities links to the lexicographically smallest id.
"""
from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass
from typing import Iterable, Sequence

from ._trie import TokenTrie
from .kb import KBSnapshot
from .kernels import scan_longest

POLICIES = ("exact", "casefold")


def normalize_token(token: str, policy: str) -> str:
    if policy == "exact":
        return token
    if policy == "casefold":
        return token.casefold()
    raise ValueError(f"unknown normalization policy {policy!r}")


@dataclass(frozen=True)
class LinkedSpan:
    sentence_index: int
    token_start: int
    token_end: int
    entity_id: str
    matched_surface: str

    def to_json(self) -> dict:
        return {
            "sent": self.sentence_index,
            "start": self.token_start,
            "end": self.token_end,
            "id": self.entity_id,
            "surface": self.matched_surface,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinkedSpan":
        return cls(int(obj["sent"]), int(obj["start"]), int(obj["end"]), obj["id"], obj["surface"])

    def __len__(self) -> int:
        return self.token_end - self.token_start


class Gazetteer:
    """Token trie over the normalized surface forms of one KB language."""

    def __init__(self, language: str, policy: str, forms: dict[str, Iterable[str]]):
        if policy not in POLICIES:
            raise ValueError(f"unknown normalization policy {policy!r}")
        self.language = language
        self.policy = policy
        self.token_ids: dict[str, int] = {}
        self.forms: list[str] = []
        self.ids: list[tuple[str, ...]] = []
        merged: dict[tuple[int, ...], int] = {}
        for form in sorted(forms):
            toks = [normalize_token(t, policy) for t in form.split()]
            if not toks:
                continue
            key = tuple(self.token_ids.setdefault(t, len(self.token_ids)) for t in toks)
            slot = merged.get(key)
            if slot is None:
                merged[key] = len(self.forms)
                self.forms.append(" ".join(toks))
                self.ids.append(tuple(sorted(set(forms[form]))))
            else:
                self.ids[slot] = tuple(sorted(set(self.ids[slot]) | set(forms[form])))
        self.trie = TokenTrie(merged.items())

    def __len__(self) -> int:
        return len(self.forms)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        get = self.token_ids.get
        if self.policy == "exact":
            return [get(t, -1) for t in tokens]
        return [get(normalize_token(t, self.policy), -1) for t in tokens]

    def accepted(self) -> set[str]:
        """All token sequences the trie accepts, rendered as space-joined strings."""
        inv = {v: k for k, v in self.token_ids.items()}
        return {" ".join(inv[s] for s in key) for key, _ in self.trie.items()}

    def __getstate__(self):
        return {"language": self.language, "policy": self.policy, "token_ids": self.token_ids,
                "forms": self.forms, "ids": self.ids}

    def __setstate__(self, state):
        self.__dict__.update(state)
        key_of = {f: tuple(self.token_ids[t] for t in f.split(" ")) for f in self.forms}
        self.trie = TokenTrie((key_of[f], i) for i, f in enumerate(self.forms))


def build_gazetteer(kb: KBSnapshot, lang: str, policy: str = "exact") -> Gazetteer:
    if lang not in kb.languages:
        raise KeyError(f"language {lang!r} is not indexed in the KB (have {sorted(kb.languages)})")
    return Gazetteer(lang, policy, kb.index.get(lang, {}))


def link(sentence_tokens: Sequence[str], gaz: Gazetteer, sentence_index: int = 0) -> list[LinkedSpan]:
    if not sentence_tokens or not len(gaz):
        return []
    starts, ends, outs = scan_longest(gaz.trie, gaz.encode(sentence_tokens))
    return [
        LinkedSpan(sentence_index, int(s), int(e), gaz.ids[o][0], gaz.forms[o])
        for s, e, o in zip(starts.tolist(), ends.tolist(), outs.tolist())
    ]


def link_sentences(sentences: Sequence[Sequence[str]], gaz: Gazetteer) -> list[LinkedSpan]:
    spans: list[LinkedSpan] = []
    for i, sent in enumerate(sentences):
        spans.extend(link(sent, gaz, i))
    return spans


_worker_gaz: Gazetteer | None = None


def _init_worker(gaz: Gazetteer) -> None:
    global _worker_gaz
    _worker_gaz = gaz


def _link_one(sentences):
    return link_sentences(sentences, _worker_gaz)


def _mp_context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else "spawn")


def link_corpus(corpus: Sequence[Sequence[Sequence[str]]], gaz: Gazetteer, workers: int = 1) -> list[list[LinkedSpan]]:
    """Link every unit (a list of tokenized sentences); output order follows input."""
    if workers <= 1 or len(corpus) < 2:
        return [link_sentences(sents, gaz) for sents in corpus]
    chunk = max(1, len(corpus) // (workers * 4))
    with _mp_context().Pool(workers, initializer=_init_worker, initargs=(gaz,)) as pool:
        return pool.map(_link_one, corpus, chunksize=chunk)
