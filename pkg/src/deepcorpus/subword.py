"""Fixed-vocabulary subword encoding and packing of documents into segments."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._trie import TokenTrie
from .kernels import scan_longest

log = logging.getLogger(__name__)

UNK = "<unk>"
BOS = "<s>"
MASK = "<mask>"
TASK_TOKENS = {"MT": "[MT]", "DAE": "[DAE]", "DEEP": "[DEEP]"}
# fixed header block of every vocab file, in this order
RESERVED = (UNK, BOS, MASK, TASK_TOKENS["MT"], TASK_TOKENS["DAE"], TASK_TOKENS["DEEP"])

MAX_SEGMENT_SUBWORDS = 512


def _codepoints(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le"), dtype="<u4").astype(np.int64)


class SubwordVocab:
    """Ordered piece list (id = position) with the reserved header first."""

    def __init__(self, pieces: Sequence[str]):
        pieces = list(pieces)
        if tuple(pieces[: len(RESERVED)]) != RESERVED:
            raise ValueError(f"vocab must start with the reserved block {list(RESERVED)}")
        seen = set()
        for i, p in enumerate(pieces):
            if not p:
                raise ValueError(f"empty piece at id {i}")
            if p in seen:
                raise ValueError(f"duplicate piece {p!r} at id {i}")
            seen.add(p)
        self.pieces = pieces
        self.ids = {p: i for i, p in enumerate(pieces)}
        self.unk_id = self.ids[UNK]
        self.trie = TokenTrie(
            (_codepoints(p).tolist(), i) for i, p in enumerate(pieces) if i >= len(RESERVED)
        )
        self._word_cache: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.pieces)

    def token_id(self, piece: str) -> int:
        return self.ids[piece]

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SubwordVocab":
        with open(path, encoding="utf-8") as f:
            return cls([line.rstrip("\n") for line in f if line.rstrip("\n")])

    def save(self, path: str | os.PathLike) -> None:
        from .io import atomic_open

        with atomic_open(path) as f:
            for p in self.pieces:
                f.write(p + "\n")

    def count(self, word: str) -> int:
        """Subword length of a single word (memoized)."""
        n = self._word_cache.get(word)
        if n is None:
            n = len(encode(word, self))
            if len(self._word_cache) < 1_000_000:
                self._word_cache[word] = n
        return n


def encode(text: str, vocab: SubwordVocab) -> list[int]:
    """Greedy longest-match-from-left segmentation; uncovered characters map to UNK."""
    if not text:
        return []
    cps = _codepoints(text)
    starts, ends, outs = scan_longest(vocab.trie, cps)
    ids: list[int] = []
    pos = 0
    for s, e, o in zip(starts.tolist(), ends.tolist(), outs.tolist()):
        ids.extend([vocab.unk_id] * (s - pos))
        ids.append(o)
        pos = e
    ids.extend([vocab.unk_id] * (len(cps) - pos))
    return ids


def decode(ids: Iterable[int], vocab: SubwordVocab) -> str:
    return "".join(vocab.pieces[i] for i in ids)


@dataclass
class Segment:
    segment_id: str
    sentences: list[list[str]]
    word_subwords: list[list[int]]
    doc_id: str = ""
    # indices of the source document's sentences held by this segment
    doc_sentences: list[int] = field(default_factory=list)
    truncated: bool = False

    @property
    def subwords(self) -> int:
        return sum(sum(ws) for ws in self.word_subwords)

    @property
    def words(self) -> list[str]:
        return [t for s in self.sentences for t in s]

    @property
    def n_words(self) -> int:
        return sum(len(s) for s in self.sentences)

    def to_json(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "sentences": self.sentences,
            "subwords": self.subwords,
            "word_subwords": self.word_subwords,
            "doc_id": self.doc_id,
            "doc_sentences": self.doc_sentences,
            "truncated": self.truncated,
        }

    @classmethod
    def from_json(cls, obj: dict, vocab: SubwordVocab | None = None) -> "Segment":
        sentences = [list(s) for s in obj["sentences"]]
        ws = obj.get("word_subwords")
        if ws is None:
            if vocab is None:
                raise ValueError(f"segment {obj.get('segment_id')!r} lacks word_subwords and no vocab given")
            ws = [[vocab.count(w) for w in s] for s in sentences]
        return cls(
            str(obj["segment_id"]),
            sentences,
            [list(x) for x in ws],
            str(obj.get("doc_id", "")),
            list(obj.get("doc_sentences", range(len(sentences)))),
            bool(obj.get("truncated", False)),
        )


def pack_segments(
    docs: Iterable[tuple[str, Sequence[Sequence[str]]]],
    vocab: SubwordVocab,
    max_subwords: int = MAX_SEGMENT_SUBWORDS,
) -> Iterator[Segment]:
    """Greedily pack each document's sentences into segments of <= max_subwords.

    A sentence that does not fit in the current segment opens a new one. A
    sentence longer than ``max_subwords`` on its own is cut at the last word
    boundary that fits and the segment is flagged ``truncated``. Segments never
    span two documents.
    """
    for doc_id, sentences in docs:
        k = 0
        cur: list[list[str]] = []
        cur_ws: list[list[int]] = []
        cur_idx: list[int] = []
        cur_sw = 0
        cur_trunc = False

        def flush():
            nonlocal k
            seg = Segment(f"{doc_id}#{k}", cur, cur_ws, doc_id, cur_idx, cur_trunc)
            k += 1
            return seg

        for si, sent in enumerate(sentences):
            sent = list(sent)
            if not sent:
                continue
            ws = [vocab.count(w) for w in sent]
            total = sum(ws)
            trunc = False
            if total > max_subwords:
                keep, acc = 0, 0
                while keep < len(ws) and acc + ws[keep] <= max_subwords:
                    acc += ws[keep]
                    keep += 1
                log.warning("doc %s sentence %d: %d subwords, truncated to %d", doc_id, si, total, acc)
                sent, ws, total, trunc = sent[:keep], ws[:keep], acc, True
                if not sent:
                    continue
            if cur and cur_sw + total > max_subwords:
                yield flush()
                cur, cur_ws, cur_idx, cur_sw, cur_trunc = [], [], [], 0, False
            cur.append(sent)
            cur_ws.append(ws)
            cur_idx.append(si)
            cur_sw += total
            cur_trunc = cur_trunc or trunc
        if cur:
            yield flush()


def rekey_links(segment: Segment, doc_spans) -> list:
    """Map document-level spans (sentence index into the doc) onto ``segment``.

    Spans on sentences not held by the segment, or cut off by truncation, are
    dropped.
    """
    from .linker import LinkedSpan

    where = {d: i for i, d in enumerate(segment.doc_sentences)}
    out = []
    for sp in doc_spans:
        i = where.get(sp.sentence_index)
        if i is None or sp.token_end > len(segment.sentences[i]):
            continue
        out.append(LinkedSpan(i, sp.token_start, sp.token_end, sp.entity_id, sp.matched_surface))
    return out
