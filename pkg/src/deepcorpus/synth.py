"""Deterministic synthetic bilingual worlds with planted entity exposure.

The target language is written in a Cyrillic pseudo-script and the source in
Latin, so an untranslated (copied) entity is always detectable. Entity tokens
are capitalized and unique per entity while filler words are lowercase, which
makes every planted mention exactly recoverable by the gazetteer.
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .io import atomic_open, write_json, write_jsonl
from .kb import EntityRecord, KBSnapshot, from_records
from .linker import LinkedSpan
from .noise import NoisedExample
from .subword import RESERVED, Segment, SubwordVocab

_TGT_CONS = "бвгдзклмнпрстфхцчш"
_TGT_VOW = "аеиоуыя"
_SRC_CONS = "bdfgklmnprstvz"
_SRC_VOW = "aeiou"

GROUP_CORPORA = {
    "PFT": ("pretrain", "finetune", "test"),
    "PT": ("pretrain", "test"),
    "FT": ("finetune", "test"),
    "P": ("pretrain",),
    "F": ("finetune",),
    "other": ("test",),
}


class InfeasibleSpec(ValueError):
    pass


@dataclass
class WorldSpec:
    seed: int = 0
    src_lang: str = "en"
    tgt_lang: str = "xx"
    # entities per exposure group; P / F are pre-training-only / finetuning-only
    n_pft: int = 10
    n_pt: int = 10
    n_ft: int = 10
    n_p: int = 0
    n_f: int = 0
    n_other: int = 0
    # inclusive ranges of planted occurrences per corpus
    pretrain_freq: tuple[int, int] = (1, 12)
    finetune_freq: tuple[int, int] = (1, 6)
    test_freq: tuple[int, int] = (1, 3)
    n_mono_docs: int = 120
    sentences_per_doc: tuple[int, int] = (4, 12)
    n_train: int = 200
    n_dev: int = 20
    n_test: int = 60
    sentence_len: tuple[int, int] = (5, 30)
    max_entities_per_sentence: int = 3
    n_filler: int = 400
    multi_token_fraction: float = 0.3
    # entities given no source-language surface in the KB
    missing_src_fraction: float = 0.0
    # per-group chance that each simulated system translates a mention correctly
    baseline_accuracy: dict = field(default_factory=lambda: {"PFT": 0.7, "PT": 0.2, "FT": 0.6, "other": 0.1})
    system_accuracy: dict = field(default_factory=lambda: {"PFT": 0.8, "PT": 0.6, "FT": 0.65, "other": 0.1})

    @property
    def n_entities(self) -> int:
        return self.n_pft + self.n_pt + self.n_ft + self.n_p + self.n_f + self.n_other

    def validate(self) -> None:
        for name in ("n_pft", "n_pt", "n_ft", "n_p", "n_f", "n_other", "n_mono_docs", "n_train", "n_dev", "n_test"):
            if getattr(self, name) < 0:
                raise InfeasibleSpec(f"{name} must be >= 0")
        for name in ("pretrain_freq", "finetune_freq", "test_freq", "sentences_per_doc", "sentence_len"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InfeasibleSpec(f"{name} is an empty range")
        for name in ("pretrain_freq", "finetune_freq", "test_freq"):
            if getattr(self, name)[0] < 1:
                raise InfeasibleSpec(f"{name} must plant at least one occurrence per member entity")
        if self.sentence_len[1] < 2 * self.max_entities_per_sentence + 1:
            raise InfeasibleSpec("sentence_len upper bound too small for max_entities_per_sentence")
        if self.n_filler < 1:
            raise InfeasibleSpec("n_filler must be >= 1")

    @classmethod
    def from_json(cls, obj: dict) -> "WorldSpec":
        kw = dict(obj)
        for k in ("pretrain_freq", "finetune_freq", "test_freq", "sentences_per_doc", "sentence_len"):
            if k in kw:
                kw[k] = tuple(kw[k])
        return cls(**kw)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class World:
    spec: WorldSpec
    kb: KBSnapshot
    vocab: SubwordVocab
    groups: dict[str, str]
    freqs: dict[str, dict[str, int]]
    lexicon: set[tuple[str, str]]
    docs: list[tuple[str, list[list[str]]]]
    mono_links: list[list[LinkedSpan]]
    train: list[tuple[list[str], list[str]]]
    train_links: list[list[LinkedSpan]]
    dev: list[tuple[list[str], list[str]]]
    test: list[tuple[list[str], list[str]]]
    test_links: list[list[LinkedSpan]]
    hyps: dict[str, list[list[str]]]
    entity_src: dict[str, str] = field(default_factory=dict)
    entity_tgt: dict[str, str] = field(default_factory=dict)


class _Namer:
    def __init__(self, rng, cons, vow):
        self.rng = rng
        self.syl = [c + v for c in cons for v in vow]
        self.used: set[str] = set()

    def word(self, n_syl: tuple[int, int], capital: bool) -> str:
        while True:
            k = int(self.rng.integers(n_syl[0], n_syl[1] + 1))
            w = "".join(self.syl[int(i)] for i in self.rng.integers(len(self.syl), size=k))
            if capital:
                w = w[0].upper() + w[1:]
            if w not in self.used:
                self.used.add(w)
                return w


def _vocab_pieces() -> list[str]:
    pieces = list(RESERVED)
    for cons, vow in ((_TGT_CONS, _TGT_VOW), (_SRC_CONS, _SRC_VOW)):
        chars = sorted(set(cons + vow))
        pieces += chars + [c.upper() for c in chars]
        pieces += [c + v for c in cons for v in vow]
        pieces += [c.upper() + v for c in cons for v in vow]
    return list(dict.fromkeys(pieces))


def _draw(rng, lo_hi) -> int:
    return int(rng.integers(lo_hi[0], lo_hi[1] + 1))


def _place(rng, n_sent: int, occ: list[str], spec: WorldSpec, corpus: str) -> list[list[str]]:
    cap = n_sent * spec.max_entities_per_sentence
    if len(occ) > cap:
        raise InfeasibleSpec(f"{corpus}: {len(occ)} planted occurrences exceed {cap} entity slots")
    slots = np.repeat(np.arange(n_sent), spec.max_entities_per_sentence)
    slots = slots[rng.permutation(len(slots))][: len(occ)]
    per: list[list[str]] = [[] for _ in range(n_sent)]
    for eid, si in zip(occ, slots.tolist()):
        per[si].append(eid)
    return per


def _sentence(rng, entities: list[str], forms: dict[str, list[str]], filler: list[str], spec: WorldSpec):
    """One target sentence with ``entities`` inserted among filler words.

    Returns the sentence tokens and the list of (start, end, id) mentions.
    """
    ent_words = sum(len(forms[e]) for e in entities)
    lo = max(spec.sentence_len[0], ent_words + 1)
    length = int(rng.integers(lo, max(lo, spec.sentence_len[1]) + 1))
    n_fill = length - ent_words
    fill = [filler[int(i)] for i in rng.integers(len(filler), size=n_fill)]
    # choose insertion points among the filler gaps
    gaps = sorted(rng.integers(0, n_fill + 1, size=len(entities)).tolist())
    order = [entities[int(i)] for i in rng.permutation(len(entities))]
    toks: list[str] = []
    mentions = []
    fi = 0
    for gap, eid in zip(gaps, order):
        toks.extend(fill[fi:gap])
        fi = gap
        mentions.append((len(toks), len(toks) + len(forms[eid]), eid))
        toks.extend(forms[eid])
    toks.extend(fill[fi:])
    return toks, mentions


def gen_world(spec: WorldSpec, out_dir: str | os.PathLike | None = None) -> World:
    spec.validate()
    rng = np.random.default_rng([spec.seed % 2**64, 0x5EED])
    tgt_names = _Namer(rng, _TGT_CONS, _TGT_VOW)
    src_names = _Namer(rng, _SRC_CONS, _SRC_VOW)

    # filler lexicon: lowercase, never colliding with capitalized entity tokens
    tgt_filler = [tgt_names.word((1, 3), capital=False) for _ in range(spec.n_filler)]
    src_filler = [src_names.word((1, 3), capital=False) for _ in range(spec.n_filler)]
    filler_map = dict(zip(tgt_filler, src_filler))

    groups: dict[str, str] = {}
    ids: list[str] = []
    width = max(1, len(str(spec.n_entities)))
    k = 0
    for g, n in (("PFT", spec.n_pft), ("PT", spec.n_pt), ("FT", spec.n_ft), ("P", spec.n_p), ("F", spec.n_f), ("other", spec.n_other)):
        for _ in range(n):
            eid = f"Q{k:0{width}d}"
            groups[eid] = g
            ids.append(eid)
            k += 1

    tgt_forms: dict[str, list[str]] = {}
    src_forms: dict[str, list[str]] = {}
    records = []
    missing = set()
    n_missing = int(round(spec.missing_src_fraction * len(ids)))
    if n_missing:
        missing = {ids[int(i)] for i in rng.permutation(len(ids))[:n_missing]}
    for eid in ids:
        n_tok = 2 if rng.random() < spec.multi_token_fraction else 1
        tgt_forms[eid] = [tgt_names.word((2, 4), capital=True) for _ in range(n_tok)]
        src_forms[eid] = [src_names.word((2, 4), capital=True) for _ in range(n_tok)]
        surf = {spec.tgt_lang: (" ".join(tgt_forms[eid]),)}
        if eid not in missing:
            surf[spec.src_lang] = (" ".join(src_forms[eid]),)
        records.append(EntityRecord(eid, surf))
    kb = from_records(records, {spec.src_lang, spec.tgt_lang})

    freqs: dict[str, dict[str, int]] = {"pretrain": {}, "finetune": {}, "test": {}}
    rng_f = {"pretrain": spec.pretrain_freq, "finetune": spec.finetune_freq, "test": spec.test_freq}
    for eid in ids:
        for corpus in GROUP_CORPORA[groups[eid]]:
            freqs[corpus][eid] = _draw(rng, rng_f[corpus])

    def occurrences(corpus):
        occ = [eid for eid in ids for _ in range(freqs[corpus].get(eid, 0))]
        return [occ[int(i)] for i in rng.permutation(len(occ))]

    # monolingual pre-training corpus
    doc_lens = [_draw(rng, spec.sentences_per_doc) for _ in range(spec.n_mono_docs)]
    per_sent = _place(rng, sum(doc_lens), occurrences("pretrain"), spec, "pretrain")
    docs, mono_links = [], []
    si = 0
    for d, n in enumerate(doc_lens):
        sents, spans = [], []
        for j in range(n):
            toks, ments = _sentence(rng, per_sent[si], tgt_forms, tgt_filler, spec)
            si += 1
            sents.append(toks)
            spans += [LinkedSpan(j, s, e, eid, " ".join(tgt_forms[eid])) for s, e, eid in ments]
        docs.append((f"doc{d:05d}", sents))
        mono_links.append(spans)

    def parallel(n_sent, corpus):
        per = _place(rng, n_sent, occurrences(corpus) if corpus else [], spec, corpus or "dev")
        pairs, links = [], []
        for ents in per:
            toks, ments = _sentence(rng, ents, tgt_forms, tgt_filler, spec)
            src: list[str] = []
            pos = 0
            for s, e, eid in ments:
                src += [filler_map[t] for t in toks[pos:s]] + src_forms[eid]
                pos = e
            src += [filler_map[t] for t in toks[pos:]]
            pairs.append((src, toks))
            links.append([LinkedSpan(0, s, e, eid, " ".join(tgt_forms[eid])) for s, e, eid in ments])
        return pairs, links

    train, train_links = parallel(spec.n_train, "finetune")
    dev, _ = parallel(spec.n_dev, None)
    test, test_links = parallel(spec.n_test, "test")

    def system(acc: dict) -> list[list[str]]:
        out = []
        for (_, ref), spans in zip(test, test_links):
            hyp = list(ref)
            for sp in reversed(spans):
                if rng.random() >= acc.get(groups[sp.entity_id], 0.0):
                    # miss: copy the source-script name untranslated
                    hyp[sp.token_start : sp.token_end] = src_forms[sp.entity_id]
            out.append(hyp)
        return out

    hyps = {"baseline": system(spec.baseline_accuracy), "system": system(spec.system_accuracy)}
    lexicon = {(" ".join(src_forms[e]), " ".join(tgt_forms[e])) for e in ids if e not in missing}
    world = World(
        spec, kb, SubwordVocab(_vocab_pieces()), groups, freqs, lexicon, docs, mono_links,
        train, train_links, dev, test, test_links, hyps,
        {e: " ".join(src_forms[e]) for e in ids}, {e: " ".join(tgt_forms[e]) for e in ids},
    )
    if out_dir is not None:
        write_world(world, out_dir)
    return world


def _spans_json(spans: Iterable[LinkedSpan]) -> list[dict]:
    return [sp.to_json() for sp in spans]


def write_world(world: World, out_dir: str | os.PathLike) -> dict[str, str]:
    """Write the world in the pipeline's file formats plus a ground-truth sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = world.spec
    write_jsonl(out / "kb.jsonl", (r.to_json() for r in world.kb.records.values()))
    world.vocab.save(out / "vocab.txt")
    write_jsonl(out / "mono.jsonl", ({"doc_id": d, "sentences": s} for d, s in world.docs))
    for name, pairs in (("train", world.train), ("dev", world.dev), ("test", world.test)):
        write_jsonl(out / f"{name}.jsonl", ({"src": s, "tgt": t} for s, t in pairs))
    with atomic_open(out / "test.ref.txt") as f:
        f.writelines(" ".join(t) + "\n" for _, t in world.test)
    for name, hyp in world.hyps.items():
        with atomic_open(out / f"test.hyp.{name}.txt") as f:
            f.writelines(" ".join(h) + "\n" for h in hyp)
    truth = {
        "spec": spec.to_json(),
        "groups": world.groups,
        "freqs": world.freqs,
        "lexicon": sorted([list(p) for p in world.lexicon]),
        "links": {
            "mono": {d: _spans_json(sp) for (d, _), sp in zip(world.docs, world.mono_links)},
            "train": [_spans_json(sp) for sp in world.train_links],
            "test": [_spans_json(sp) for sp in world.test_links],
        },
    }
    write_json(out / "truth.json", truth)
    config = {
        "seed": spec.seed,
        "languages": {"src": spec.src_lang, "tgt": spec.tgt_lang},
        "paths": {
            "kb": "kb.jsonl",
            "vocab": "vocab.txt",
            "mono": "mono.jsonl",
            "train": "train.jsonl",
            "test": "test.jsonl",
            "references": "test.ref.txt",
            "hypotheses": "test.hyp.system.txt",
            "baseline": "test.hyp.baseline.txt",
            "truth": "truth.json",
            "out_dir": "out",
        },
        "noise": {"lam": 3.5, "mask_ratio": 0.35, "permute_prob": 1.0},
        "sampler": {"mode": "multitask", "objective": "DEEP", "epochs": 1},
        "linker": {"policy": "exact"},
        "eval": {"bin_edges": [0, 1, 4, 16, 64]},
        "workers": 1,
    }
    write_json(out / "config.json", config)
    return {"config": str(out / "config.json")}


def sample_segments(world: World, count: int, n_words: int = 100, seed: int = 0) -> list[tuple[Segment, list[LinkedSpan]]]:
    """Fixed-length segments drawn from the world's language, with exact links.

    Sentences are generated fresh (entities drawn uniformly from the KB) and
    the last sentence is padded or cut with filler so every segment has
    exactly ``n_words`` words; entity mentions are never cut.
    """
    spec = world.spec
    rng = np.random.default_rng([seed % 2**64, 0x5E6])
    tgt_forms = {e: world.entity_tgt[e].split() for e in world.entity_tgt}
    ids = sorted(tgt_forms)
    fillers = sorted({t for _, sents in world.docs for s in sents for t in s if t[:1].islower()})
    if not fillers:
        raise InfeasibleSpec("world has no filler vocabulary")
    out = []
    for k in range(count):
        sents: list[list[str]] = []
        spans: list[LinkedSpan] = []
        left = n_words
        while left > 0:
            n_ent = int(rng.integers(0, spec.max_entities_per_sentence + 1)) if ids else 0
            ents = [ids[int(i)] for i in rng.integers(len(ids), size=n_ent)] if n_ent else []
            toks, ments = _sentence(rng, ents, tgt_forms, fillers, spec)
            if len(toks) > left:
                # keep mentions whole: cut only inside the trailing filler run
                if any(e > left for _, e, _ in ments):
                    toks = [fillers[int(i)] for i in rng.integers(len(fillers), size=left)]
                    ments = []
                else:
                    toks = toks[:left]
            si = len(sents)
            sents.append(toks)
            spans += [LinkedSpan(si, s, e, eid, world.entity_tgt[eid]) for s, e, eid in ments]
            left -= len(toks)
        ws = [[world.vocab.count(w) for w in s] for s in sents]
        out.append((Segment(f"synth#{k}", sents, ws, "synth", list(range(len(sents)))), spans))
    return out


def induce_lexicon(deep_pairs: Iterable[NoisedExample | dict]) -> set[tuple[str, str]]:
    """Read (source surface, target surface) pairs off the replacement metadata."""
    lex: set[tuple[str, str]] = set()
    for ex in deep_pairs:
        obj = ex.to_json() if isinstance(ex, NoisedExample) else ex
        meta = obj.get("meta") or {}
        if "replaced" not in meta:
            raise ValueError(f"pair {obj.get('id')!r} ({obj.get('task')}) carries no replacement metadata")
        src, tgt = obj["src"], obj["tgt"]
        for r in meta["replaced"]:
            s0, s1 = r["src"]
            t0, t1 = r["tgt"]
            lex.add((" ".join(src[s0:s1]), " ".join(tgt[t0:t1])))
    return lex


def lexicon_scores(induced: set, planted: set) -> tuple[float, float]:
    """Precision and recall of an induced lexicon against a planted one."""
    hit = len(induced & planted)
    precision = hit / len(induced) if induced else 0.0
    recall = hit / len(planted) if planted else 1.0
    return precision, recall
