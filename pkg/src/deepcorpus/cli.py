"""Command-line entry point: ``deepcorpus <subcommand> [--config FILE] [flags]``.

Stages read and write the JSON-lines formats of the library modules. All
outputs go through atomic temp-file renames. One structured (JSON) log line
is emitted per stage. Log verbosity comes from ``DEEPCORPUS_LOG``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from collections import Counter
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig, load_config, resolve
from .evaluation import (
    accuracy_from_links,
    bin_matrix,
    corpus_bleu,
    corpus_stats,
    coverage_stats,
    frequency_gain_matrix,
    partition_entities,
)
from .io import atomic_open, dumps, read_jsonl, write_json, write_jsonl
from .kb import KBFormatError, iter_tsv_records, load_kb
from .linker import LinkedSpan, build_gazetteer, link, link_corpus
from .noise import noise_corpus
from .sampler import MonoItem, ParallelPair, build_epoch
from .subword import TASK_TOKENS, Segment, SubwordVocab, pack_segments, rekey_links
from .synth import WorldSpec, gen_world, induce_lexicon

log = logging.getLogger("deepcorpus")

SUBCOMMANDS = ("build-kb", "link", "pack", "noise", "emit", "sample", "eval", "stats", "synth")

# inputs each stage needs from the config's paths block
REQUIRED = {
    "link": ("kb", "out_dir"),
    "pack": ("vocab", "mono", "out_dir"),
    "noise": ("kb", "out_dir"),
    "emit": ("out_dir",),
    "sample": ("kb", "vocab", "train", "out_dir"),
    "eval": ("kb", "references", "hypotheses", "out_dir"),
    "stats": ("out_dir",),
}


def _stage_log(stage: str, **counts) -> None:
    log.info(dumps({"stage": stage, **counts}))


def _out(cfg: PipelineConfig, name: str) -> Path:
    return cfg.out_dir / name


def _need(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `deepcorpus {produced_by}` first")
    return path


def _read_text_tokens(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f]


def _read_links(path: Path) -> dict[str, list[LinkedSpan]]:
    return {str(r["segment_id"]): [LinkedSpan.from_json(s) for s in r["spans"]] for r in read_jsonl(path)}


def _write_links(path: Path, keyed: list[tuple[str, list[LinkedSpan]]]) -> int:
    return write_jsonl(path, ({"segment_id": k, "spans": [s.to_json() for s in v]} for k, v in keyed))


def _load_kb(cfg: PipelineConfig):
    return load_kb(cfg.path("kb"), {cfg.src_lang, cfg.tgt_lang})


def _id_counts(path: Path) -> Counter:
    return Counter(s.entity_id for spans in _read_links(path).values() for s in spans)


# ---- stages ---------------------------------------------------------------


def cmd_build_kb(args, cfg: PipelineConfig | None) -> None:
    out = Path(args.out) if args.out else (cfg.path("kb") if cfg else None)
    if out is None:
        raise ConfigError(["paths.kb: required (or pass --out)"])
    n = write_jsonl(out, iter_tsv_records(args.tsv))
    _stage_log("build-kb", records=n, out=str(out))


def cmd_link(args, cfg: PipelineConfig) -> None:
    kb = _load_kb(cfg)
    gaz = build_gazetteer(kb, cfg.tgt_lang, cfg.policy)
    corpora = []
    if "mono" in cfg.paths and cfg.path("mono").exists():
        docs = [(str(r["doc_id"]), _sentences(r["sentences"])) for r in read_jsonl(cfg.path("mono"))]
        corpora.append(("mono", docs))
    for name in ("train", "test"):
        if name in cfg.paths and cfg.path(name).exists():
            rows = [(f"{name}:{i}", [_tokens(r["tgt"])]) for i, r in enumerate(read_jsonl(cfg.path(name)))]
            corpora.append((name, rows))
    if not corpora:
        raise FileNotFoundError("no corpus to link: set paths.mono, paths.train or paths.test")
    truth = None
    if "truth" in cfg.paths and cfg.path("truth").exists():
        with open(cfg.path("truth"), encoding="utf-8") as f:
            truth = json.load(f).get("links", {})
    for name, units in corpora:
        spans = link_corpus([u for _, u in units], gaz, cfg.workers)
        keyed = [(k, s) for (k, _), s in zip(units, spans)]
        _write_links(_out(cfg, f"links.{name}.jsonl"), keyed)
        extra = {}
        if truth is not None and name in truth:
            extra["recovered"] = _recovery(keyed, truth[name], name)
        _stage_log("link", corpus=name, segments=len(units), spans=sum(map(len, spans)), warnings=0, **extra)


def _recovery(keyed, planted, name: str) -> float | None:
    """Share of ground-truth spans the linker reproduced exactly."""
    if isinstance(planted, list):
        planted = {f"{name}:{i}": v for i, v in enumerate(planted)}
    want = {(k, s["sent"], s["start"], s["end"], s["id"]) for k, v in planted.items() for s in v}
    got = {(k, s.sentence_index, s.token_start, s.token_end, s.entity_id) for k, v in keyed for s in v}
    return len(want & got) / len(want) if want else None


def _tokens(x) -> list[str]:
    return x.split() if isinstance(x, str) else list(x)


def _sentences(x) -> list[list[str]]:
    return [_tokens(s) for s in x]


def cmd_pack(args, cfg: PipelineConfig) -> None:
    vocab = SubwordVocab.load(cfg.path("vocab"))
    docs = [(str(r["doc_id"]), _sentences(r["sentences"])) for r in read_jsonl(cfg.path("mono"))]
    links_path = _out(cfg, "links.mono.jsonl")
    doc_links = _read_links(links_path) if links_path.exists() else None
    segments = list(pack_segments(docs, vocab))
    write_jsonl(_out(cfg, "segments.jsonl"), (s.to_json() for s in segments))
    n_spans = 0
    if doc_links is not None:
        keyed = []
        for seg in segments:
            spans = rekey_links(seg, doc_links.get(seg.doc_id, []))
            n_spans += len(spans)
            keyed.append((seg.segment_id, spans))
        _write_links(_out(cfg, "segments.links.jsonl"), keyed)
    _stage_log(
        "pack",
        documents=len(docs),
        segments=len(segments),
        spans=n_spans,
        warnings=sum(s.truncated for s in segments),
    )


def _load_segments(cfg: PipelineConfig, with_links: bool):
    segs = [Segment.from_json(r) for r in read_jsonl(_need(_out(cfg, "segments.jsonl"), "pack"))]
    links = None
    if with_links:
        keyed = _read_links(_need(_out(cfg, "segments.links.jsonl"), "link` then `pack"))
        links = [keyed.get(s.segment_id) for s in segs]
    return segs, links


def cmd_noise(args, cfg: PipelineConfig) -> None:
    objective = (args.objective or cfg.objective).upper()
    segs, links = _load_segments(cfg, objective == "DEEP")
    kb = _load_kb(cfg) if objective == "DEEP" else None
    pairs = noise_corpus(segs, links, objective, cfg.noise, kb, cfg.src_lang, cfg.workers)
    out = _out(cfg, f"pairs.{objective.lower()}.jsonl")
    write_jsonl(out, (p.to_json() for p in pairs))
    _stage_log(
        "noise",
        objective=objective,
        segments=len(segs),
        pairs=len(pairs),
        replaced=sum(len(p.meta.get("replaced", ())) for p in pairs),
        skipped_spans=sum(p.meta.get("skipped_spans", 0) for p in pairs),
        warnings=sum(bool(p.meta.get("warning")) for p in pairs),
    )


def cmd_emit(args, cfg: PipelineConfig) -> None:
    """Trainer-ready text (task token first) from a pairs file, plus the DEEP lexicon."""
    objective = (args.objective or cfg.objective).upper()
    rows = list(read_jsonl(_need(_out(cfg, f"pairs.{objective.lower()}.jsonl"), "noise")))
    stem = f"train.{objective.lower()}"
    tok = TASK_TOKENS[objective]
    with atomic_open(_out(cfg, stem + ".src")) as f:
        f.writelines(" ".join([tok, *r["src"]]) + "\n" for r in rows)
    with atomic_open(_out(cfg, stem + ".tgt")) as f:
        f.writelines(" ".join(r["tgt"]) + "\n" for r in rows)
    n_lex = 0
    if objective == "DEEP":
        lex = sorted(induce_lexicon(rows))
        n_lex = len(lex)
        with atomic_open(_out(cfg, "lexicon.tsv")) as f:
            f.writelines(f"{s}\t{t}\n" for s, t in lex)
    _stage_log("emit", objective=objective, pairs=len(rows), lexicon=n_lex, warnings=0)


def cmd_sample(args, cfg: PipelineConfig) -> None:
    mode = args.mode or cfg.mode
    objective = (args.objective or cfg.objective).upper()
    seed = cfg.seed if args.seed is None else args.seed
    epochs = args.epochs or cfg.epochs
    vocab = SubwordVocab.load(cfg.path("vocab"))
    pairs = [ParallelPair.from_tokens(_tokens(r["src"]), _tokens(r["tgt"]), vocab) for r in read_jsonl(cfg.path("train"))]
    pool: list[MonoItem] = []
    kb = None
    if mode == "multitask":
        segs, links = _load_segments(cfg, objective == "DEEP")
        pool = [MonoItem(s, l) for s, l in zip(segs, links or [None] * len(segs))]
        kb = _load_kb(cfg) if objective == "DEEP" else None
    for epoch in range(epochs):
        plan = build_epoch(pairs, pool, mode, objective, seed, epoch, kb, cfg.src_lang, cfg.noise)
        write_jsonl(_out(cfg, f"plan.{mode}.{objective.lower()}.epoch{epoch}.jsonl"), plan.rows(vocab))
        _stage_log(
            "sample",
            epoch=epoch,
            mode=mode,
            objective=objective,
            entries=len(plan.entries),
            parallel_subwords=plan.parallel_subwords,
            mono_subwords=plan.mono_subwords,
            warnings=int(plan.shortfall),
        )


def cmd_eval(args, cfg: PipelineConfig) -> None:
    kb = _load_kb(cfg)
    gaz = build_gazetteer(kb, cfg.tgt_lang, cfg.policy)
    refs = _read_text_tokens(cfg.path("references"))
    hyp_path = Path(args.hyp) if args.hyp else cfg.path("hypotheses")
    hyps = _read_text_tokens(hyp_path)
    if len(hyps) != len(refs):
        raise ValueError(f"{hyp_path}: {len(hyps)} lines vs {len(refs)} reference lines")
    ref_ids = [[s.entity_id for s in link(r, gaz)] for r in refs]

    def score(h):
        return accuracy_from_links([[s.entity_id for s in link(x, gaz)] for x in h], ref_ids)

    report = score(hyps)
    result = {"bleu": corpus_bleu(hyps, refs, smooth=args.smooth), "hypotheses": cfg.display(hyp_path)}

    pre_p, fin_p = _out(cfg, "links.mono.jsonl"), _out(cfg, "links.train.jsonl")
    base_path = Path(args.baseline) if args.baseline else cfg.paths.get("baseline")
    if pre_p.exists() and fin_p.exists():
        pre, fin = _id_counts(pre_p), _id_counts(fin_p)
        report.group = partition_entities(pre, fin, report.per_entity)
        report.bins = bin_matrix(report, pre, fin, cfg.bin_edges)
        if base_path is not None and Path(base_path).exists():
            base = _read_text_tokens(Path(base_path))
            if len(base) != len(refs):
                raise ValueError(f"{base_path}: {len(base)} lines vs {len(refs)} reference lines")
            gain = frequency_gain_matrix(score(base), report, pre, fin, cfg.bin_edges)
            result["baseline"] = cfg.display(base_path)
            result["gain"] = gain.to_json()
            with atomic_open(_out(cfg, "gain.csv")) as f:
                f.write(gain.to_csv())
        with atomic_open(_out(cfg, "bins.csv")) as f:
            f.write(report.bins.to_csv())
    result["entity"] = report.to_json()
    write_json(_out(cfg, "report.json"), result)
    _stage_log(
        "eval",
        sentences=len(refs),
        entities=len(report.per_entity),
        bleu=round(result["bleu"], 4),
        macro_accuracy=round(report.macro_accuracy, 6),
        warnings=0,
    )


def cmd_stats(args, cfg: PipelineConfig) -> None:
    segs, links = _load_segments(cfg, True)
    cs = corpus_stats(segs, [l or [] for l in links])
    out = {"corpus": cs.to_json()}
    parts = {}
    for name in ("mono", "train", "test"):
        p = _out(cfg, f"links.{name}.jsonl")
        if p.exists():
            parts[name] = [s for spans in _read_links(p).values() for s in spans]
    if {"mono", "train", "test"} <= set(parts):
        out["coverage"] = coverage_stats(parts["mono"], parts["train"], parts["test"]).to_json()
    write_json(_out(cfg, "stats.json"), out)
    _stage_log("stats", segments=cs.segments, entity_count=cs.entity_count, warnings=0)


def cmd_synth(args, cfg) -> None:
    spec_obj = {}
    if args.spec:
        with open(args.spec, encoding="utf-8") as f:
            spec_obj = json.load(f)
    if args.seed is not None:
        spec_obj["seed"] = args.seed
    if "seed" not in spec_obj:
        raise ConfigError(["seed: required (pass --seed or set it in --spec)"])
    world = gen_world(WorldSpec.from_json(spec_obj), args.out)
    _stage_log(
        "synth",
        entities=len(world.kb),
        documents=len(world.docs),
        train=len(world.train),
        test=len(world.test),
        out=str(args.out),
        warnings=0,
    )


COMMANDS = {
    "build-kb": cmd_build_kb,
    "link": cmd_link,
    "pack": cmd_pack,
    "noise": cmd_noise,
    "emit": cmd_emit,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deepcorpus", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_, config=True):
        sp = sub.add_parser(name, help=help_)
        if config:
            sp.add_argument("--config", required=name != "build-kb", help="pipeline config (JSON)")
            sp.add_argument("--workers", type=int, help="override config workers")
        return sp

    sp = add("build-kb", "convert id<TAB>lang<TAB>form TSV to a KB snapshot")
    sp.add_argument("--tsv", required=True)
    sp.add_argument("--out")
    add("link", "link entities in mono/train/test target text")
    add("pack", "pack documents into <=512-subword segments")
    sp = add("noise", "emit DAE or DEEP noised pairs")
    sp.add_argument("--objective", type=str.upper, choices=["DAE", "DEEP"])
    sp = add("emit", "write task-token-prefixed training text and the DEEP lexicon")
    sp.add_argument("--objective", type=str.upper, choices=["DAE", "DEEP"])
    sp = add("sample", "build per-epoch finetuning plans")
    sp.add_argument("--mode", choices=["single", "multitask"])
    sp.add_argument("--objective", type=str.upper, choices=["DAE", "DEEP"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--epochs", type=int)
    sp = add("eval", "BLEU, entity accuracy, groups and frequency-bin matrices")
    sp.add_argument("--hyp", help="override paths.hypotheses")
    sp.add_argument("--baseline", help="override paths.baseline")
    sp.add_argument("--smooth", action="store_true")
    add("stats", "corpus and entity-coverage statistics")
    sp = add("synth", "generate a synthetic world", config=False)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--spec", help="WorldSpec overrides (JSON)")
    return p


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        if getattr(args, "config", None):
            overrides = {"workers": args.workers} if args.workers is not None else {}
            raw, base = load_config(args.config, overrides)
            cfg = resolve(raw, base, REQUIRED.get(args.command, ()))
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        COMMANDS[args.command](args, cfg)
        log.debug("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    except ConfigError as e:
        for d in e.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return 2
    except (KBFormatError, ValueError, KeyError, FileNotFoundError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    logging.basicConfig(
        level=os.environ.get("DEEPCORPUS_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
