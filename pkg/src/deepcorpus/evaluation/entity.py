"""Entity translation accuracy and its breakdowns by exposure group and frequency."""
from __future__ import annotations

import csv
import hashlib
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..linker import Gazetteer, link

DEFAULT_BIN_EDGES = (0, 1, 4, 16, 64)
GROUPS = ("PFT", "PT", "FT", "other")


@dataclass
class EntityScore:
    ref_occurrences: int = 0
    matched: int = 0

    @property
    def accuracy(self) -> float:
        return self.matched / self.ref_occurrences if self.ref_occurrences else 0.0


@dataclass
class BinMatrix:
    """Values over (pre-training bin x finetuning bin); ``None`` marks an empty cell."""

    row_labels: list[str]
    col_labels: list[str]
    values: list[list[float | None]]
    counts: list[list[int]]
    members: list[list[list[str]]]

    def to_json(self) -> dict:
        return {
            "rows": "pretrain_frequency",
            "cols": "finetune_frequency",
            "row_labels": self.row_labels,
            "col_labels": self.col_labels,
            "values": self.values,
            "counts": self.counts,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pretrain\\finetune", *self.col_labels])
        for label, row in zip(self.row_labels, self.values):
            w.writerow([label, *("" if v is None else f"{v:.6f}" for v in row)])
        return buf.getvalue()


@dataclass
class EntityAccuracyReport:
    per_entity: dict[str, EntityScore]
    macro_accuracy: float
    corpus_digest: str = ""
    group: dict[str, str] = field(default_factory=dict)
    bins: BinMatrix | None = None

    def to_json(self) -> dict:
        out = {
            "macro_accuracy": self.macro_accuracy,
            "corpus_digest": self.corpus_digest,
            "per_entity": {
                eid: {"ref_occurrences": s.ref_occurrences, "matched": s.matched, "accuracy": s.accuracy}
                for eid, s in sorted(self.per_entity.items())
            },
            "group": dict(sorted(self.group.items())),
        }
        if self.group:
            out["group_accuracy"] = group_accuracy(self, self.group)
        if self.bins is not None:
            out["bins"] = self.bins.to_json()
        return out


def _macro(scores: Iterable[EntityScore]) -> float:
    accs = [s.accuracy for s in scores if s.ref_occurrences > 0]
    return sum(accs) / len(accs) if accs else 0.0


def _digest(ref_ids: Sequence[Sequence[str]]) -> str:
    h = hashlib.sha256()
    for ids in ref_ids:
        h.update(("\x1f".join(ids) + "\x1e").encode("utf-8"))
    return h.hexdigest()[:16]


def accuracy_from_links(
    hyp_ids: Sequence[Sequence[str]], ref_ids: Sequence[Sequence[str]]
) -> EntityAccuracyReport:
    """Score per-sentence entity id lists (one list per sentence, with repeats).

    A reference occurrence of ``e`` in sentence ``i`` is matched when the
    hypothesis for ``i`` also mentions ``e``; ``k`` reference occurrences need
    ``k`` hypothesis occurrences.
    """
    if len(hyp_ids) != len(ref_ids):
        raise ValueError(f"{len(hyp_ids)} hypothesis sentences vs {len(ref_ids)} references")
    per: dict[str, EntityScore] = {}
    for h, r in zip(hyp_ids, ref_ids):
        hc = Counter(h)
        for eid, k in Counter(r).items():
            s = per.setdefault(eid, EntityScore())
            s.ref_occurrences += k
            s.matched += min(k, hc[eid])
    return EntityAccuracyReport(per, _macro(per.values()), _digest(ref_ids))


def entity_accuracy(
    hyp_sentences: Sequence[Sequence[str]], ref_sentences: Sequence[Sequence[str]], gazetteer: Gazetteer
) -> EntityAccuracyReport:
    """Link both sides with the same gazetteer and score reference mentions.

    Untranslated copies (e.g. source-script names left in the output) are not
    in the target-language gazetteer and so count as misses.
    """
    if len(hyp_sentences) != len(ref_sentences):
        raise ValueError(f"{len(hyp_sentences)} hypotheses vs {len(ref_sentences)} references")
    hyp_ids = [[sp.entity_id for sp in link(h, gazetteer)] for h in hyp_sentences]
    ref_ids = [[sp.entity_id for sp in link(r, gazetteer)] for r in ref_sentences]
    return accuracy_from_links(hyp_ids, ref_ids)


def partition_entities(pretrain_ids: Iterable[str], finetune_ids: Iterable[str], test_ids: Iterable[str]) -> dict[str, str]:
    pre, fin = set(pretrain_ids), set(finetune_ids)
    out = {}
    for eid in set(test_ids):
        if eid in pre and eid in fin:
            out[eid] = "PFT"
        elif eid in pre:
            out[eid] = "PT"
        elif eid in fin:
            out[eid] = "FT"
        else:
            out[eid] = "other"
    return out


def group_accuracy(report: EntityAccuracyReport, groups: Mapping[str, str]) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    for g in GROUPS:
        members = [s for eid, s in report.per_entity.items() if groups.get(eid) == g and s.ref_occurrences]
        out[g] = _macro(members) if members else None
    return out


def bin_labels(edges: Sequence[int]) -> list[str]:
    labels = []
    for i, lo in enumerate(edges):
        if i + 1 < len(edges):
            hi = edges[i + 1] - 1
            labels.append(str(lo) if hi == lo else f"{lo}-{hi}")
        else:
            labels.append(f"{lo}+")
    return labels


def bin_index(freq: int, edges: Sequence[int]) -> int:
    if freq < edges[0]:
        raise ValueError(f"frequency {freq} below the first bin edge {edges[0]}")
    i = 0
    while i + 1 < len(edges) and freq >= edges[i + 1]:
        i += 1
    return i


def _check_edges(edges: Sequence[int]) -> None:
    if not edges or edges[0] != 0 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must start at 0 and increase strictly")
    if len(edges) < 2 or edges[1] != 1:
        # the first bin must be exactly {0} so the PT column / FT row exist
        raise ValueError("bin edges must begin with 0, 1")


def _bucket(report, pretrain_freqs, finetune_freqs, edges):
    cells: dict[tuple[int, int], list[str]] = {}
    for eid, s in report.per_entity.items():
        if not s.ref_occurrences:
            continue
        pf = pretrain_freqs.get(eid, 0)
        ff = finetune_freqs.get(eid, 0)
        if pf == 0 and ff == 0:
            # test-only entities belong to none of PFT/PT/FT
            continue
        cells.setdefault((bin_index(pf, edges), bin_index(ff, edges)), []).append(eid)
    return cells


def bin_matrix(
    report: EntityAccuracyReport,
    pretrain_freqs: Mapping[str, int],
    finetune_freqs: Mapping[str, int],
    bin_edges: Sequence[int] = DEFAULT_BIN_EDGES,
) -> BinMatrix:
    """Macro accuracy of ``report`` per frequency cell."""
    _check_edges(bin_edges)
    cells = _bucket(report, pretrain_freqs, finetune_freqs, bin_edges)
    k = len(bin_edges)
    values = [[None] * k for _ in range(k)]
    counts = [[0] * k for _ in range(k)]
    members = [[[] for _ in range(k)] for _ in range(k)]
    for (i, j), eids in cells.items():
        values[i][j] = _macro(report.per_entity[e] for e in eids)
        counts[i][j] = len(eids)
        members[i][j] = sorted(eids)
    labels = bin_labels(bin_edges)
    return BinMatrix(labels, list(labels), values, counts, members)


def frequency_gain_matrix(
    report_a: EntityAccuracyReport,
    report_b: EntityAccuracyReport,
    pretrain_freqs: Mapping[str, int],
    finetune_freqs: Mapping[str, int],
    bin_edges: Sequence[int] = DEFAULT_BIN_EDGES,
) -> BinMatrix:
    """Per-cell macro accuracy of ``report_b`` minus that of ``report_a``.

    Rows bin the pre-training frequency and columns the finetuning frequency,
    both ascending, so column 0 holds the PT entities and row 0 the FT ones.
    Test-only entities are left out. Empty cells are ``None``.
    """
    if report_a.corpus_digest != report_b.corpus_digest or set(report_a.per_entity) != set(report_b.per_entity):
        raise ValueError("reports were computed on different test corpora")
    _check_edges(bin_edges)
    cells = _bucket(report_b, pretrain_freqs, finetune_freqs, bin_edges)
    k = len(bin_edges)
    values = [[None] * k for _ in range(k)]
    counts = [[0] * k for _ in range(k)]
    members = [[[] for _ in range(k)] for _ in range(k)]
    for (i, j), eids in cells.items():
        b = _macro(report_b.per_entity[e] for e in eids)
        a = _macro(report_a.per_entity[e] for e in eids)
        values[i][j] = b - a
        counts[i][j] = len(eids)
        members[i][j] = sorted(eids)
    labels = bin_labels(bin_edges)
    return BinMatrix(labels, list(labels), values, counts, members)
