import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from deepcorpus.evaluation import (
    accuracy_from_links,
    bin_index,
    bin_labels,
    bin_matrix,
    corpus_bleu,
    corpus_stats,
    coverage_stats,
    entity_accuracy,
    frequency_gain_matrix,
    group_accuracy,
    partition_entities,
)
from deepcorpus.kb import EntityRecord, from_records
from deepcorpus.linker import LinkedSpan, build_gazetteer
from deepcorpus.subword import Segment
from oracles import accuracy_oracle, bleu_oracle

# ---------------------------------------------------------------- BLEU

HYPS = [["the", "cat", "sat", "on", "the", "mat"], ["a", "dog", "ran", "in", "the", "park"]]
REFS = [["the", "cat", "is", "on", "the", "mat"], ["a", "dog", "ran", "in", "a", "park", "today"]]


def test_bleu_hand_case():
    # by hand: p1 = 10/12, p2 = 6/10, p3 = 3/8, p4 = 1/6; c = 12, r = 13
    score, precisions = bleu_oracle(HYPS, REFS)
    assert precisions == [Fraction(10, 12), Fraction(6, 10), Fraction(3, 8), Fraction(1, 6)]
    expected = 38.68310250680001  # 100 * exp(1 - 13/12) * (1/32) ** (1/4)
    assert score == pytest.approx(expected, abs=1e-6)
    assert corpus_bleu(HYPS, REFS) == pytest.approx(expected, abs=1e-6)


def test_bleu_identity_and_disjoint():
    assert corpus_bleu(REFS, REFS) == pytest.approx(100.0)
    assert corpus_bleu([["x", "y", "z", "w"]], [["a", "b", "c", "d"]]) == 0.0


def test_bleu_zero_precision_and_smoothing():
    hyps, refs = [HYPS[0]], [REFS[0]]  # no 4-gram match
    assert corpus_bleu(hyps, refs) == 0.0
    assert 0 < corpus_bleu(hyps, refs, smooth=True) < 100


def test_bleu_short_sentences():
    assert corpus_bleu([["a"]], [["a"]]) == pytest.approx(100.0)
    # only unigrams and bigrams exist: sqrt(1/2 * 0/1) is zero
    assert corpus_bleu([["a", "b"]], [["a", "c"]]) == 0.0
    assert corpus_bleu([["a", "b"]], [["a", "b", "c"]]) == pytest.approx(100 * math.exp(1 - 3 / 2))


def test_bleu_errors():
    with pytest.raises(ValueError):
        corpus_bleu([["a"]], [])
    with pytest.raises(ValueError):
        corpus_bleu([], [])


sent_st = st.lists(st.sampled_from("abcde"), min_size=1, max_size=12)


@given(st.lists(st.tuples(sent_st, sent_st), min_size=1, max_size=6))
def test_bleu_matches_oracle_and_range(pairs):
    hyps, refs = [p[0] for p in pairs], [p[1] for p in pairs]
    got = corpus_bleu(hyps, refs)
    assert 0.0 <= got <= 100.0 + 1e-9
    assert got == pytest.approx(bleu_oracle(hyps, refs)[0], abs=1e-9)
    assert corpus_bleu(refs, refs) == pytest.approx(100.0)


# ---------------------------------------------------------------- entity accuracy


def check_against_oracle(report, hyp_ids, ref_ids):
    per, macro = accuracy_oracle(hyp_ids, ref_ids)
    assert {e: (s.ref_occurrences, s.matched) for e, s in report.per_entity.items()} == per
    assert report.macro_accuracy == pytest.approx(float(macro), abs=1e-12)


CITY_KB = from_records(
    [
        EntityRecord("Q1", {"en": ("Krasnodar",), "ru": ("Краснодаре",)}),
        EntityRecord("Q2", {"en": ("Saratov",), "ru": ("Саратове",)}),
        EntityRecord("Q3", {"en": ("Ulyanovsk",), "ru": ("Ульяновске",)}),
    ],
    {"en", "ru"},
)
RU_GAZ = build_gazetteer(CITY_KB, "ru")


def test_identity_scores_one():
    refs = [["в", "Краснодаре"], ["и", "Саратове", "Ульяновске"]]
    assert entity_accuracy(refs, refs, RU_GAZ).macro_accuracy == 1.0


def test_untranslated_copy_is_a_miss():
    refs = [["в", "Краснодаре", "и", "Саратове"]]
    hyps = [["в", "Krasnodar", "и", "Саратове"]]
    rep = entity_accuracy(hyps, refs, RU_GAZ)
    assert rep.per_entity["Q1"].matched == 0 and rep.per_entity["Q2"].matched == 1
    assert rep.macro_accuracy == 0.5


def test_ten_sentence_constructed_corpus():
    ru = {"Q1": "Краснодаре", "Q2": "Саратове", "Q3": "Ульяновске"}
    ref_ids = [["Q1"], ["Q1", "Q1"], ["Q2"], [], ["Q3", "Q1"], ["Q2", "Q2"], ["Q3"], ["Q1"], [], ["Q2", "Q3"]]
    hyp_ids = [["Q1"], ["Q1"], [], ["Q2"], ["Q1", "Q3"], ["Q2", "Q2", "Q2"], [], ["Q2"], [], ["Q3"]]

    def render(ids):
        return [[w for e in s for w in ("и", ru[e])] or ["и"] for s in ids]

    rep = entity_accuracy(render(hyp_ids), render(ref_ids), RU_GAZ)
    check_against_oracle(rep, hyp_ids, ref_ids)
    # frozen: Q1 3/5, Q2 2/4, Q3 2/3
    assert rep.macro_accuracy == pytest.approx((3 / 5 + 2 / 4 + 2 / 3) / 3)


def random_id_corpus(rng, n_sent, n_ent):
    ref, hyp = [], []
    for _ in range(n_sent):
        r = [f"E{rng.randrange(n_ent)}" for _ in range(rng.randrange(4))]
        h = [e for e in r if rng.random() < 0.6] + [f"E{rng.randrange(n_ent)}" for _ in range(rng.randrange(2))]
        rng.shuffle(h)
        ref.append(r)
        hyp.append(h)
    return hyp, ref


@pytest.mark.parametrize("seed", range(5))
def test_accuracy_matches_oracle_on_random_corpora(seed):
    hyp, ref = random_id_corpus(random.Random(seed), 1000, 60)
    check_against_oracle(accuracy_from_links(hyp, ref), hyp, ref)


def test_accuracy_invariant_to_sentence_order():
    hyp, ref = random_id_corpus(random.Random(9), 300, 20)
    order = list(range(300))
    random.Random(1).shuffle(order)
    a = accuracy_from_links(hyp, ref).macro_accuracy
    b = accuracy_from_links([hyp[i] for i in order], [ref[i] for i in order]).macro_accuracy
    assert a == pytest.approx(b, abs=1e-12)


def test_adding_a_correct_mention_never_hurts():
    hyp, ref = random_id_corpus(random.Random(2), 200, 15)
    base = accuracy_from_links(hyp, ref).per_entity
    for i in range(0, 200, 7):
        if ref[i]:
            more = [list(h) for h in hyp]
            more[i].append(ref[i][0])
            after = accuracy_from_links(more, ref).per_entity
            assert all(after[e].accuracy >= base[e].accuracy for e in base)


def test_accuracy_length_mismatch():
    with pytest.raises(ValueError):
        accuracy_from_links([[]], [])


# ---------------------------------------------------------------- partition


def test_partition_examples():
    assert partition_entities({"a"}, {"a"}, {"a"}) == {"a": "PFT"}
    assert partition_entities(set(), set(), {"a"}) == {"a": "other"}
    assert partition_entities({"a", "x"}, {"b", "x"}, {"a", "b"}) == {"a": "PT", "b": "FT"}


@pytest.mark.parametrize("seed", range(3))
def test_partition_matches_set_algebra(seed):
    rng = random.Random(seed)
    universe = [f"Q{i}" for i in range(3000)]
    pre = set(rng.sample(universe, 1000))
    fin = set(rng.sample(universe, 1000))
    test = set(rng.sample(universe, 1000))
    got = partition_entities(pre, fin, test)
    expect = {
        "PFT": test & pre & fin,
        "PT": (test & pre) - fin,
        "FT": (test & fin) - pre,
        "other": test - pre - fin,
    }
    for g, ids in expect.items():
        assert {e for e, gg in got.items() if gg == g} == ids
    assert set(got) == test


# ---------------------------------------------------------------- bins and gain


def test_bin_helpers():
    edges = (0, 1, 4, 16, 64)
    assert bin_labels(edges) == ["0", "1-3", "4-15", "16-63", "64+"]
    assert [bin_index(f, edges) for f in (0, 1, 3, 4, 15, 16, 63, 64, 1000)] == [0, 1, 1, 2, 2, 3, 3, 4, 4]


REF_IDS = [["A"], ["B"], ["B"], ["C"], ["D", "D"], ["E"]]
HYP_A = [[], ["B"], [], [], ["D", "D"], ["E"]]
HYP_B = [["A"], ["B"], [], ["C"], ["D"], []]
PRE = {"A": 0, "B": 5, "C": 2, "D": 1, "E": 0}
FIN = {"A": 3, "B": 0, "C": 2, "D": 1, "E": 0}


def test_gain_two_by_two_by_hand():
    a, b = accuracy_from_links(HYP_A, REF_IDS), accuracy_from_links(HYP_B, REF_IDS)
    g = frequency_gain_matrix(a, b, PRE, FIN, (0, 1))
    # A is FT (0 -> 1), B is PT (1/2 both), C and D share the top-right cell:
    # b = (1 + 1/2) / 2, a = (0 + 1) / 2; E is test-only and left out
    assert g.values == [[None, 1.0], [0.0, 0.25]]
    assert g.members == [[[], ["A"]], [["B"], ["C", "D"]]]
    assert g.to_csv().splitlines() == ["pretrain\\finetune,0,1+", "0,,1.000000", "1+,0.000000,0.250000"]


def test_gain_of_report_with_itself_is_zero():
    hyp, ref = random_id_corpus(random.Random(4), 400, 40)
    rep = accuracy_from_links(hyp, ref)
    rng = random.Random(0)
    pre = {f"E{i}": rng.choice([0, 1, 5, 20, 70]) for i in range(40)}
    fin = {f"E{i}": rng.choice([0, 2, 9]) for i in range(40)}
    g = frequency_gain_matrix(rep, rep, pre, fin)
    assert all(v in (None, 0.0) for row in g.values for v in row)


def test_gain_matches_bruteforce_cells():
    hyp, ref = random_id_corpus(random.Random(8), 1000, 50)
    hyp2, _ = random_id_corpus(random.Random(9), 1000, 50)
    a, b = accuracy_from_links(hyp, ref), accuracy_from_links(hyp2, ref)
    rng = random.Random(1)
    pre = {f"E{i}": rng.randrange(0, 100) for i in range(50)}
    fin = {f"E{i}": rng.choice([0, 0, 1, 3, 5, 30]) for i in range(50)}
    edges = (0, 1, 4, 16, 64)
    g = frequency_gain_matrix(a, b, pre, fin, edges)

    def cell(f):
        return sum(1 for e in edges if f >= e) - 1

    per_a, _ = accuracy_oracle(hyp, ref)
    per_b, _ = accuracy_oracle(hyp2, ref)
    for i in range(5):
        for j in range(5):
            ids = [e for e in per_a if (pre[e] or fin[e]) and cell(pre[e]) == i and cell(fin[e]) == j]
            if not ids:
                assert g.values[i][j] is None
                continue
            mb = sum(Fraction(per_b[e][1], per_b[e][0]) for e in ids) / len(ids)
            ma = sum(Fraction(per_a[e][1], per_a[e][0]) for e in ids) / len(ids)
            assert g.values[i][j] == pytest.approx(float(mb - ma), abs=1e-12)


def test_gain_rejects_different_corpora():
    a = accuracy_from_links([["A"]], [["A"]])
    b = accuracy_from_links([["B"]], [["B"]])
    with pytest.raises(ValueError, match="different test corpora"):
        frequency_gain_matrix(a, b, {}, {})


def test_bad_edges_rejected():
    rep = accuracy_from_links([["A"]], [["A"]])
    for edges in ((1, 4), (0, 4, 16), (0, 1, 1)):
        with pytest.raises(ValueError):
            bin_matrix(rep, {"A": 1}, {"A": 1}, edges)


def test_group_accuracy_and_bins():
    rep = accuracy_from_links(HYP_B, REF_IDS)
    groups = partition_entities({e for e, f in PRE.items() if f}, {e for e, f in FIN.items() if f}, PRE)
    assert groups == {"A": "FT", "B": "PT", "C": "PFT", "D": "PFT", "E": "other"}
    assert group_accuracy(rep, groups) == {"PFT": 0.75, "PT": 0.5, "FT": 1.0, "other": 0.0}
    m = bin_matrix(rep, PRE, FIN, (0, 1))
    assert m.values == [[None, 1.0], [0.5, 0.75]]


# ---------------------------------------------------------------- coverage and corpus stats


def test_coverage_full_overlap():
    c = coverage_stats([["a", "b", "c"]], [["a"], ["b", "b"]], [["c", "a"]])
    assert (c.pf_type_pct, c.pf_count_pct, c.pt_type_pct, c.pt_count_pct) == (100.0, 100.0, 100.0, 100.0)


def test_coverage_sixty_percent():
    pre = [f"E{i}" for i in range(6)]
    fin = [f"E{i}" for i in range(10)]
    c = coverage_stats(pre, fin, fin)
    assert c.pf_type_pct == 60.0 and c.pf_count_pct == 60.0 and c.pt_type_pct == 60.0


def test_coverage_empty_denominator():
    c = coverage_stats(["a"], [], [])
    assert c.pf_type_pct is None and c.pt_count_pct is None


def test_coverage_matches_bruteforce():
    rng = random.Random(3)
    p = [[f"E{rng.randrange(80)}" for _ in range(rng.randrange(4))] for _ in range(1000)]
    f = [[f"E{rng.randrange(120)}" for _ in range(rng.randrange(3))] for _ in range(500)]
    t = [[f"E{rng.randrange(120)}" for _ in range(rng.randrange(3))] for _ in range(300)]
    c = coverage_stats(p, f, t)
    seen = {e for s in p for e in s}
    for links, type_pct, count_pct in ((f, c.pf_type_pct, c.pf_count_pct), (t, c.pt_type_pct, c.pt_count_pct)):
        flat = [e for s in links for e in s]
        assert type_pct == pytest.approx(100 * len(set(flat) & seen) / len(set(flat)))
        assert count_pct == pytest.approx(100 * sum(e in seen for e in flat) / len(flat))


def test_coverage_accepts_spans_and_dicts():
    spans = [[LinkedSpan(0, 0, 1, "a", "x")], [{"id": "b"}]]
    c = coverage_stats(spans, ["a"], ["b"])
    assert c.pretrain_types == 2 and c.pt_type_pct == 100.0


def test_corpus_stats_no_entities():
    seg = Segment("s", [["a", "b"]], [[1, 2]])
    s = corpus_stats([seg], [[]])
    assert s.n_entity_subwords == 0 and s.tokens == 2 and s.subwords == 3


def test_corpus_stats_matches_bruteforce():
    rng = random.Random(6)
    segs, links = [], []
    for k in range(300):
        sents = [[f"t{rng.randrange(9)}" for _ in range(rng.randint(1, 9))] for _ in range(rng.randint(1, 4))]
        ws = [[rng.randint(1, 4) for _ in s] for s in sents]
        spans = []
        for si, s in enumerate(sents):
            j = 0
            while j < len(s):
                if rng.random() < 0.2:
                    e = min(len(s), j + rng.randint(1, 2))
                    spans.append(LinkedSpan(si, j, e, f"E{rng.randrange(30)}", "x"))
                    j = e
                else:
                    j += 1
        segs.append(Segment(f"s{k}", sents, ws))
        links.append(spans)
    st_ = corpus_stats(segs, links)
    per_seg = []
    for seg, spans in zip(segs, links):
        total = 0
        for sp in spans:
            for pos in range(sp.token_start, sp.token_end):
                total += seg.word_subwords[sp.sentence_index][pos]
        per_seg.append(total)
    all_sw = sum(c for seg in segs for row in seg.word_subwords for c in row)
    assert st_.n_entity_subwords == pytest.approx(sum(per_seg) / len(segs))
    assert st_.n_per_512 == pytest.approx(512 * sum(per_seg) / all_sw)
    assert st_.entity_count == sum(len(x) for x in links)
    assert st_.entity_types == len({sp.entity_id for x in links for sp in x})
    assert st_.tokens == sum(len(s) for seg in segs for s in seg.sentences)
