import random

import pytest
from hypothesis import given, strategies as st

from bitext_forge.aligner import Alignment
from bitext_forge.bli import (
    GoldDictionary,
    InducedLexicon,
    LexiconEntry,
    PairCounts,
    align_for_lexicon,
    collect_pair_stats,
    evaluate,
    induce_lexicon,
    load_gold,
    report_markdown,
)
from bitext_forge.corpus import FrequencyBin, Vocabulary, vocabulary
from bitext_forge.errors import AlignmentError, FormatError

from bli_oracle import brute_induce, recount
from conftest import make_bitext


def _lex(mapping):
    return InducedLexicon({s: LexiconEntry(t, 1, 1.0) for s, t in mapping.items()})


class TestCollect:
    bitext = make_bitext([("a b", "x y"), ("a b", "x y")])

    def test_links(self):
        counts = collect_pair_stats(self.bitext, {0: Alignment(frozenset({(0, 0), (1, 1)}), 2, 2)})
        assert counts.count == {("a", "x"): 1, ("b", "y"): 1}

    def test_twice_doubles(self):
        al = Alignment(frozenset({(0, 0), (1, 1)}), 2, 2)
        counts = collect_pair_stats(self.bitext, {0: al, 1: al})
        assert counts.count == {("a", "x"): 2, ("b", "y"): 2}

    def test_empty(self):
        assert collect_pair_stats(self.bitext, {}).count == {}

    def test_unknown_id(self):
        with pytest.raises(AlignmentError):
            collect_pair_stats(self.bitext, {9: Alignment(frozenset(), 2, 2)})

    def test_out_of_bounds(self):
        al = Alignment(frozenset({(2, 0)}), 3, 2)
        with pytest.raises(AlignmentError):
            collect_pair_stats(self.bitext, {0: al})

    def test_additivity_and_marginals(self):
        rng = random.Random(0)
        rows = [(" ".join(rng.choices("abc", k=3)), " ".join(rng.choices("xyz", k=3))) for _ in range(12)]
        b = make_bitext(rows)
        als = {p.id: Alignment(frozenset((rng.randrange(3), rng.randrange(3)) for _ in range(3)), 3, 3) for p in b}
        whole = collect_pair_stats(b, als)
        part1 = collect_pair_stats(b, {k: v for k, v in als.items() if k < 5})
        part2 = collect_pair_stats(b, {k: v for k, v in als.items() if k >= 5})
        assert whole == part1 + part2
        for s in whole.src_marginal:
            assert whole.src_marginal[s] == sum(c for (e, _), c in whole.count.items() if e == s)
        for t in whole.tgt_marginal:
            assert whole.tgt_marginal[t] == sum(c for (_, f), c in whole.count.items() if f == t)


class TestInduce:
    def _counts(self, mapping):
        pc = PairCounts()
        for (e, f), c in mapping.items():
            pc.count[e, f] += c
            pc.src_marginal[e] += c
            pc.tgt_marginal[f] += c
        return pc

    def test_defaults(self):
        lex = induce_lexicon(self._counts({("a", "x"): 5}))
        assert lex["a"] == "x" and lex.entries["a"].prob == 1.0

    def test_min_count(self):
        assert "a" not in induce_lexicon(self._counts({("a", "x"): 1}))

    def test_tie_break(self):
        assert induce_lexicon(self._counts({("a", "y"): 3, ("a", "x"): 3}))["a"] == "x"

    def test_min_prob(self):
        counts = self._counts({("a", "x"): 2, ("a", "y"): 1, ("a", "z"): 1})
        assert "a" in induce_lexicon(counts, min_prob=0.5)
        assert "a" not in induce_lexicon(counts, min_prob=0.51)

    @given(
        st.dictionaries(st.tuples(st.sampled_from("abc"), st.sampled_from("xyz")), st.integers(1, 6)),
        st.integers(1, 4), st.integers(0, 3), st.floats(0, 1), st.floats(0, 0.5),
    )
    def test_anti_monotone(self, mapping, mc, mc_bump, mp, mp_bump):
        counts = self._counts(mapping)
        loose = induce_lexicon(counts, mc, mp)
        strict = induce_lexicon(counts, mc + mc_bump, min(1.0, mp + mp_bump))
        assert set(strict.entries) <= set(loose.entries)

    def test_tsv(self):
        lex = induce_lexicon(self._counts({("b", "y"): 2, ("a", "x"): 4}))
        assert lex.to_tsv() == "a\tx\t4\t1.000000\nb\ty\t2\t1.000000\n"


class TestGold:
    def test_aggregation(self, write):
        gold = load_gold(write("g.txt", "cat γάτα\ncat γατί\n"))
        assert gold.entries == {"cat": {"γάτα", "γατί"}}

    def test_empty(self, write):
        with pytest.raises(FormatError):
            load_gold(write("g.txt", ""))

    def test_tab_or_space(self, write):
        gold = load_gold(write("g.txt", "Dog\tσκύλος\ncat γάτα\n"))
        assert gold.entries == {"dog": {"σκύλος"}, "cat": {"γάτα"}}

    def test_malformed(self, write):
        with pytest.raises(FormatError, match=":2:"):
            load_gold(write("g.txt", "a b\na b c\n"))


class TestEvaluate:
    def test_perfect(self):
        gold = GoldDictionary({"a": {"x"}, "b": {"y"}})
        report = evaluate(_lex({"a": "x", "b": "y"}), gold, Vocabulary({"a": 1, "b": 1}))
        assert (report.precision, report.recall) == (100.0, 100.0)

    def test_half(self):
        gold = GoldDictionary({"a": {"x"}, "b": {"y"}})
        report = evaluate(_lex({"a": "x", "b": "z"}), gold, Vocabulary({"a": 3, "b": 7}))
        assert (report.precision, report.recall, report.f1) == (50.0, 50.0, 50.0)
        assert report.precision_by_bin[FrequencyBin.LOW] == 100.0
        assert report.precision_by_bin[FrequencyBin.MEDIUM] == 0.0
        assert report.precision_by_bin[FrequencyBin.HIGH] is None

    def test_oov(self):
        gold = GoldDictionary({w: {"x"} for w in "abcd"})
        report = evaluate(_lex({}), gold, Vocabulary({"a": 1, "b": 1, "c": 1}))
        assert report.oov_rate == 25.0
        assert report.precision is None and report.recall == 0.0 and report.f1 is None

    def test_no_in_vocab_sources(self):
        report = evaluate(_lex({"a": "x"}), GoldDictionary({"q": {"x"}}), Vocabulary({"a": 2}))
        assert report.recall is None and report.oov_rate == 100.0

    @pytest.mark.parametrize("seed", range(10))
    def test_brute_force_oracle(self, seed):
        rng = random.Random(seed)
        src_words = [f"s{i}" for i in range(8)]
        tgt_words = [f"t{i}" for i in range(8)]
        gold_map = {f"s{i}": {f"t{i}"} for i in range(10)}  # s8, s9 never occur
        rows = []
        for _ in range(rng.randint(5, 20)):
            n = rng.randint(1, 5)
            idx = rng.choices(range(8), k=n)
            tgt = [f"t{i}" if rng.random() < 0.7 else rng.choice(tgt_words) for i in idx]
            rows.append((" ".join(src_words[i] for i in idx), " ".join(tgt)))
        b = make_bitext(rows)
        alignments = align_for_lexicon(b, 5)
        links = [(b[p].src_tokens[i], b[p].tgt_tokens[j]) for p, al in alignments.items() for i, j in al.links]
        vocab = vocabulary(b, "src")
        lexicon = induce_lexicon(collect_pair_stats(b, alignments), 1, 0.1)
        assert {s: e.target for s, e in lexicon.entries.items()} == brute_induce(links, 1, 0.1)
        report = evaluate(lexicon, GoldDictionary(gold_map), vocab)
        expected = recount(brute_induce(links, 1, 0.1), gold_map, dict(vocab.counts))
        assert report.precision == expected["precision"]
        assert report.recall == expected["recall"]
        assert report.f1 == expected["f1"]
        assert report.oov_rate == expected["oov_rate"]
        for fb, name in zip(FrequencyBin, ("low", "medium", "high")):
            assert report.precision_by_bin[fb] == expected["by_bin"][name][0]
        weighted = sum(
            report.precision_by_bin[fb] * report.attempted_by_bin[fb]
            for fb in FrequencyBin if report.attempted_by_bin[fb]
        )
        if report.attempted:
            assert weighted / report.attempted == pytest.approx(report.precision, abs=1e-9)


def test_markdown():
    gold = GoldDictionary({"a": {"x"}})
    md = report_markdown({"orig": evaluate(_lex({"a": "x"}), gold, Vocabulary({"a": 1}))})
    assert "| orig | 100.00 | 100.00 | 100.00 | 0.00 | 100.00 | - | - |" in md
