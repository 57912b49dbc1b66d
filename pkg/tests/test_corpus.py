import pytest
from hypothesis import given, strategies as st

from bitext_forge.corpus import (
    Bitext,
    FrequencyBin,
    SentencePair,
    Vocabulary,
    frequency_bin,
    load_bitext,
    normalize,
    process,
    tokenize,
    vocabulary,
)
from bitext_forge.errors import BitextForgeError, FormatError

from conftest import make_bitext


class TestNormalize:
    def test_quotes_whitespace_lowercase(self):
        assert normalize("“Hi”  there") == '"hi" there'

    def test_fixed_point(self):
        assert normalize("abc") == "abc"

    def test_whitespace_collapse(self):
        assert normalize("  a\t b ") == "a b"

    def test_dashes_and_single_quotes(self):
        assert normalize("it‘s \u2013 a \u2014 test’") == "it's - a - test'"

    def test_lowercase_off(self):
        assert normalize("Hello World", lowercase=False) == "Hello World"

    def test_nfc(self):
        assert normalize("é") == "é"


class TestTokenize:
    def test_punctuation_split(self):
        assert tokenize("hello, world!") == ["hello", ",", "world", "!"]

    def test_empty(self):
        assert tokenize("") == []

    def test_interior_punctuation_kept(self):
        assert tokenize("state-of-the-art") == ["state-of-the-art"]
        assert tokenize("don't") == ["don't"]

    def test_leading_and_trailing_runs(self):
        assert tokenize('"(hi)".') == ['"', "(", "hi", ")", '"', "."]

    def test_all_punctuation_chunk(self):
        assert tokenize("...") == [".", ".", "."]

    def test_greek(self):
        assert tokenize("γεια σου;") == ["γεια", "σου", ";"]

    @given(st.text())
    def test_idempotent_on_own_output(self, text):
        tokens = process(text)
        assert list(process(" ".join(tokens))) == list(tokens)


class TestLoadBitext:
    def test_single_line(self, write):
        b = load_bitext(write("a.tsv", "hello\tγεια\n"))
        assert len(b) == 1
        assert b[0].id == 0
        assert b[0].tgt_tokens == ("γεια",)

    def test_no_tab(self, write):
        with pytest.raises(FormatError) as err:
            load_bitext(write("a.tsv", "no tab here\n"))
        assert err.value.lineno == 1

    def test_two_tabs(self, write):
        with pytest.raises(FormatError, match=":2:"):
            load_bitext(write("a.tsv", "a\tb\na\tb\tc\n"))

    def test_empty_side_skipped_and_ids_reassigned(self, write):
        b = load_bitext(write("a.tsv", "a\tb\n\tx\nc\td\n"))
        assert [p.id for p in b] == [0, 1]
        assert [p.src_raw for p in b] == ["a", "c"]
        assert b.skipped_lines == (2,)

    def test_punctuation_only_side_is_not_empty(self, write):
        assert len(load_bitext(write("a.tsv", "!\tx\n"))) == 1

    def test_whitespace_only_side_skipped(self, write):
        assert load_bitext(write("a.tsv", "   \tx\n")).skipped_lines == (1,)

    def test_invalid_utf8(self, write):
        with pytest.raises(FormatError, match="UTF-8"):
            load_bitext(write("a.tsv", b"ok\tok\n\xff\tx\n", mode="wb"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_bitext(tmp_path / "nope.tsv")

    def test_roundtrip_bytes(self, write):
        text = "Hello,  World!\t“Γεια”\nsecond line\tδεύτερη\n"
        path = write("a.tsv", text)
        assert load_bitext(path).to_tsv().encode() == path.read_bytes()

    def test_no_trailing_newline(self, write):
        b = load_bitext(write("a.tsv", "a\tb\nc\td"))
        assert len(b) == 2

    def test_unsupported_format(self, write):
        with pytest.raises(BitextForgeError):
            load_bitext(write("a.tsv", "a\tb\n"), format="csv")


def test_bitext_rejects_non_positional_ids():
    with pytest.raises(BitextForgeError):
        Bitext((SentencePair(1, "a", "b", ("a",), ("b",)),))


class TestVocabulary:
    def test_counts(self):
        b = make_bitext([("a b", "x"), ("a", "y")])
        assert vocabulary(b, "src") == {"a": 2, "b": 1}
        assert vocabulary(b, "tgt") == {"x": 1, "y": 1}

    def test_empty(self):
        assert len(vocabulary(Bitext(()), "src")) == 0

    @given(st.lists(st.tuples(st.text(min_size=1), st.text(min_size=1)), max_size=20))
    def test_total_matches_token_count(self, rows):
        pairs = [SentencePair.from_raw(0, s, t) for s, t in rows]
        pairs = [p for p in pairs if p.src_tokens and p.tgt_tokens]
        b = Bitext.from_strings([(p.src_raw, p.tgt_raw) for p in pairs])
        for side in ("src", "tgt"):
            vocab = vocabulary(b, side)
            assert vocab.total == sum(len(p.tokens(side)) for p in b)
            assert all(c >= 1 for c in vocab.counts.values())


class TestFrequencyBin:
    @pytest.mark.parametrize(
        "count, expected",
        [(1, FrequencyBin.LOW), (4, FrequencyBin.LOW), (5, FrequencyBin.MEDIUM),
         (99, FrequencyBin.MEDIUM), (100, FrequencyBin.HIGH), (10**6, FrequencyBin.HIGH)],
    )
    def test_boundaries(self, count, expected):
        assert frequency_bin(count) is expected

    def test_zero_is_error(self):
        with pytest.raises(ValueError):
            frequency_bin(0)

    @given(st.integers(min_value=1, max_value=10**7))
    def test_partition(self, count):
        containing = [b for b in FrequencyBin if count in b]
        assert containing == [frequency_bin(count)]
