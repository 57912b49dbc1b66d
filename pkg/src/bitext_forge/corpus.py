"""Loading, normalization and tokenization of parallel text.

A :class:`Bitext` is an ordered, immutable collection of :class:`SentencePair`
objects.  Pair ids are positional and every other artifact (candidates,
scores, alignments, records) refers to pairs through them.
"""

from __future__ import annotations

import enum
import logging
import os
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Literal

from .errors import BitextForgeError, FormatError

logger = logging.getLogger(__name__)

Side = Literal["src", "tgt"]

_CHAR_MAP = str.maketrans({
    "“": '"',
    "”": '"',
    "‘": "'",
    "’": "'",
    "\u2013": "-",
    "\u2014": "-",
})


def normalize(text: str, lowercase: bool = True) -> str:
    """Canonicalize a raw sentence.

    NFC composition, ASCII quotes and dashes, single spaces, no leading or
    trailing whitespace.  Lowercasing stands in for true-casing.
    """
    text = unicodedata.normalize("NFC", text)
    text = text.translate(_CHAR_MAP)
    text = " ".join(text.split())
    if lowercase:
        text = unicodedata.normalize("NFC", text.lower())
    return text


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Split on whitespace, then peel leading/trailing punctuation off each chunk.

    Every peeled punctuation character becomes its own token; punctuation
    surrounded by non-punctuation (``state-of-the-art``, ``don't``) stays put.

    >>> tokenize("hello, world!")
    ['hello', ',', 'world', '!']
    """
    tokens: list[str] = []
    for chunk in text.split():
        start, end = 0, len(chunk)
        while start < end and _is_punct(chunk[start]):
            start += 1
        while end > start and _is_punct(chunk[end - 1]):
            end -= 1
        tokens.extend(chunk[:start])
        if start < end:
            tokens.append(chunk[start:end])
        tokens.extend(chunk[end:])
    return tokens


def process(text: str, lowercase: bool = True) -> tuple[str, ...]:
    """normalize + tokenize, as applied to every side of every pair."""
    return tuple(tokenize(normalize(text, lowercase=lowercase)))


@dataclass(frozen=True)
class SentencePair:
    id: int
    src_raw: str
    tgt_raw: str
    src_tokens: tuple[str, ...]
    tgt_tokens: tuple[str, ...]

    @classmethod
    def from_raw(cls, id: int, src_raw: str, tgt_raw: str, lowercase: bool = True) -> SentencePair:
        return cls(id, src_raw, tgt_raw, process(src_raw, lowercase), process(tgt_raw, lowercase))

    def tokens(self, side: Side) -> tuple[str, ...]:
        return self.src_tokens if side == "src" else self.tgt_tokens

    def with_source(self, raw: str, tokens: Iterable[str]) -> SentencePair:
        return replace(self, src_raw=raw, src_tokens=tuple(tokens))

    def with_target(self, raw: str, tokens: Iterable[str]) -> SentencePair:
        return replace(self, tgt_raw=raw, tgt_tokens=tuple(tokens))


@dataclass(frozen=True)
class Bitext:
    pairs: tuple[SentencePair, ...]
    src_lang: str = "src"
    tgt_lang: str = "tgt"
    # 1-based line numbers of input lines dropped because a side was empty
    skipped_lines: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        for position, pair in enumerate(self.pairs):
            if pair.id != position:
                raise BitextForgeError(f"pair at position {position} has id {pair.id}")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[SentencePair]:
        return iter(self.pairs)

    def __getitem__(self, idx: int) -> SentencePair:
        return self.pairs[idx]

    @classmethod
    def from_strings(
        cls,
        rows: Iterable[tuple[str, str]],
        src_lang: str = "src",
        tgt_lang: str = "tgt",
        lowercase: bool = True,
    ) -> Bitext:
        """Build a bitext from in-memory (source, target) strings; empty sides are an error."""
        pairs = []
        for i, (src, tgt) in enumerate(rows):
            pair = SentencePair.from_raw(i, src, tgt, lowercase)
            if not pair.src_tokens or not pair.tgt_tokens:
                raise BitextForgeError(f"pair {i} has an empty side")
            pairs.append(pair)
        return cls(tuple(pairs), src_lang, tgt_lang)

    def to_tsv(self) -> str:
        return "".join(f"{p.src_raw}\t{p.tgt_raw}\n" for p in self.pairs)


def load_bitext(
    path: str | os.PathLike,
    format: str = "tsv",
    lowercase: bool = True,
    src_lang: str = "src",
    tgt_lang: str = "tgt",
) -> Bitext:
    """Read a ``source<TAB>target`` file.

    Lines where either side tokenizes to nothing are skipped, logged, and
    listed in ``Bitext.skipped_lines``; the surviving pairs are numbered
    0..N-1 in file order.

    Raises:
        FormatError: a line without exactly one tab, or invalid UTF-8.
        OSError: the file cannot be read.
    """
    if format != "tsv":
        raise BitextForgeError(f"unsupported bitext format: {format!r}")
    with open(path, "rb") as fh:
        data = fh.read()
    pairs: list[SentencePair] = []
    skipped: list[int] = []
    for lineno, raw_line in enumerate(_split_lines(data), start=1):
        try:
            line = raw_line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(path, lineno, f"invalid UTF-8 ({exc.reason})") from None
        if line.count("\t") != 1:
            raise FormatError(path, lineno, f"expected exactly one tab, found {line.count(chr(9))}")
        src_raw, tgt_raw = line.split("\t")
        pair = SentencePair.from_raw(len(pairs), src_raw, tgt_raw, lowercase)
        if not pair.src_tokens or not pair.tgt_tokens:
            skipped.append(lineno)
            continue
        pairs.append(pair)
    if skipped:
        logger.warning("%s: skipped %d line(s) with an empty side: %s", path, len(skipped), skipped)
    return Bitext(tuple(pairs), src_lang, tgt_lang, tuple(skipped))


def _split_lines(data: bytes) -> list[bytes]:
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return lines


class Vocabulary:
    """Token type counts for one side of a bitext."""

    def __init__(self, counts: Counter[str] | dict[str, int] | None = None) -> None:
        self.counts: Counter[str] = Counter(counts or {})

    def __contains__(self, token: object) -> bool:
        return token in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def __iter__(self) -> Iterator[str]:
        return iter(self.counts)

    def __getitem__(self, token: str) -> int:
        return self.counts[token]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Vocabulary):
            return self.counts == other.counts
        if isinstance(other, dict):
            return dict(self.counts) == other
        return NotImplemented

    def __repr__(self) -> str:
        return f"Vocabulary({dict(self.counts)!r})"

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def vocabulary(bitext: Bitext, side: Side) -> Vocabulary:
    counts: Counter[str] = Counter()
    for pair in bitext:
        counts.update(pair.tokens(side))
    return Vocabulary(counts)


class FrequencyBin(enum.Enum):
    """Half-open count intervals used to break down lexicon precision."""

    LOW = ("Low", 1, 5)
    MEDIUM = ("Medium", 5, 100)
    HIGH = ("High", 100, None)

    def __init__(self, label: str, lower: int, upper: int | None) -> None:
        self.label = label
        self.lower = lower
        self.upper = upper

    def __contains__(self, count: int) -> bool:
        return count >= self.lower and (self.upper is None or count < self.upper)

    @property
    def interval(self) -> str:
        return f"[{self.lower},{self.upper})" if self.upper is not None else f">={self.lower}"


def frequency_bin(count: int) -> FrequencyBin:
    if count < 1:
        raise ValueError(f"count must be >= 1 to be binned (got {count}); unseen words are OOV")
    if count < 5:
        return FrequencyBin.LOW
    if count < 100:
        return FrequencyBin.MEDIUM
    return FrequencyBin.HIGH
