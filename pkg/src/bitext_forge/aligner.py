"""Statistical word alignment: IBM Model 1 and a fast_align-style diagonal model.

Both trainers share one EM loop.  They differ only in the alignment prior
p(i | j, m, n): uniform over the n source words plus NULL for IBM Model 1,
and ``p_null`` for NULL plus (1 - p_null) * softmax(-tension * |i/n - j/m|)
over source positions for the diagonal model.  The tension is a fixed
hyperparameter, it is not re-estimated.

Expected counts are accumulated per fixed-size chunk of pairs and merged in
chunk order, so tables are bit-identical whatever the worker count.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .corpus import Bitext, SentencePair
from .errors import AlignmentError

logger = logging.getLogger(__name__)

NULL = "\x00NULL\x00"
FLOOR = 1e-12
CHUNK_SIZE = 256
THREADS_ENV = "BITEXT_FORGE_THREADS"


class Direction(enum.Enum):
    """Which side is conditioned on: SRC_TO_TGT models t(tgt word | src word)."""

    SRC_TO_TGT = "src-tgt"
    TGT_TO_SRC = "tgt-src"

    def split(self, pair: SentencePair) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """(conditioning tokens, generated tokens) for this direction."""
        if self is Direction.SRC_TO_TGT:
            return pair.src_tokens, pair.tgt_tokens
        return pair.tgt_tokens, pair.src_tokens

    @property
    def reverse(self) -> Direction:
        return Direction.TGT_TO_SRC if self is Direction.SRC_TO_TGT else Direction.SRC_TO_TGT


@dataclass(frozen=True)
class DiagonalParams:
    tension: float = 4.0
    p_null: float = 0.08

    def __post_init__(self) -> None:
        if not self.tension >= 0:
            raise ValueError(f"diagonal tension must be >= 0, got {self.tension}")
        if not 0 <= self.p_null < 1:
            raise ValueError(f"p_null must be in [0, 1), got {self.p_null}")


class TranslationTable:
    """Sparse lexical table t(f | e); rows keyed by conditioning word, NULL included."""

    def __init__(self, probs: Mapping[str, Mapping[str, float]]) -> None:
        self.probs: dict[str, dict[str, float]] = {e: dict(row) for e, row in probs.items()}

    def prob(self, f: str, e: str) -> float:
        row = self.probs.get(e)
        return row.get(f, 0.0) if row else 0.0

    def row(self, e: str) -> dict[str, float]:
        return self.probs.get(e, {})

    def __contains__(self, e: object) -> bool:
        return e in self.probs

    def sources(self) -> list[str]:
        return [e for e in self.probs if e != NULL]

    def max_row_error(self) -> float:
        """Largest |sum_f t(f|e) - 1| over non-empty rows."""
        return max((abs(math.fsum(row.values()) - 1.0) for row in self.probs.values() if row), default=0.0)


@dataclass(frozen=True)
class AlignmentModel:
    table: TranslationTable
    direction: Direction
    params: DiagonalParams | None = None
    log_likelihoods: tuple[float, ...] = ()

    def prior(self, n: int, m: int) -> tuple[tuple[float, ...], ...]:
        return _prior(n, m, self.params)


@dataclass(frozen=True)
class Alignment:
    """Word links of one pair, always oriented (src_index, tgt_index)."""

    links: frozenset[tuple[int, int]]
    src_len: int
    tgt_len: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "links", frozenset(self.links))
        for i, j in self.links:
            if not (0 <= i < self.src_len and 0 <= j < self.tgt_len):
                raise AlignmentError(f"link {i}-{j} out of range for lengths {self.src_len}x{self.tgt_len}")

    def to_pharaoh(self) -> str:
        return " ".join(f"{i}-{j}" for i, j in sorted(self.links))

    @classmethod
    def from_pharaoh(cls, text: str, src_len: int, tgt_len: int) -> Alignment:
        links = set()
        for item in text.split():
            i, sep, j = item.partition("-")
            if not sep:
                raise AlignmentError(f"bad link {item!r}")
            links.add((int(i), int(j)))
        return cls(frozenset(links), src_len, tgt_len)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


@lru_cache(maxsize=4096)
def _prior(n: int, m: int, params: DiagonalParams | None) -> tuple[tuple[float, ...], ...]:
    # row j: (NULL, src_1..src_n) prior for target position j
    if params is None:
        uniform = 1.0 / (n + 1)
        return ((uniform,) * (n + 1),) * m
    rows = []
    for j in range(1, m + 1):
        weights = [math.exp(-params.tension * abs(i / n - j / m)) for i in range(1, n + 1)]
        z = math.fsum(weights)
        scale = (1.0 - params.p_null) / z
        rows.append((params.p_null, *(w * scale for w in weights)))
    return tuple(rows)


def _estep(
    chunk: Sequence[tuple[tuple[str, ...], tuple[str, ...]]],
    table: dict[str, dict[str, float]],
    params: DiagonalParams | None,
) -> tuple[dict[str, dict[str, float]], float]:
    counts: dict[str, dict[str, float]] = defaultdict(dict)
    loglik = 0.0
    for es, fs in chunk:
        prior = _prior(len(es) - 1, len(fs), params)
        rows = [table[e] for e in es]
        for j, f in enumerate(fs):
            pj = prior[j]
            weights = [p * row.get(f, 0.0) for p, row in zip(pj, rows)]
            total = math.fsum(weights)
            if total <= 0.0:
                continue
            loglik += math.log(total)
            for e, w in zip(es, weights):
                if w:
                    row = counts[e]
                    row[f] = row.get(f, 0.0) + w / total
    return counts, loglik


def _em(
    corpus: list[tuple[tuple[str, ...], tuple[str, ...]]],
    iterations: int,
    params: DiagonalParams | None,
    threads: int | None,
) -> tuple[TranslationTable, tuple[float, ...]]:
    if not corpus:
        raise AlignmentError("cannot train an aligner on an empty bitext")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")

    f_vocab = {f for _, fs in corpus for f in fs}
    init = 1.0 / len(f_vocab)
    table: dict[str, dict[str, float]] = defaultdict(dict)
    for es, fs in corpus:
        for e in es:
            row = table[e]
            for f in fs:
                row[f] = init
    table = dict(table)

    chunks = [corpus[k:k + CHUNK_SIZE] for k in range(0, len(corpus), CHUNK_SIZE)]
    workers = min(resolve_threads(threads), len(chunks))
    history: list[float] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for it in range(iterations):
            partials = pool.map(lambda c: _estep(c, table, params), chunks) if workers > 1 else (
                _estep(c, table, params) for c in chunks
            )
            totals: dict[str, dict[str, float]] = {}
            loglik = 0.0
            for counts, ll in partials:
                loglik += ll
                for e, row in counts.items():
                    acc = totals.setdefault(e, {})
                    for f, c in row.items():
                        acc[f] = acc.get(f, 0.0) + c
            history.append(loglik)
            logger.info("EM iteration %d: corpus log-likelihood %.6f", it + 1, loglik)

            new_table: dict[str, dict[str, float]] = {}
            for e, row in totals.items():
                z = math.fsum(row.values())
                floored = {f: max(c / z, FLOOR) for f, c in row.items()}
                z2 = math.fsum(floored.values())
                new_table[e] = {f: p / z2 for f, p in floored.items()}
            # words whose every occurrence carried zero posterior keep their old row
            for e, row in table.items():
                new_table.setdefault(e, row)
            table = new_table
    return TranslationTable(table), tuple(history)


def _directed_corpus(bitext: Bitext, direction: Direction) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    out = []
    for pair in bitext:
        es, fs = direction.split(pair)
        out.append(((NULL, *es), fs))
    return out


def train_ibm1(
    bitext: Bitext,
    iterations: int = 5,
    direction: Direction = Direction.SRC_TO_TGT,
    threads: int | None = None,
) -> AlignmentModel:
    """IBM Model 1 EM from a uniform start.

    The returned model's ``table`` is the translation table; its
    ``log_likelihoods`` holds the corpus log-likelihood measured in the
    E-step of every iteration.
    """
    table, history = _em(_directed_corpus(bitext, direction), iterations, None, threads)
    return AlignmentModel(table, direction, None, history)


def train_diag(
    bitext: Bitext,
    iterations: int = 5,
    params: DiagonalParams = DiagonalParams(),
    direction: Direction = Direction.SRC_TO_TGT,
    threads: int | None = None,
) -> AlignmentModel:
    """EM with a diagonal alignment prior held fixed at ``params``."""
    table, history = _em(_directed_corpus(bitext, direction), iterations, params, threads)
    return AlignmentModel(table, direction, params, history)


def viterbi_align(model: AlignmentModel, pair: SentencePair) -> Alignment:
    """Link every generated word to its best conditioning word.

    Words whose best option is NULL (including words never seen in
    training) get no link.  Ties go to the lowest source index, and NULL
    wins ties against real words.
    """
    es, fs = model.direction.split(pair)
    prior = model.prior(len(es), len(fs))
    table = model.table
    null_row = table.row(NULL)
    rows = [table.row(e) for e in es]
    links = set()
    for j, f in enumerate(fs):
        pj = prior[j]
        best = pj[0] * null_row.get(f, 0.0)
        best_i = -1
        for i, row in enumerate(rows):
            score = pj[i + 1] * row.get(f, 0.0)
            if score > best:
                best, best_i = score, i
        if best_i >= 0:
            links.add((best_i, j) if model.direction is Direction.SRC_TO_TGT else (j, best_i))
    return Alignment(frozenset(links), len(pair.src_tokens), len(pair.tgt_tokens))


_NEIGHBOURS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def symmetrize(fwd: Alignment, bwd: Alignment, heuristic: str = "grow-diag") -> Alignment:
    """Combine two alignments of the same pair, both in (src, tgt) orientation.

    ``grow-diag`` starts from the intersection and repeatedly adds union
    links that touch (8-neighbourhood) an accepted link until nothing
    changes, scanning accepted links in lexicographic order.
    """
    if (fwd.src_len, fwd.tgt_len) != (bwd.src_len, bwd.tgt_len):
        raise AlignmentError(
            f"alignments cover different shapes: {fwd.src_len}x{fwd.tgt_len} vs {bwd.src_len}x{bwd.tgt_len}"
        )
    if heuristic == "intersection":
        links = fwd.links & bwd.links
    elif heuristic == "union":
        links = fwd.links | bwd.links
    elif heuristic == "grow-diag":
        union = fwd.links | bwd.links
        grown = set(fwd.links & bwd.links)
        changed = True
        while changed:
            changed = False
            for i, j in sorted(grown):
                for di, dj in _NEIGHBOURS:
                    cand = (i + di, j + dj)
                    if cand in union and cand not in grown:
                        grown.add(cand)
                        changed = True
        links = frozenset(grown)
    else:
        raise ValueError(f"unknown symmetrization heuristic {heuristic!r}")
    return Alignment(frozenset(links), fwd.src_len, fwd.tgt_len)


def coverage(pair: SentencePair, alignment: Alignment, direction: Direction = Direction.SRC_TO_TGT) -> float:
    """Fraction of conditioning-side words that carry at least one link."""
    if direction is Direction.SRC_TO_TGT:
        return len({i for i, _ in alignment.links}) / len(pair.src_tokens)
    return len({j for _, j in alignment.links}) / len(pair.tgt_tokens)


def align_corpus(
    bitext: Bitext,
    model: AlignmentModel,
    reverse_model: AlignmentModel | None = None,
    heuristic: str | None = None,
) -> dict[int, Alignment]:
    """Viterbi-align every pair; symmetrize with ``reverse_model`` when a heuristic is given."""
    if heuristic is not None and reverse_model is None:
        raise ValueError("symmetrization needs a model for the reverse direction")
    out = {}
    for pair in bitext:
        links = viterbi_align(model, pair)
        if heuristic is not None:
            links = symmetrize(links, viterbi_align(reverse_model, pair), heuristic)
        out[pair.id] = links
    return out


def write_alignments(path, alignments: Mapping[int, Alignment]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_alignments(alignments))


def format_alignments(alignments: Mapping[int, Alignment]) -> str:
    return "".join(f"{pid}\t{alignments[pid].to_pharaoh()}\n" for pid in sorted(alignments))


def read_alignments(lines: Iterable[str], bitext: Bitext) -> dict[int, Alignment]:
    """Parse ``id<TAB>i-j ...`` lines against the pairs they refer to."""
    out = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        pid_text, sep, rest = line.partition("\t")
        if not sep:
            raise AlignmentError(f"line {lineno}: missing tab")
        pid = int(pid_text)
        if not 0 <= pid < len(bitext):
            raise AlignmentError(f"line {lineno}: unknown pair id {pid}")
        pair = bitext[pid]
        out[pid] = Alignment.from_pharaoh(rest, len(pair.src_tokens), len(pair.tgt_tokens))
    return out
