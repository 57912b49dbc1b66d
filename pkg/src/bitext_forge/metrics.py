"""Sentence- and corpus-level statistics for comparing original and revised bitexts."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .aligner import (
    AlignmentModel,
    DiagonalParams,
    Direction,
    NULL,
    TranslationTable,
    coverage,
    symmetrize,
    train_diag,
    viterbi_align,
)
from .corpus import Bitext, Side, Vocabulary, vocabulary
from .errors import BitextForgeError

LED_BINS = 10


def led(s1: Sequence[str], s2: Sequence[str], multiset: bool = False) -> float:
    """Lexical difference: mean share of each side's tokens missing from the other.

    With ``multiset=False`` tokens are compared as type sets, so repetition
    does not matter; ``multiset=True`` counts surplus occurrences instead.
    """
    if not s1 or not s2:
        raise ValueError("led is undefined for empty token sequences")
    if multiset:
        a, b = Counter(s1), Counter(s2)
        only_a = sum((a - b).values()) / len(s1)
        only_b = sum((b - a).values()) / len(s2)
    else:
        a, b = set(s1), set(s2)
        only_a = len(a - b) / len(a)
        only_b = len(b - a) / len(b)
    return 0.5 * (only_a + only_b)


def entropy_bits(row: dict[str, float]) -> float:
    return -math.fsum(p * math.log2(p) for p in row.values() if p > 0.0)


def corpus_complexity(table: TranslationTable, vocab: Vocabulary | Iterable[str]) -> float:
    """Unweighted mean over source types of H(y | x), in bits.

    Raises:
        BitextForgeError: a vocabulary type has no row in the table, i.e. the
            table was trained on a different corpus or side.
    """
    types = [x for x in vocab if x != NULL]
    if not types:
        return 0.0
    total = []
    for x in types:
        if x not in table:
            raise BitextForgeError(f"type {x!r} missing from the translation table")
        total.append(entropy_bits(table.row(x)))
    # clamp -0.0 and float dust from degenerate rows
    return max(0.0, math.fsum(total) / len(types))


def corpus_coverage(
    bitext: Bitext,
    model: AlignmentModel,
    direction: Direction | None = None,
    reverse_model: AlignmentModel | None = None,
    heuristic: str | None = None,
) -> float:
    """Mean per-pair coverage.

    Alignments are directional by default; pass ``reverse_model`` and a
    ``heuristic`` to measure coverage on symmetrized links instead.
    """
    if not len(bitext):
        raise BitextForgeError("coverage of an empty bitext is undefined")
    direction = direction or model.direction
    values = []
    for pair in bitext:
        links = viterbi_align(model, pair)
        if heuristic is not None:
            if reverse_model is None:
                raise ValueError("symmetrized coverage needs the reverse model")
            links = symmetrize(links, viterbi_align(reverse_model, pair), heuristic)
        values.append(coverage(pair, links, direction))
    return math.fsum(values) / len(values)


def pronoun_counts(bitext: Bitext, side: Side, pronouns: Sequence[str]) -> dict[str, int]:
    if not pronouns:
        raise ValueError("pronoun list must not be empty")
    wanted = set(pronouns)
    counts = Counter(tok for pair in bitext for tok in pair.tokens(side) if tok in wanted)
    return {p: counts[p] for p in pronouns}


@dataclass
class LedHistogram:
    population: str
    counts: list[int] = field(default_factory=lambda: [0] * LED_BINS)

    @staticmethod
    def bin_index(value: float) -> int:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"LeD value {value} outside [0, 1]")
        return min(int(math.floor(value * LED_BINS)), LED_BINS - 1)

    @staticmethod
    def edges() -> list[tuple[float, float]]:
        return [(k / LED_BINS, (k + 1) / LED_BINS) for k in range(LED_BINS)]

    def add(self, value: float) -> None:
        self.counts[self.bin_index(value)] += 1

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_dict(self) -> dict:
        return {
            "population": self.population,
            "bins": [f"[{lo:.1f},{hi:.1f}{']' if hi >= 1.0 else ')'}" for lo, hi in self.edges()],
            "counts": list(self.counts),
        }


def led_histogram(
    pairs: Iterable[tuple[Sequence[str], Sequence[str], bool]],
    multiset: bool = False,
) -> tuple[LedHistogram, LedHistogram]:
    """Histograms of LeD(original, synthetic) for replaced and not-replaced candidates."""
    replaced, kept = LedHistogram("replaced"), LedHistogram("not-replaced")
    for orig, synth, was_replaced in pairs:
        (replaced if was_replaced else kept).add(led(orig, synth, multiset))
    return replaced, kept


def kendall_tau(r1: Sequence[float], r2: Sequence[float]) -> float:
    """Kendall's tau-b between two rankings that may contain ties."""
    n = len(r1)
    if n != len(r2):
        raise ValueError(f"rankings differ in length: {n} vs {len(r2)}")
    if n < 2:
        raise ValueError("kendall_tau needs at least two items")
    concordant = discordant = ties_1 = ties_2 = 0
    for a in range(n):
        for b in range(a + 1, n):
            dx = r1[a] - r1[b]
            dy = r2[a] - r2[b]
            if dx == 0:
                ties_1 += 1
            if dy == 0:
                ties_2 += 1
            if dx == 0 or dy == 0:
                continue
            if (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = (n0 - ties_1) * (n0 - ties_2)
    if denom == 0:
        raise ValueError("kendall_tau undefined: one ranking is entirely tied")
    return (concordant - discordant) / math.sqrt(denom)


@dataclass
class CorpusStats:
    complexity_src_to_tgt: float
    complexity_tgt_to_src: float
    coverage_src_to_tgt: float
    coverage_tgt_to_src: float
    src_types: int
    tgt_types: int
    src_tokens: int
    tgt_tokens: int
    pronoun_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def corpus_stats(
    bitext: Bitext,
    iterations: int = 10,
    params: DiagonalParams = DiagonalParams(),
    pronouns: Sequence[str] = (),
    pronoun_side: Side = "tgt",
    heuristic: str | None = None,
    threads: int | None = None,
) -> CorpusStats:
    """Train aligners in both directions on ``bitext`` and summarize it."""
    fwd = train_diag(bitext, iterations, params, Direction.SRC_TO_TGT, threads)
    bwd = train_diag(bitext, iterations, params, Direction.TGT_TO_SRC, threads)
    src_vocab = vocabulary(bitext, "src")
    tgt_vocab = vocabulary(bitext, "tgt")
    return CorpusStats(
        complexity_src_to_tgt=corpus_complexity(fwd.table, src_vocab),
        complexity_tgt_to_src=corpus_complexity(bwd.table, tgt_vocab),
        coverage_src_to_tgt=corpus_coverage(bitext, fwd, Direction.SRC_TO_TGT, bwd, heuristic),
        coverage_tgt_to_src=corpus_coverage(bitext, bwd, Direction.TGT_TO_SRC, fwd, heuristic),
        src_types=len(src_vocab),
        tgt_types=len(tgt_vocab),
        src_tokens=src_vocab.total,
        tgt_tokens=tgt_vocab.total,
        pronoun_counts=pronoun_counts(bitext, pronoun_side, pronouns) if pronouns else {},
    )


def stats_markdown(before: CorpusStats, after: CorpusStats) -> str:
    """Original-vs-revised statistics as a markdown table."""
    rows = [
        ("Source types", before.src_types, after.src_types),
        ("Target types", before.tgt_types, after.tgt_types),
        ("Source tokens", before.src_tokens, after.src_tokens),
        ("Target tokens", before.tgt_tokens, after.tgt_tokens),
        ("Complexity src->tgt (bits)", before.complexity_src_to_tgt, after.complexity_src_to_tgt),
        ("Complexity tgt->src (bits)", before.complexity_tgt_to_src, after.complexity_tgt_to_src),
        ("Coverage src->tgt", before.coverage_src_to_tgt, after.coverage_src_to_tgt),
        ("Coverage tgt->src", before.coverage_tgt_to_src, after.coverage_tgt_to_src),
    ]
    for p in before.pronoun_counts:
        rows.append((f"Pronoun '{p}'", before.pronoun_counts[p], after.pronoun_counts.get(p, 0)))
    lines = ["| Statistic | Original | Revised |", "|---|---:|---:|"]
    for name, a, b in rows:
        fmt = (lambda v: f"{v:.4f}") if isinstance(a, float) else str
        lines.append(f"| {name} | {fmt(a)} | {fmt(b)} |")
    return "\n".join(lines) + "\n"
