"""Bilingual lexicon induction from alignment link counts, and its evaluation."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from .aligner import Alignment, DiagonalParams, Direction, align_corpus, train_diag
from .corpus import Bitext, FrequencyBin, Vocabulary, frequency_bin, normalize
from .errors import AlignmentError, FormatError


@dataclass
class PairCounts:
    count: Counter[tuple[str, str]] = field(default_factory=Counter)
    src_marginal: Counter[str] = field(default_factory=Counter)
    tgt_marginal: Counter[str] = field(default_factory=Counter)

    def __add__(self, other: PairCounts) -> PairCounts:
        return PairCounts(
            self.count + other.count,
            self.src_marginal + other.src_marginal,
            self.tgt_marginal + other.tgt_marginal,
        )


def collect_pair_stats(bitext: Bitext, alignments: Mapping[int, Alignment]) -> PairCounts:
    """Count how often each (source word, target word) is linked."""
    stats = PairCounts()
    for pid in sorted(alignments):
        if not 0 <= pid < len(bitext):
            raise AlignmentError(f"alignment for unknown pair id {pid}")
        pair = bitext[pid]
        src, tgt = pair.src_tokens, pair.tgt_tokens
        for i, j in sorted(alignments[pid].links):
            if not (0 <= i < len(src) and 0 <= j < len(tgt)):
                raise AlignmentError(f"pair {pid}: link {i}-{j} out of bounds")
            stats.count[src[i], tgt[j]] += 1
            stats.src_marginal[src[i]] += 1
            stats.tgt_marginal[tgt[j]] += 1
    return stats


@dataclass(frozen=True)
class LexiconEntry:
    target: str
    count: int
    prob: float


@dataclass
class InducedLexicon:
    entries: dict[str, LexiconEntry] = field(default_factory=dict)

    def __contains__(self, src: object) -> bool:
        return src in self.entries

    def __getitem__(self, src: str) -> str:
        return self.entries[src].target

    def __len__(self) -> int:
        return len(self.entries)

    def to_tsv(self) -> str:
        return "".join(
            f"{src}\t{e.target}\t{e.count}\t{e.prob:.6f}\n" for src, e in sorted(self.entries.items())
        )


def induce_lexicon(counts: PairCounts, min_count: int = 2, min_prob: float = 0.1) -> InducedLexicon:
    """Keep each source word's most-linked target if it clears both thresholds.

    Ties between targets go to the lexicographically smallest one.
    """
    best: dict[str, tuple[str, int]] = {}
    for (e, f), c in counts.count.items():
        cur = best.get(e)
        if cur is None or c > cur[1] or (c == cur[1] and f < cur[0]):
            best[e] = (f, c)
    lexicon = InducedLexicon()
    for e in sorted(best):
        f, c = best[e]
        prob = c / counts.src_marginal[e]
        if c >= min_count and prob >= min_prob:
            lexicon.entries[e] = LexiconEntry(f, c, prob)
    return lexicon


def align_for_lexicon(
    bitext: Bitext,
    iterations: int = 10,
    params: DiagonalParams = DiagonalParams(),
    heuristic: str = "grow-diag",
    threads: int | None = None,
) -> dict[int, Alignment]:
    """Train both directions on ``bitext`` and return symmetrized links for every pair."""
    fwd = train_diag(bitext, iterations, params, Direction.SRC_TO_TGT, threads)
    bwd = train_diag(bitext, iterations, params, Direction.TGT_TO_SRC, threads)
    return align_corpus(bitext, fwd, bwd, heuristic)


@dataclass
class GoldDictionary:
    entries: dict[str, set[str]]

    def __len__(self) -> int:
        return len(self.entries)


def load_gold(path, lowercase: bool = True) -> GoldDictionary:
    """Read a MUSE-style ``src tgt`` dictionary (tab or space separated)."""
    entries: dict[str, set[str]] = defaultdict(set)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError(path, lineno, f"expected 'src tgt', got {len(parts)} field(s)")
            src, tgt = (normalize(w, lowercase) for w in parts)
            entries[src].add(tgt)
    if not entries:
        raise FormatError(path, 0, "gold dictionary is empty")
    return GoldDictionary(dict(entries))


@dataclass
class BliReport:
    """Percentages; None wherever the denominator is empty."""

    precision: float | None
    recall: float | None
    f1: float | None
    oov_rate: float | None
    precision_by_bin: dict[FrequencyBin, float | None]
    attempted: int = 0
    correct: int = 0
    in_vocab: int = 0
    attempted_by_bin: dict[FrequencyBin, int] = field(default_factory=dict)
    correct_by_bin: dict[FrequencyBin, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "oov_rate": self.oov_rate,
            "precision_by_bin": {b.interval: v for b, v in self.precision_by_bin.items()},
            "attempted": self.attempted,
            "correct": self.correct,
            "in_vocab": self.in_vocab,
            "attempted_by_bin": {b.interval: v for b, v in self.attempted_by_bin.items()},
            "correct_by_bin": {b.interval: v for b, v in self.correct_by_bin.items()},
        }


def _pct(num: int, den: int) -> float | None:
    return 100.0 * num / den if den else None


def evaluate(lexicon: InducedLexicon, gold: GoldDictionary, src_vocab: Vocabulary) -> BliReport:
    in_vocab = [e for e in gold.entries if e in src_vocab]
    attempted = [e for e in in_vocab if e in lexicon]
    correct = [e for e in attempted if lexicon[e] in gold.entries[e]]

    precision = _pct(len(correct), len(attempted))
    recall = _pct(len(correct), len(in_vocab))
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)

    attempted_by_bin = Counter(frequency_bin(src_vocab[e]) for e in attempted)
    correct_by_bin = Counter(frequency_bin(src_vocab[e]) for e in correct)
    return BliReport(
        precision=precision,
        recall=recall,
        f1=f1,
        oov_rate=_pct(len(gold.entries) - len(in_vocab), len(gold.entries)),
        precision_by_bin={b: _pct(correct_by_bin[b], attempted_by_bin[b]) for b in FrequencyBin},
        attempted=len(attempted),
        correct=len(correct),
        in_vocab=len(in_vocab),
        attempted_by_bin={b: attempted_by_bin[b] for b in FrequencyBin},
        correct_by_bin={b: correct_by_bin[b] for b in FrequencyBin},
    )


def _fmt(v: float | None) -> str:
    return "-" if v is None else f"{v:.2f}"


def report_markdown(reports: Mapping[str, BliReport]) -> str:
    """One row per bitext, in the column layout of a lexicon-induction results table."""
    bins = list(FrequencyBin)
    lines = [
        "| Bitext | Precision | Recall | F1 | OOV rate | " + " | ".join(b.interval for b in bins) + " |",
        "|---|" + "---:|" * (4 + len(bins)),
    ]
    for name, r in reports.items():
        cells = [_fmt(r.precision), _fmt(r.recall), _fmt(r.f1), _fmt(r.oov_rate)]
        cells += [_fmt(r.precision_by_bin[b]) for b in bins]
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
