"""Selective replacement of bitext pairs by synthetic candidates, plus baselines.

Every strategy preserves the number and order of pairs and emits exactly one
:class:`RevisionRecord` per input pair.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import Bitext, SentencePair, process
from .errors import FormatError, RevisionError
from .scorer import (
    Condition,
    DeltaBin,
    ScoreDelta,
    ScorerBackend,
    Variant,
    check_score,
    delta_bin,
    delta_requests,
    passes,
)


@dataclass(frozen=True)
class CandidateSet:
    pair_id: int
    forward_raw: str | None = None
    backward_raw: str | None = None
    forward: tuple[str, ...] | None = None
    backward: tuple[str, ...] | None = None

    @classmethod
    def from_raw(
        cls,
        pair_id: int,
        forward: str | None = None,
        backward: str | None = None,
        lowercase: bool = True,
    ) -> CandidateSet:
        return cls(
            pair_id,
            forward,
            backward,
            process(forward, lowercase) if forward is not None else None,
            process(backward, lowercase) if backward is not None else None,
        )


def load_candidates(path, lowercase: bool = True) -> dict[int, CandidateSet]:
    """Read ``pair_id<TAB>direction<TAB>text`` lines into one CandidateSet per id."""
    found: dict[int, dict[str, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(path, lineno, "expected pair_id<TAB>direction<TAB>text")
            pid_text, direction, text = parts
            try:
                pid = int(pid_text)
            except ValueError:
                raise FormatError(path, lineno, f"bad pair id {pid_text!r}") from None
            if direction not in ("forward", "backward"):
                raise FormatError(path, lineno, f"direction must be forward or backward, got {direction!r}")
            slot = found.setdefault(pid, {})
            if direction in slot:
                raise FormatError(path, lineno, f"duplicate {direction} candidate for pair {pid}")
            slot[direction] = text
    out = {}
    for pid, slot in sorted(found.items()):
        cs = CandidateSet.from_raw(pid, slot.get("forward"), slot.get("backward"), lowercase)
        # a candidate that tokenizes to nothing cannot be scored or substituted
        if cs.forward == ():
            cs = CandidateSet(pid, None, cs.backward_raw, None, cs.backward)
        if cs.backward == ():
            cs = CandidateSet(pid, cs.forward_raw, None, cs.forward, None)
        out[pid] = cs
    return out


def write_candidates(candidates: Mapping[int, CandidateSet]) -> str:
    lines = []
    for pid in sorted(candidates):
        cs = candidates[pid]
        if cs.forward_raw is not None:
            lines.append(f"{pid}\tforward\t{cs.forward_raw}\n")
        if cs.backward_raw is not None:
            lines.append(f"{pid}\tbackward\t{cs.backward_raw}\n")
    return "".join(lines)


class Decision(str, enum.Enum):
    KEEP = "keep"
    REPLACE_FORWARD = "replace-forward"
    REPLACE_BACKWARD = "replace-backward"


class StrategyKind(str, enum.Enum):
    SELECTIVE_BOTH = "both"
    SELECTIVE_FORWARD_ONLY = "forward"
    SELECTIVE_BACKWARD_ONLY = "backward"
    FORWARD_ALL = "forward-all"
    BACKWARD_ALL = "backward-all"
    REJUVENATION = "rejuvenate"


SELECTIVE = (StrategyKind.SELECTIVE_BOTH, StrategyKind.SELECTIVE_FORWARD_ONLY, StrategyKind.SELECTIVE_BACKWARD_ONLY)


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind = StrategyKind.SELECTIVE_BOTH
    fraction: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.kind is StrategyKind.REJUVENATION:
            if self.fraction is None:
                object.__setattr__(self, "fraction", 0.1)
            if not 0 < self.fraction <= 1:
                raise ValueError(f"rejuvenation fraction must be in (0, 1], got {self.fraction}")
        elif self.fraction is not None:
            raise ValueError(f"fraction only applies to rejuvenation, not {self.kind.value}")

    @property
    def uses_forward(self) -> bool:
        return self.kind in (StrategyKind.SELECTIVE_BOTH, StrategyKind.SELECTIVE_FORWARD_ONLY)

    @property
    def uses_backward(self) -> bool:
        return self.kind in (StrategyKind.SELECTIVE_BOTH, StrategyKind.SELECTIVE_BACKWARD_ONLY)


@dataclass(frozen=True)
class RevisionRecord:
    pair_id: int
    decision: Decision
    strategy: Strategy
    delta: ScoreDelta | None = None
    model_score: float | None = None

    def to_json(self) -> str:
        obj = {
            "id": self.pair_id,
            "decision": self.decision.value,
            "d_f": self.delta.d_f if self.delta else None,
            "d_b": self.delta.d_b if self.delta else None,
            "strategy": self.strategy.kind.value,
        }
        if self.delta is not None:
            obj.update(score_orig=self.delta.score_orig, score_f=self.delta.score_f, score_b=self.delta.score_b)
        if self.strategy.fraction is not None:
            obj["fraction"] = self.strategy.fraction
        if self.model_score is not None:
            obj["model_score"] = self.model_score
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> RevisionRecord:
        obj = json.loads(line)
        delta = None
        if obj.get("score_orig") is not None:
            delta = ScoreDelta(obj["score_orig"], obj.get("score_f"), obj.get("score_b"))
        kind = StrategyKind(obj["strategy"])
        strategy = Strategy(kind, obj.get("fraction") if kind is StrategyKind.REJUVENATION else None)
        return cls(obj["id"], Decision(obj["decision"]), strategy, delta, obj.get("model_score"))


def _apply(pair: SentencePair, decision: Decision, cs: CandidateSet | None) -> SentencePair:
    if decision is Decision.REPLACE_FORWARD:
        return pair.with_target(cs.forward_raw, cs.forward)
    if decision is Decision.REPLACE_BACKWARD:
        return pair.with_source(cs.backward_raw, cs.backward)
    return pair


def _check_ids(bitext: Bitext, ids: Iterable[int], what: str) -> None:
    unknown = sorted(pid for pid in ids if not 0 <= pid < len(bitext))
    if unknown:
        raise RevisionError(f"{what} refer to unknown pair id(s): {unknown[:10]}")


def revise(
    bitext: Bitext,
    candidates: Mapping[int, CandidateSet],
    backend: ScorerBackend,
    cond: Condition,
    strategy: Strategy = Strategy(),
    skip_identical: bool = True,
) -> tuple[Bitext, list[RevisionRecord]]:
    """Replace a pair by its best candidate only when the candidate passes ``cond``.

    Among passing candidates the one with the higher absolute score wins, the
    forward candidate on a tie.  With ``skip_identical`` a candidate that is
    token-identical to the side it would replace never counts as passing.
    """
    if strategy.kind not in SELECTIVE:
        raise ValueError(f"revise handles selective strategies only, got {strategy.kind.value}")
    _check_ids(bitext, candidates, "candidates")

    chosen: dict[int, tuple[tuple[str, ...] | None, tuple[str, ...] | None]] = {}
    requests = []
    for pair in bitext:
        cs = candidates.get(pair.id)
        fwd = cs.forward if cs is not None and strategy.uses_forward else None
        bwd = cs.backward if cs is not None and strategy.uses_backward else None
        if fwd is None and bwd is None:
            continue
        chosen[pair.id] = (fwd, bwd)
        requests.extend(delta_requests(pair, fwd, bwd))

    # one batched call so subprocess scorers see the whole workload at once
    values = {r.key: check_score(v, f"{r.pair_id}/{r.variant.value}") for r, v in zip(requests, backend.score_batch(requests))}

    pairs, records = [], []
    for pair in bitext:
        if pair.id not in chosen:
            pairs.append(pair)
            records.append(RevisionRecord(pair.id, Decision.KEEP, strategy))
            continue
        fwd, bwd = chosen[pair.id]
        delta = ScoreDelta(
            values[(pair.id, Variant.ORIGINAL)],
            values.get((pair.id, Variant.FORWARD)) if fwd is not None else None,
            values.get((pair.id, Variant.BACKWARD)) if bwd is not None else None,
        )
        decision = Decision.KEEP
        best = -math.inf
        if delta.d_f is not None and passes(cond, delta.d_f, delta.score_f):
            if not (skip_identical and fwd == pair.tgt_tokens):
                decision, best = Decision.REPLACE_FORWARD, delta.score_f
        if delta.d_b is not None and passes(cond, delta.d_b, delta.score_b):
            if not (skip_identical and bwd == pair.src_tokens) and delta.score_b > best:
                decision = Decision.REPLACE_BACKWARD
        pairs.append(_apply(pair, decision, candidates.get(pair.id)))
        records.append(RevisionRecord(pair.id, decision, strategy, delta))
    return Bitext(tuple(pairs), bitext.src_lang, bitext.tgt_lang), records


def revise_all(bitext: Bitext, candidates: Mapping[int, CandidateSet], direction: str) -> Bitext:
    """Unconditionally swap in the forward (target side) or backward (source side) candidate."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    _check_ids(bitext, candidates, "candidates")
    decision = Decision.REPLACE_FORWARD if direction == "forward" else Decision.REPLACE_BACKWARD
    pairs = []
    for pair in bitext:
        cs = candidates.get(pair.id)
        if cs is None or getattr(cs, direction) is None:
            raise RevisionError(f"missing {direction} candidate for pair {pair.id}")
        pairs.append(_apply(pair, decision, cs))
    return Bitext(tuple(pairs), bitext.src_lang, bitext.tgt_lang)


def all_records(bitext: Bitext, direction: str) -> list[RevisionRecord]:
    kind = StrategyKind.FORWARD_ALL if direction == "forward" else StrategyKind.BACKWARD_ALL
    decision = Decision.REPLACE_FORWARD if direction == "forward" else Decision.REPLACE_BACKWARD
    return [RevisionRecord(p.id, decision, Strategy(kind)) for p in bitext]


def rejuvenate(
    bitext: Bitext,
    candidates: Mapping[int, CandidateSet],
    model_scores: Mapping[int, float],
    fraction: float = 0.1,
) -> tuple[Bitext, list[RevisionRecord]]:
    """Forward-replace the ceil(fraction * N) pairs with the lowest model scores.

    Ties at the cutoff go to the smaller pair id.
    """
    strategy = Strategy(StrategyKind.REJUVENATION, fraction)
    _check_ids(bitext, candidates, "candidates")
    missing = [p.id for p in bitext if p.id not in model_scores]
    if missing:
        raise RevisionError(f"missing model score for pair(s) {missing[:10]}")
    n = len(bitext)
    # float product can land a hair above an integer (0.1 * 30 = 3.0000000000000004)
    k = min(n, math.ceil(round(fraction * n, 9)))
    order = sorted(range(n), key=lambda pid: (model_scores[pid], pid))
    selected = set(order[:k])
    pairs, records = [], []
    for pair in bitext:
        decision = Decision.KEEP
        cs = candidates.get(pair.id)
        if pair.id in selected:
            if cs is None or cs.forward is None:
                raise RevisionError(f"missing forward candidate for selected pair {pair.id}")
            decision = Decision.REPLACE_FORWARD
        pairs.append(_apply(pair, decision, cs))
        records.append(RevisionRecord(pair.id, decision, strategy, model_score=model_scores[pair.id]))
    return Bitext(tuple(pairs), bitext.src_lang, bitext.tgt_lang), records


def load_model_scores(path) -> dict[int, float]:
    scores = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(path, lineno, "expected pair_id<TAB>score")
            try:
                pid, value = int(parts[0]), float(parts[1])
            except ValueError as exc:
                raise FormatError(path, lineno, str(exc)) from None
            if not math.isfinite(value):
                raise FormatError(path, lineno, f"non-finite model score {parts[1]!r}")
            scores[pid] = value
    return scores


@dataclass
class ReplacementStats:
    total: int
    replaced_pct: float
    forward_pct: float
    backward_pct: float
    delta_bins: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "replaced_pct": self.replaced_pct,
            "forward_pct": self.forward_pct,
            "backward_pct": self.backward_pct,
            "delta_bins": self.delta_bins,
        }

    def to_markdown(self) -> str:
        lines = [
            "| Total | Replaced % | Forward % | Backward % |",
            "|---:|---:|---:|---:|",
            f"| {self.total} | {self.replaced_pct:.2f} | {self.forward_pct:.2f} | {self.backward_pct:.2f} |",
            "",
            "| Candidate set | " + " | ".join(b.value for b in DeltaBin) + " |",
            "|---|" + "---:|" * len(DeltaBin),
        ]
        for direction, bins in self.delta_bins.items():
            lines.append(f"| {direction} | " + " | ".join(str(bins.get(b.value, 0)) for b in DeltaBin) + " |")
        return "\n".join(lines) + "\n"


def replacement_stats(records: Sequence[RevisionRecord]) -> ReplacementStats:
    total = len(records)
    decisions = Counter(r.decision for r in records)
    bins = {"forward": Counter(), "backward": Counter()}
    for r in records:
        if r.delta is None:
            continue
        if r.delta.d_f is not None:
            bins["forward"][delta_bin(r.delta.d_f).value] += 1
        if r.delta.d_b is not None:
            bins["backward"][delta_bin(r.delta.d_b).value] += 1

    def pct(count: int) -> float:
        return 100.0 * count / total if total else 0.0

    fwd = decisions[Decision.REPLACE_FORWARD]
    bwd = decisions[Decision.REPLACE_BACKWARD]
    return ReplacementStats(
        total=total,
        replaced_pct=pct(fwd + bwd),
        forward_pct=pct(fwd),
        backward_pct=pct(bwd),
        delta_bins={d: {b.value: c[b.value] for b in DeltaBin} for d, c in bins.items()},
    )
