"""Divergence scores and the replacement conditions evaluated on their deltas.

Scores are "higher = more semantically equivalent".  Three backends produce
them: a precomputed TSV, a long-lived child process speaking line-delimited
JSON, and an alignment-based surrogate that needs no external model.
"""

from __future__ import annotations

import enum
import json
import math
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

from .aligner import NULL, AlignmentModel, DiagonalParams, Direction, TranslationTable, train_diag
from .corpus import Bitext, SentencePair
from .errors import FormatError, ScoringError

DEFAULT_MARGIN = 5.0


class Variant(str, enum.Enum):
    ORIGINAL = "original"
    FORWARD = "forward"
    BACKWARD = "backward"


def check_score(value: float, where: str = "") -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ScoringError(f"non-finite score {value!r}{' for ' + where if where else ''}")
    return value


@dataclass(frozen=True)
class ScoreRequest:
    pair_id: int
    variant: Variant
    src: tuple[str, ...]
    tgt: tuple[str, ...]

    @property
    def key(self) -> tuple[int, Variant]:
        return self.pair_id, self.variant


class ScorerBackend:
    """Interface shared by all backends.  ``score_batch`` may be overridden to batch work."""

    def score(self, pair_id: int, variant: Variant | str, src: Sequence[str], tgt: Sequence[str]) -> float:
        req = ScoreRequest(pair_id, Variant(variant), tuple(src), tuple(tgt))
        return self.score_batch([req])[0]

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]:
        return [self._score_one(r) for r in requests]

    def _score_one(self, request: ScoreRequest) -> float:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class PrecomputedScorer(ScorerBackend):
    """Lookup in a ``pair_id<TAB>variant<TAB>score`` table."""

    def __init__(self, scores: dict[tuple[int, Variant], float]) -> None:
        self.scores = dict(scores)

    @classmethod
    def from_file(cls, path) -> PrecomputedScorer:
        scores: dict[tuple[int, Variant], float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise FormatError(path, lineno, "expected pair_id<TAB>variant<TAB>score")
                try:
                    key = (int(parts[0]), Variant(parts[1]))
                    value = float(parts[2])
                except ValueError as exc:
                    raise FormatError(path, lineno, str(exc)) from None
                if not math.isfinite(value):
                    raise FormatError(path, lineno, f"non-finite score {parts[2]!r}")
                scores[key] = value
        return cls(scores)

    def _score_one(self, request: ScoreRequest) -> float:
        try:
            return self.scores[request.key]
        except KeyError:
            raise ScoringError(f"missing score {request.pair_id}/{request.variant.value}") from None


class SubprocessScorer(ScorerBackend):
    """Scores from a child process.

    The child reads ``{"id", "src", "tgt"}`` JSON lines on stdin and answers
    with ``{"id", "score"}`` lines in any order; closing stdin ends it.
    Results are cached per (pair id, variant) for the lifetime of the
    backend, so each key reaches the child at most once.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = 60.0) -> None:
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.cache: dict[tuple[int, Variant], float] = {}
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()

    def _start(self) -> subprocess.Popen:
        if self._proc is None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                    bufsize=1,
                )
            except OSError as exc:
                raise ScoringError(f"cannot start scorer {self.command!r}: {exc}") from exc
            threading.Thread(target=self._pump, args=(self._proc.stdout,), daemon=True).start()
        return self._proc

    def _pump(self, stream) -> None:
        for line in stream:
            self._lines.put(line)
        self._lines.put(None)

    @staticmethod
    def _wire_id(req: ScoreRequest) -> str:
        return f"{req.pair_id}/{req.variant.value}"

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]:
        with self._lock:
            pending = {}
            for req in requests:
                if req.key not in self.cache:
                    pending.setdefault(self._wire_id(req), req)
            if pending:
                self._exchange(pending)
            return [self.cache[r.key] for r in requests]

    def _exchange(self, pending: dict[str, ScoreRequest]) -> None:
        proc = self._start()
        payload = "".join(
            json.dumps({"id": wid, "src": " ".join(r.src), "tgt": " ".join(r.tgt)}, ensure_ascii=False) + "\n"
            for wid, r in pending.items()
        )
        writer = threading.Thread(target=self._write, args=(proc, payload), daemon=True)
        writer.start()
        remaining = dict(pending)
        while remaining:
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise ScoringError(f"scorer timed out after {self.timeout}s with {len(remaining)} pending") from None
            if line is None:
                raise ScoringError(f"scorer exited (status {proc.poll()}) with {len(remaining)} pending")
            try:
                reply = json.loads(line)
                wid = str(reply["id"])
                value = reply["score"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ScoringError(f"malformed scorer reply {line.strip()!r}: {exc}") from None
            req = remaining.pop(wid, None)
            if req is None:
                raise ScoringError(f"scorer replied with unexpected id {wid!r}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ScoringError(f"non-numeric score for {wid}: {value!r}")
            self.cache[req.key] = check_score(value, wid)
        writer.join()

    @staticmethod
    def _write(proc: subprocess.Popen, payload: str) -> None:
        try:
            proc.stdin.write(payload)
            proc.stdin.flush()
        except (BrokenPipeError, OSError):
            pass

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None


def _directional_coverage(gen: Sequence[str], cond: Sequence[str], table: TranslationTable) -> float:
    threshold = 1.0 / (len(cond) + 1)
    rows = [table.row(NULL), *(table.row(x) for x in cond)]
    aligned = sum(1 for y in gen if max(row.get(y, 0.0) for row in rows) > threshold)
    return aligned / len(gen)


def surrogate_score(
    src: Sequence[str],
    tgt: Sequence[str],
    table_fwd: TranslationTable,
    table_bwd: TranslationTable,
) -> float:
    """Alignment-based equivalence score in [0, 100].

    ``table_fwd`` holds t(tgt word | src word) and ``table_bwd`` t(src | tgt).
    A word counts as covered when some word of the other side, or NULL,
    generates it with probability above 1/(len+1); words never seen in
    training have no mass anywhere and stay uncovered.
    The score is 100 times the geometric mean of both coverages.
    """
    if not src or not tgt:
        raise ScoringError("surrogate score needs non-empty sentences")
    cov_f = _directional_coverage(tgt, src, table_fwd)
    cov_b = _directional_coverage(src, tgt, table_bwd)
    return 100.0 * math.sqrt(cov_f * cov_b)


class SurrogateScorer(ScorerBackend):
    def __init__(self, table_fwd: TranslationTable, table_bwd: TranslationTable) -> None:
        self.table_fwd = table_fwd
        self.table_bwd = table_bwd

    @classmethod
    def from_models(cls, fwd: AlignmentModel, bwd: AlignmentModel) -> SurrogateScorer:
        return cls(fwd.table, bwd.table)

    @classmethod
    def train(
        cls,
        bitext: Bitext,
        iterations: int = 10,
        params: DiagonalParams = DiagonalParams(),
        threads: int | None = None,
    ) -> SurrogateScorer:
        fwd = train_diag(bitext, iterations, params, Direction.SRC_TO_TGT, threads)
        bwd = train_diag(bitext, iterations, params, Direction.TGT_TO_SRC, threads)
        return cls.from_models(fwd, bwd)

    def _score_one(self, request: ScoreRequest) -> float:
        return surrogate_score(request.src, request.tgt, self.table_fwd, self.table_bwd)


@dataclass(frozen=True)
class ScoreDelta:
    """Original and candidate scores of one pair; a missing candidate has score None."""

    score_orig: float
    score_f: float | None = None
    score_b: float | None = None

    @property
    def d_f(self) -> float | None:
        return None if self.score_f is None else self.score_f - self.score_orig

    @property
    def d_b(self) -> float | None:
        return None if self.score_b is None else self.score_b - self.score_orig


def delta_requests(
    pair: SentencePair,
    fwd_candidate: Sequence[str] | None,
    bwd_candidate: Sequence[str] | None,
) -> list[ScoreRequest]:
    reqs = [ScoreRequest(pair.id, Variant.ORIGINAL, pair.src_tokens, pair.tgt_tokens)]
    if fwd_candidate is not None:
        reqs.append(ScoreRequest(pair.id, Variant.FORWARD, pair.src_tokens, tuple(fwd_candidate)))
    if bwd_candidate is not None:
        reqs.append(ScoreRequest(pair.id, Variant.BACKWARD, tuple(bwd_candidate), pair.tgt_tokens))
    return reqs


def deltas(
    backend: ScorerBackend,
    pair: SentencePair,
    fwd_candidate: Sequence[str] | None,
    bwd_candidate: Sequence[str] | None,
) -> ScoreDelta:
    """Score (S, T), (S, forward(S)) and (backward(T), T) for the candidates present."""
    reqs = delta_requests(pair, fwd_candidate, bwd_candidate)
    values = {r.variant: check_score(v, f"{r.pair_id}/{r.variant.value}") for r, v in zip(reqs, backend.score_batch(reqs))}
    return ScoreDelta(values[Variant.ORIGINAL], values.get(Variant.FORWARD), values.get(Variant.BACKWARD))


class ConditionKind(str, enum.Enum):
    MARGIN = "margin"
    RANKING = "ranking"
    THRESHOLDING = "thresholding"


@dataclass(frozen=True)
class Condition:
    kind: ConditionKind = ConditionKind.MARGIN
    margin: float = DEFAULT_MARGIN
    threshold: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ConditionKind(self.kind))
        if self.kind is ConditionKind.RANKING:
            object.__setattr__(self, "margin", 0.0)
        if self.kind is ConditionKind.THRESHOLDING and self.threshold is None:
            raise ValueError("thresholding condition needs a threshold")

    @classmethod
    def ranking(cls) -> Condition:
        return cls(ConditionKind.RANKING, 0.0)


def passes(cond: Condition, d: float, candidate_score: float) -> bool:
    """Strict-inequality acceptance test for one candidate."""
    if cond.kind is ConditionKind.THRESHOLDING:
        return d > cond.margin and candidate_score > cond.threshold
    return d > cond.margin


class DeltaBin(str, enum.Enum):
    NEGATIVE = "d<0"
    SMALL_POSITIVE = "0<=d<=5"
    LARGE_EQUIVALENCE = "d>5"


def delta_bin(d: float, boundary: float = DEFAULT_MARGIN) -> DeltaBin:
    if d < 0:
        return DeltaBin.NEGATIVE
    if d <= boundary:
        return DeltaBin.SMALL_POSITIVE
    return DeltaBin.LARGE_EQUIVALENCE


def make_backend(
    scores_path=None,
    scorer_cmd: str | None = None,
    surrogate_bitext: Bitext | None = None,
    iterations: int = 10,
    params: DiagonalParams = DiagonalParams(),
    timeout: float = 60.0,
) -> ScorerBackend:
    chosen = [x is not None for x in (scores_path, scorer_cmd, surrogate_bitext)]
    if sum(chosen) != 1:
        raise ValueError("exactly one score source is required: precomputed, subprocess or surrogate")
    if scores_path is not None:
        return PrecomputedScorer.from_file(scores_path)
    if scorer_cmd is not None:
        return SubprocessScorer(scorer_cmd, timeout)
    return SurrogateScorer.train(surrogate_bitext, iterations, params)


def iter_delta_bins(ds: Iterable[ScoreDelta]) -> Iterable[tuple[str, DeltaBin]]:
    for d in ds:
        if d.d_f is not None:
            yield "forward", delta_bin(d.d_f)
        if d.d_b is not None:
            yield "backward", delta_bin(d.d_b)
