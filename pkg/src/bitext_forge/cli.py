"""``bitext-forge`` command line: revise, analyze, bli, fetch-candidates.

Settings come from dataclass defaults, then an optional flat JSON file given
with ``--config``, then command-line flags (same names, dashes for
underscores).  Every output file is written to a temporary sibling and
renamed into place only once the whole command has succeeded.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import os
import sys
import tempfile
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .aligner import DiagonalParams, format_alignments
from .bli import align_for_lexicon, collect_pair_stats, evaluate, induce_lexicon, load_gold, report_markdown
from .corpus import Bitext, load_bitext, vocabulary
from .errors import BitextForgeError, ConfigError
from .metrics import corpus_stats, led_histogram, stats_markdown
from .revise import (
    CandidateSet,
    RevisionRecord,
    Strategy,
    StrategyKind,
    all_records,
    load_candidates,
    load_model_scores,
    rejuvenate,
    replacement_stats,
    revise,
    revise_all,
    write_candidates,
)
from .scorer import Condition, ConditionKind, make_backend

logger = logging.getLogger("bitext_forge")


@dataclass
class PipelineConfig:
    # inputs and outputs
    bitext: str | None = None
    candidates: str | None = None
    scores: str | None = None
    scorer_cmd: str | None = None
    surrogate: bool = False
    model_scores: str | None = None
    original: str | None = None
    revised: str | None = None
    pronouns: str | None = None
    gold: str | None = None
    records: str | None = None
    out: str | None = None
    stats: str | None = None
    out_dir: str | None = None
    # selective replacement
    condition: str = "margin"
    margin: float = 5.0
    threshold: float | None = None
    strategy: str = "both"
    fraction: float | None = None
    skip_identical: bool = True
    scorer_timeout: float = 60.0
    # aligner
    iterations: int = 10
    tension: float = 4.0
    p_null: float = 0.08
    symmetrization: str = "grow-diag"
    coverage_symmetrization: str | None = None
    # text handling
    lowercase: bool = True
    led_multiset: bool = False
    src_lang: str = "src"
    tgt_lang: str = "tgt"
    # lexicon induction
    min_count: int = 2
    min_prob: float = 0.1
    # MT client
    endpoint: str | None = None
    direction: str = "forward"
    batch_size: int = 64
    retries: int = 3

    @classmethod
    def from_sources(cls, config_path: str | None, overrides: dict) -> PipelineConfig:
        values: dict = {}
        if config_path:
            try:
                with open(config_path, encoding="utf-8") as fh:
                    loaded = json.load(fh)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read config {config_path}: {exc}") from None
            if not isinstance(loaded, dict):
                raise ConfigError("config file must hold a flat JSON object")
            values.update(loaded)
        values.update(overrides)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**values)

    @property
    def diag_params(self) -> DiagonalParams:
        try:
            return DiagonalParams(self.tension, self.p_null)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def condition_obj(self) -> Condition:
        try:
            return Condition(ConditionKind(self.condition), self.margin, self.threshold)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def strategy_obj(self) -> Strategy:
        try:
            kind = StrategyKind(self.strategy)
            fraction = self.fraction if kind is StrategyKind.REJUVENATION else None
            return Strategy(kind, fraction)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) in (None, ""):
                raise ConfigError(f"--{name.replace('_', '-')} is required")

    def require_files(self, *names: str) -> None:
        for name in names:
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"--{name.replace('_', '-')}: no such file: {path}")

    def validate_revise(self) -> None:
        self.require("bitext", "candidates", "out", "records")
        strategy = self.strategy_obj()
        if self.iterations < 1:
            raise ConfigError("--iterations must be >= 1")
        self.diag_params
        if strategy.kind is StrategyKind.REJUVENATION:
            self.require("model_scores")
        elif strategy.kind not in (StrategyKind.FORWARD_ALL, StrategyKind.BACKWARD_ALL):
            self.condition_obj()
            sources = [self.scores is not None, self.scorer_cmd is not None, bool(self.surrogate)]
            if sum(sources) != 1:
                raise ConfigError("choose exactly one score source: --scores, --scorer-cmd or --surrogate")
        self.require_files("bitext", "candidates", "scores", "model_scores")


@contextlib.contextmanager
def atomic_outputs():
    """Collect (path, text) writes and commit them together at the end."""
    staged: list[tuple[Path, str]] = []

    def stage(path, text: str) -> None:
        staged.append((Path(path), text))

    yield stage
    temps = []
    try:
        for path, text in staged:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            temps.append(tmp)
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for (path, _), tmp in zip(staged, temps):
            os.replace(tmp, path)
    finally:
        for tmp in temps:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _load(config: PipelineConfig, path: str) -> Bitext:
    return load_bitext(path, lowercase=config.lowercase, src_lang=config.src_lang, tgt_lang=config.tgt_lang)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, sort_keys=False) + "\n"


def cmd_revise(config: PipelineConfig) -> int:
    config.validate_revise()
    strategy = config.strategy_obj()
    bitext = _load(config, config.bitext)
    candidates = load_candidates(config.candidates, lowercase=config.lowercase)

    if strategy.kind in (StrategyKind.FORWARD_ALL, StrategyKind.BACKWARD_ALL):
        direction = "forward" if strategy.kind is StrategyKind.FORWARD_ALL else "backward"
        revised = revise_all(bitext, candidates, direction)
        records = all_records(bitext, direction)
    elif strategy.kind is StrategyKind.REJUVENATION:
        scores = load_model_scores(config.model_scores)
        revised, records = rejuvenate(bitext, candidates, scores, strategy.fraction)
    else:
        backend = make_backend(
            scores_path=config.scores,
            scorer_cmd=config.scorer_cmd,
            surrogate_bitext=bitext if config.surrogate else None,
            iterations=config.iterations,
            params=config.diag_params,
            timeout=config.scorer_timeout,
        )
        with backend:
            revised, records = revise(
                bitext, candidates, backend, config.condition_obj(), strategy, config.skip_identical
            )

    stats = replacement_stats(records)
    stats_path = config.stats or str(Path(config.out).with_suffix(".stats.json"))
    with atomic_outputs() as stage:
        stage(config.out, revised.to_tsv())
        stage(config.records, "".join(r.to_json() + "\n" for r in records))
        stage(stats_path, _json(stats.to_dict()))
    logger.info("revised %d pairs: %.2f%% replaced", stats.total, stats.replaced_pct)
    return 0


def _led_section(original: Bitext, revised: Bitext, candidates: dict[int, CandidateSet], multiset: bool) -> dict:
    fwd_items, bwd_items = [], []
    for orig, rev in zip(original, revised):
        cs = candidates.get(orig.id)
        if cs is None:
            continue
        if cs.forward is not None:
            fwd_items.append((orig.tgt_tokens, cs.forward, rev.tgt_tokens != orig.tgt_tokens))
        if cs.backward is not None:
            bwd_items.append((orig.src_tokens, cs.backward, rev.src_tokens != orig.src_tokens))
    out = {}
    for name, items in (("forward", fwd_items), ("backward", bwd_items)):
        replaced, kept = led_histogram(items, multiset)
        out[name] = {"replaced": replaced.to_dict(), "not_replaced": kept.to_dict()}
    return out


def _led_markdown(section: dict) -> str:
    lines = []
    for direction, hists in section.items():
        bins = hists["replaced"]["bins"]
        lines.append(f"LeD of original vs {direction} candidates")
        lines.append("")
        lines.append("| Population | " + " | ".join(bins) + " |")
        lines.append("|---|" + "---:|" * len(bins))
        for key in ("replaced", "not_replaced"):
            lines.append(f"| {key.replace('_', '-')} | " + " | ".join(str(c) for c in hists[key]["counts"]) + " |")
        lines.append("")
    return "\n".join(lines)


def _bli_report(config: PipelineConfig, bitext: Bitext, gold):
    alignments = align_for_lexicon(bitext, config.iterations, config.diag_params, config.symmetrization)
    lexicon = induce_lexicon(collect_pair_stats(bitext, alignments), config.min_count, config.min_prob)
    return lexicon, alignments, evaluate(lexicon, gold, vocabulary(bitext, "src"))


def cmd_analyze(config: PipelineConfig) -> int:
    config.require("original", "revised", "out_dir")
    config.require_files("original", "revised", "pronouns", "candidates", "records", "gold")
    params = config.diag_params
    pronouns: list[str] = []
    if config.pronouns:
        with open(config.pronouns, encoding="utf-8") as fh:
            pronouns = [w for line in fh for w in line.split()]
        if config.lowercase:
            pronouns = [w.lower() for w in pronouns]
    gold = load_gold(config.gold, config.lowercase) if config.gold else None

    original = _load(config, config.original)
    revised = _load(config, config.revised)
    if not len(original) or not len(revised):
        raise BitextForgeError("analyze needs non-empty original and revised bitexts")
    if len(original) != len(revised):
        raise BitextForgeError(f"original has {len(original)} pairs but revised has {len(revised)}")

    report: dict = {"settings": {
        "iterations": config.iterations, "tension": params.tension, "p_null": params.p_null,
        "coverage_symmetrization": config.coverage_symmetrization, "entropy_unit": "bits",
    }}
    stats = {}
    for name, bitext in (("original", original), ("revised", revised)):
        stats[name] = corpus_stats(
            bitext, config.iterations, params, pronouns, "tgt", config.coverage_symmetrization
        )
    report["corpus_stats"] = {k: v.to_dict() for k, v in stats.items()}
    md = ["# Original vs revised bitext", "", stats_markdown(stats["original"], stats["revised"])]

    if config.records:
        with open(config.records, encoding="utf-8") as fh:
            records = [RevisionRecord.from_json(line) for line in fh if line.strip()]
        rstats = replacement_stats(records)
        report["replacement_stats"] = rstats.to_dict()
        md += ["## Replacements", "", rstats.to_markdown()]
    if config.candidates:
        section = _led_section(original, revised, load_candidates(config.candidates, config.lowercase),
                               config.led_multiset)
        report["led_histograms"] = section
        md += ["## Lexical differences", "", _led_markdown(section)]
    if gold is not None:
        reports = {name: _bli_report(config, b, gold)[2] for name, b in (("original", original), ("revised", revised))}
        report["bli"] = {k: v.to_dict() for k, v in reports.items()}
        md += ["## Lexicon induction", "", report_markdown(reports)]

    out_dir = Path(config.out_dir)
    with atomic_outputs() as stage:
        stage(out_dir / "run_report.json", _json(report))
        stage(out_dir / "run_report.md", "\n".join(md))
    return 0


def cmd_bli(config: PipelineConfig) -> int:
    config.require("bitext", "gold", "out_dir")
    config.require_files("bitext", "gold")
    if config.min_count < 1 or not 0 <= config.min_prob <= 1:
        raise ConfigError("--min-count must be >= 1 and --min-prob in [0, 1]")
    gold = load_gold(config.gold, config.lowercase)
    bitext = _load(config, config.bitext)
    if not len(bitext):
        raise BitextForgeError("bitext is empty")
    lexicon, alignments, report = _bli_report(config, bitext, gold)
    out_dir = Path(config.out_dir)
    with atomic_outputs() as stage:
        stage(out_dir / "bli_report.json", _json(report.to_dict()))
        stage(out_dir / "bli_report.md", report_markdown({Path(config.bitext).name: report}))
        stage(out_dir / "lexicon.tsv", lexicon.to_tsv())
        stage(out_dir / "alignments.txt", format_alignments(alignments))
    return 0


def _post_json(url: str, payload: dict, timeout: float = 60.0) -> dict:
    req = urllib.request.Request(
        url,
        data=json.dumps(payload, ensure_ascii=False).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


def fetch_candidates(
    endpoint: str,
    bitext: Bitext,
    direction: str,
    batch_size: int = 64,
    retries: int = 3,
    backoff: float = 0.5,
    post: Callable[[str, dict], dict] = _post_json,
    sleep: Callable[[float], None] = time.sleep,
) -> dict[int, CandidateSet]:
    """Translate one side of ``bitext`` through an HTTP MT service.

    Each batch is POSTed as ``{"src_lang", "tgt_lang", "texts"}`` and must
    come back as ``{"translations"}`` of the same length.  Transport errors
    are retried ``retries`` times with exponential backoff.
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    if direction == "forward":
        src_lang, tgt_lang, texts = bitext.src_lang, bitext.tgt_lang, [p.src_raw for p in bitext]
    else:
        src_lang, tgt_lang, texts = bitext.tgt_lang, bitext.src_lang, [p.tgt_raw for p in bitext]

    out: dict[int, CandidateSet] = {}
    for start in range(0, len(texts), batch_size):
        batch = texts[start:start + batch_size]
        label = f"pairs {start}-{start + len(batch) - 1}"
        payload = {"src_lang": src_lang, "tgt_lang": tgt_lang, "texts": batch}
        for attempt in range(retries + 1):
            try:
                reply = post(endpoint, payload)
                break
            except (OSError, urllib.error.URLError, ValueError) as exc:
                if attempt == retries:
                    raise BitextForgeError(f"MT request for {label} failed after {retries + 1} attempts: {exc}") from exc
                logger.warning("MT request for %s failed (%s); retrying", label, exc)
                sleep(backoff * 2 ** attempt)
        translations = reply.get("translations") if isinstance(reply, dict) else None
        if not isinstance(translations, list) or len(translations) != len(batch):
            got = len(translations) if isinstance(translations, list) else "no"
            raise BitextForgeError(f"MT response for {label} has {got} translations, expected {len(batch)}")
        for offset, text in enumerate(translations):
            pid = start + offset
            clean = " ".join(str(text).split())
            out[pid] = CandidateSet.from_raw(pid, **{direction: clean})
    return out


def cmd_fetch_candidates(config: PipelineConfig) -> int:
    config.require("bitext", "endpoint", "out")
    config.require_files("bitext")
    if config.direction not in ("forward", "backward"):
        raise ConfigError("--direction must be forward or backward")
    bitext = _load(config, config.bitext)
    candidates = fetch_candidates(config.endpoint, bitext, config.direction, config.batch_size, config.retries)
    with atomic_outputs() as stage:
        stage(config.out, write_candidates(candidates))
    return 0


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=None, help="flat JSON file with default settings")
    p.add_argument("--lowercase", type=_bool, default=S)
    p.add_argument("--src-lang", default=S)
    p.add_argument("--tgt-lang", default=S)
    p.add_argument("--iterations", type=int, default=S, help="EM iterations per aligner")
    p.add_argument("--tension", type=float, default=S, help="diagonal prior strength (lambda)")
    p.add_argument("--p-null", type=float, default=S)
    p.add_argument("--symmetrization", choices=["intersection", "union", "grow-diag"], default=S)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="bitext-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("revise", help="selectively replace pairs by synthetic candidates")
    _add_common(p)
    p.add_argument("--bitext", default=S)
    p.add_argument("--candidates", default=S)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scores", default=S, help="precomputed scores TSV")
    src.add_argument("--scorer-cmd", default=S, help="command speaking the JSON-lines scoring protocol")
    src.add_argument("--surrogate", action="store_const", const=True, default=S)
    p.add_argument("--scorer-timeout", type=float, default=S)
    p.add_argument("--condition", choices=[c.value for c in ConditionKind], default=S)
    p.add_argument("--margin", type=float, default=S)
    p.add_argument("--threshold", type=float, default=S)
    p.add_argument("--strategy", choices=[s.value for s in StrategyKind], default=S)
    p.add_argument("--fraction", type=float, default=S)
    p.add_argument("--model-scores", default=S, help="pair_id<TAB>score TSV for rejuvenation")
    p.add_argument("--skip-identical", type=_bool, default=S)
    p.add_argument("--out", default=S)
    p.add_argument("--records", default=S)
    p.add_argument("--stats", default=S)
    p.set_defaults(func=cmd_revise)

    p = sub.add_parser("analyze", help="compare corpus statistics of original and revised bitexts")
    _add_common(p)
    p.add_argument("--original", default=S)
    p.add_argument("--revised", default=S)
    p.add_argument("--pronouns", default=S, help="file of pronouns to count on the target side")
    p.add_argument("--candidates", default=S, help="candidates TSV, enables LeD histograms")
    p.add_argument("--records", default=S, help="records JSONL, enables replacement statistics")
    p.add_argument("--gold", default=S, help="gold dictionary, enables lexicon induction")
    p.add_argument("--coverage-symmetrization", choices=["intersection", "union", "grow-diag"], default=S)
    p.add_argument("--led-multiset", type=_bool, default=S)
    p.add_argument("--min-count", type=int, default=S)
    p.add_argument("--min-prob", type=float, default=S)
    p.add_argument("--out-dir", default=S)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bli", help="induce a lexicon from a bitext and evaluate it")
    _add_common(p)
    p.add_argument("--bitext", default=S)
    p.add_argument("--gold", default=S)
    p.add_argument("--min-count", type=int, default=S)
    p.add_argument("--min-prob", type=float, default=S)
    p.add_argument("--out-dir", default=S)
    p.set_defaults(func=cmd_bli)

    p = sub.add_parser("fetch-candidates", help="translate one side through an MT endpoint")
    _add_common(p)
    p.add_argument("--bitext", default=S)
    p.add_argument("--endpoint", default=S)
    p.add_argument("--direction", choices=["forward", "backward"], default=S)
    p.add_argument("--batch-size", type=int, default=S)
    p.add_argument("--retries", type=int, default=S)
    p.add_argument("--out", default=S)
    p.set_defaults(func=cmd_fetch_candidates)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "func", "config", "verbose")}
    try:
        config = PipelineConfig.from_sources(args.config, overrides)
        return args.func(config)
    except ConfigError as exc:
        print(f"bitext-forge {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except (BitextForgeError, OSError, ValueError) as exc:
        print(f"bitext-forge {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
