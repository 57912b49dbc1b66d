"""Brute-force recount of lexicon-induction metrics, written without the package's helpers."""

import math


def recount(lexicon_pairs, gold, vocab_counts):
    """lexicon_pairs: {src: tgt}; gold: {src: set}; vocab_counts: {src: count}."""
    possible = [w for w in gold if vocab_counts.get(w, 0) > 0]
    attempted = [w for w in possible if w in lexicon_pairs]
    correct = [w for w in attempted if lexicon_pairs[w] in gold[w]]
    pct = lambda a, b: None if b == 0 else 100.0 * a / b
    precision = pct(len(correct), len(attempted))
    recall = pct(len(correct), len(possible))
    f1 = None
    if precision is not None and recall is not None:
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    bins = {"low": (1, 5), "medium": (5, 100), "high": (100, math.inf)}
    by_bin = {}
    for name, (lo, hi) in bins.items():
        att = [w for w in attempted if lo <= vocab_counts[w] < hi]
        cor = [w for w in att if w in correct]
        by_bin[name] = (pct(len(cor), len(att)), len(att))
    oov = pct(len(gold) - len(possible), len(gold))
    return {"precision": precision, "recall": recall, "f1": f1, "oov_rate": oov, "by_bin": by_bin}


def brute_induce(links, min_count, min_prob):
    """links: list of (src word, tgt word), one per alignment link."""
    lexicon = {}
    for s in sorted({s for s, _ in links}):
        targets = [t for s2, t in links if s2 == s]
        counts = {t: targets.count(t) for t in set(targets)}
        best = min(counts, key=lambda t: (-counts[t], t))
        if counts[best] >= min_count and counts[best] / len(targets) >= min_prob:
            lexicon[s] = best
    return lexicon
