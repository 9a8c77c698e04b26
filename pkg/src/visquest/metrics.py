"""Text similarity metrics for generated questions.

BLEU follows the standard formulation: clipped n-gram precision, geometric
mean over orders, brevity penalty min(1, e^(1-r/c)) with r the closest
reference length (ties break toward the shorter). METEOR here is a lite
variant with exact unigram matches only; the stemming and synonym stages of
the full metric need external linguistic resources and are deliberately out.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .errors import InvalidInputError

_SMOOTH = 1e-9


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(c_len: int, references) -> int:
    # sort key prefers the smaller length on distance ties
    return min((abs(len(r) - c_len), len(r)) for r in references)[1]


def _clipped_counts(candidate, references, n):
    """(clipped matches, total candidate n-grams) for one order."""
    cand = _ngrams(candidate, n)
    total = sum(cand.values())
    if total == 0:
        return 0, 0
    best = Counter()
    for ref in references:
        ref_counts = _ngrams(ref, n)
        for gram, count in ref_counts.items():
            if count > best[gram]:
                best[gram] = count
    matched = sum(min(count, best[gram]) for gram, count in cand.items())
    return matched, total


def _validate_refs(references):
    if not references:
        raise InvalidInputError("need at least one reference")
    for ref in references:
        if len(ref) == 0:
            raise InvalidInputError("references must be nonempty")


def bleu(candidate, references, max_n: int = 4) -> float:
    """Sentence BLEU-max_n of a token list against reference token lists."""
    if not 1 <= max_n <= 4:
        raise InvalidInputError("max_n must be between 1 and 4")
    _validate_refs(references)
    candidate = list(candidate)
    if len(candidate) == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        matched, total = _clipped_counts(candidate, references, n)
        p = matched / total if total > 0 and matched > 0 else _SMOOTH
        log_sum += math.log(p)
    r = _closest_ref_length(len(candidate), references)
    bp = min(1.0, math.exp(1.0 - r / len(candidate)))
    return bp * math.exp(log_sum / max_n)


def corpus_bleu(pairs, max_n: int = 4) -> float:
    """BLEU over aggregated counts; pairs = [(candidate, references), ...]."""
    if not 1 <= max_n <= 4:
        raise InvalidInputError("max_n must be between 1 and 4")
    if not pairs:
        raise InvalidInputError("empty corpus")
    matched = [0] * max_n
    totals = [0] * max_n
    c_total = 0
    r_total = 0
    for candidate, references in pairs:
        _validate_refs(references)
        candidate = list(candidate)
        if len(candidate) == 0:
            continue
        c_total += len(candidate)
        r_total += _closest_ref_length(len(candidate), references)
        for n in range(1, max_n + 1):
            m, t = _clipped_counts(candidate, references, n)
            matched[n - 1] += m
            totals[n - 1] += t
    if c_total == 0:
        return 0.0
    log_sum = 0.0
    for n in range(max_n):
        p = matched[n] / totals[n] if totals[n] > 0 and matched[n] > 0 else _SMOOTH
        log_sum += math.log(p)
    bp = min(1.0, math.exp(1.0 - r_total / c_total))
    return bp * math.exp(log_sum / max_n)


def _align(candidate, reference):
    """Greedy leftmost-unused unigram alignment.

    Returns (matches, chunks): matched candidate positions paired with
    reference positions, and the number of maximal runs contiguous on both
    sides.
    """
    used = [False] * len(reference)
    pairs = []
    for ci, tok in enumerate(candidate):
        for ri, rtok in enumerate(reference):
            if not used[ri] and rtok == tok:
                used[ri] = True
                pairs.append((ci, ri))
                break
    if not pairs:
        return 0, 0
    chunks = 1
    for (c0, r0), (c1, r1) in zip(pairs, pairs[1:]):
        if c1 != c0 + 1 or r1 != r0 + 1:
            chunks += 1
    return len(pairs), chunks


def meteor_lite(candidate, reference) -> float:
    candidate = list(candidate)
    reference = list(reference)
    if len(reference) == 0:
        raise InvalidInputError("reference must be nonempty")
    if len(candidate) == 0:
        return 0.0
    matches, chunks = _align(candidate, reference)
    if matches == 0:
        return 0.0
    p = matches / len(candidate)
    r = matches / len(reference)
    f_mean = p * r / (0.9 * p + 0.1 * r)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1.0 - penalty)


@dataclass
class MetricReport:
    bleu_corpus: dict
    bleu_sentence_mean: dict
    meteor_mean: float
    candidates: int
    references: int

    def to_dict(self) -> dict:
        return {
            "bleu_corpus": self.bleu_corpus,
            "bleu_sentence_mean": self.bleu_sentence_mean,
            "meteor_mean": self.meteor_mean,
            "candidates": self.candidates,
            "references": self.references,
        }


def evaluate_pairs(pairs) -> MetricReport:
    """Score a corpus of (candidate, references) token-list pairs.

    BLEU is reported both corpus-level (aggregated counts) and as the mean
    of sentence scores, labeled separately; METEOR-lite uses the first
    reference of each pair.
    """
    if not pairs:
        raise InvalidInputError("empty corpus")
    bleu_corpus = {}
    bleu_sentence = {}
    for n in range(1, 5):
        bleu_corpus[f"bleu-{n}"] = corpus_bleu(pairs, n)
        bleu_sentence[f"bleu-{n}"] = sum(bleu(c, refs, n) for c, refs in pairs) / len(pairs)
    meteor = sum(meteor_lite(c, refs[0]) for c, refs in pairs) / len(pairs)
    n_refs = sum(len(refs) for _, refs in pairs)
    return MetricReport(bleu_corpus=bleu_corpus, bleu_sentence_mean=bleu_sentence,
                        meteor_mean=meteor, candidates=len(pairs), references=n_refs)
