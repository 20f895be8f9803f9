"""Corpus BLEU-1..4 and ROUGE-L for selected captions."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

ROUGE_BETA = 1.2
SMOOTH_EPS = 0.1


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(c: int, refs: Sequence[Sequence[str]]) -> int:
    # ties go to the shorter reference
    return min((abs(len(r) - c), len(r)) for r in refs)[1]


def _clipped_counts(cand, refs, max_n):
    correct = [0] * max_n
    total = [0] * max_n
    for n in range(1, max_n + 1):
        cand_counts = ngrams(cand, n)
        max_ref: Counter = Counter()
        for ref in refs:
            for gram, k in ngrams(ref, n).items():
                if k > max_ref[gram]:
                    max_ref[gram] = k
        correct[n - 1] = sum(min(k, max_ref[g]) for g, k in cand_counts.items())
        total[n - 1] = max(len(cand) - n + 1, 0)
    return correct, total


def _bleu_from_counts(correct, total, c_len, r_len, eps=0.0):
    scores = []
    log_sum = 0.0
    dead = False
    for k, (hit, tot) in enumerate(zip(correct, total), start=1):
        if eps:
            p = (hit + eps) / (tot + eps)
        else:
            p = hit / tot if tot else 0.0
        if p <= 0.0 or dead:
            dead = True
            scores.append(0.0)
            continue
        log_sum += math.log(p)
        bp = 1.0 if c_len >= r_len else math.exp(1.0 - r_len / c_len) if c_len else 0.0
        scores.append(bp * math.exp(log_sum / k))
    return scores


def bleu(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[Sequence[str]]],
    max_n: int = 4,
) -> list[float]:
    """Corpus BLEU-1..max_n, unsmoothed.

    N-gram matches are clipped per sentence and pooled over the corpus; a
    single brevity penalty uses the summed closest-reference lengths.
    """
    if not 1 <= max_n <= 4:
        raise ValueError("max_n must be in 1..4")
    if not candidates:
        raise ValueError("empty candidate list")
    if len(candidates) != len(references):
        raise ValueError("candidates and references differ in length")
    correct = [0] * max_n
    total = [0] * max_n
    c_len = r_len = 0
    for cand, refs in zip(candidates, references):
        if not refs:
            raise ValueError("every candidate needs at least one reference")
        hit, tot = _clipped_counts(cand, refs, max_n)
        correct = [a + b for a, b in zip(correct, hit)]
        total = [a + b for a, b in zip(total, tot)]
        c_len += len(cand)
        r_len += _closest_ref_length(len(cand), refs)
    return _bleu_from_counts(correct, total, c_len, r_len)


def sentence_bleu_smoothed(
    candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4, eps: float = SMOOTH_EPS
) -> list[float]:
    """Per-sentence BLEU with add-epsilon precisions. For display only."""
    hit, tot = _clipped_counts(candidate, references, max_n)
    return _bleu_from_counts(
        hit, tot, len(candidate), _closest_ref_length(len(candidate), references), eps
    )


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], references: Sequence[Sequence[str]], beta: float = ROUGE_BETA) -> float:
    """LCS F-measure; precision and recall are each maximised over references."""
    if not candidate or not references:
        return 0.0
    prec = rec = 0.0
    for ref in references:
        if not ref:
            continue
        lcs = lcs_length(ref, candidate)
        prec = max(prec, lcs / len(candidate))
        rec = max(rec, lcs / len(ref))
    if prec == 0.0 or rec == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * prec * rec / (rec + b2 * prec)


@dataclass
class EvalReport:
    bleu: list[float]
    rouge_l: float
    corpus_size: int
    per_image: list[dict] = field(default_factory=list)
    skipped: int = 0

    def to_dict(self) -> dict:
        out = {f"bleu_{k}": v for k, v in enumerate(self.bleu, start=1)}
        out["rouge_l"] = self.rouge_l
        out["corpus_size"] = self.corpus_size
        out["skipped"] = self.skipped
        out["per_image"] = self.per_image
        return out


def evaluate_corpus(
    image_ids: Sequence[str],
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[Sequence[str]]],
    skipped: int = 0,
) -> EvalReport:
    """Corpus BLEU-1..4, mean ROUGE-L and per-image rows.

    Per-image ``bleu_*_smoothed`` values use add-epsilon precisions and are
    not comparable to the corpus numbers.
    """
    scores = bleu(candidates, references, 4)
    rows = []
    rouge_total = 0.0
    for image_id, cand, refs in zip(image_ids, candidates, references):
        r = rouge_l(cand, refs)
        rouge_total += r
        row = {"image_id": image_id, "rouge_l": r}
        for k, v in enumerate(sentence_bleu_smoothed(cand, refs), start=1):
            row[f"bleu_{k}_smoothed"] = v
        rows.append(row)
    return EvalReport(scores, rouge_total / len(candidates), len(candidates), rows, skipped)
