"""Multi-reference automatic evaluation metrics for Chinese/mixed text.

Tokenization is character-level for CJK (and any other non-ASCII scalar)
with ASCII alphanumeric runs folded into one lowercased token.  Metrics:
BLEU-1 with the single-reference brevity penalty, ROUGE-L (LCS F1), an
exact-match METEOR variant, Distinct-1, and their unweighted mean (navg).

Against a multi-reference set, the overlap metrics are scored per reference
and arithmetically averaged; Distinct-1 is reference-free.
"""

from __future__ import annotations

import math
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .kernels import lcs_length

TokenSeq = Sequence[str]

_ASCII_ALNUM = frozenset(string.ascii_letters + string.digits)


def tokenize(text: str) -> list[str]:
    """NFC-normalize and split: ASCII alnum runs fold to one lowercased token,
    whitespace is dropped, every other scalar is a single token."""
    normalized = unicodedata.normalize("NFC", text)
    tokens: list[str] = []
    run: list[str] = []
    for ch in normalized:
        if ch in _ASCII_ALNUM:
            run.append(ch)
            continue
        if run:
            tokens.append("".join(run).lower())
            run.clear()
        if ch.isspace():
            continue
        tokens.append(ch)
    if run:
        tokens.append("".join(run).lower())
    return tokens


def bleu1(hyp: TokenSeq, ref: TokenSeq) -> float:
    """Clipped unigram precision times the brevity penalty."""
    if not hyp:
        return 0.0
    ref_counts = Counter(ref)
    hyp_counts = Counter(hyp)
    overlap = sum(min(c, ref_counts[t]) for t, c in hyp_counts.items())
    precision = overlap / len(hyp)
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * precision


def _lcs(hyp: TokenSeq, ref: TokenSeq) -> int:
    if not hyp or not ref:
        return 0
    table: dict[str, int] = {}
    a = np.array([table.setdefault(t, len(table)) for t in hyp], dtype=np.int64)
    b = np.array([table.setdefault(t, len(table)) for t in ref], dtype=np.int64)
    return int(lcs_length(a, b))


def rouge_l(hyp: TokenSeq, ref: TokenSeq) -> float:
    """LCS-based F1: 2PR/(P+R) with P = L/|hyp|, R = L/|ref|."""
    length = _lcs(hyp, ref)
    if length == 0:
        return 0.0
    p = length / len(hyp)
    r = length / len(ref)
    return 2.0 * p * r / (p + r)


def _greedy_alignment(hyp: TokenSeq, ref: TokenSeq) -> list[tuple[int, int]]:
    """Left-to-right one-to-one exact matching: each hyp token takes the first
    unused identical ref token."""
    used = [False] * len(ref)
    pairs: list[tuple[int, int]] = []
    for i, tok in enumerate(hyp):
        for j, rtok in enumerate(ref):
            if not used[j] and rtok == tok:
                used[j] = True
                pairs.append((i, j))
                break
    return pairs


def meteor(hyp: TokenSeq, ref: TokenSeq) -> float:
    """Exact-match METEOR: Fmean = 10PR/(R+9P), penalty = 0.5*(chunks/m)^3."""
    if not hyp or not ref:
        return 0.0
    pairs = _greedy_alignment(hyp, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    chunks = 1
    for (hi, ri), (hj, rj) in zip(pairs, pairs[1:]):
        if hj != hi + 1 or rj != ri + 1:
            chunks += 1
    precision = m / len(hyp)
    recall = m / len(ref)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


def distinct1(hyp: TokenSeq) -> float:
    """Unique-token ratio; 0 for empty input."""
    if not hyp:
        return 0.0
    return len(set(hyp)) / len(hyp)


def normalized_average(b1: float, d1: float, rl: float, met: float) -> float:
    """Unweighted mean of the four metric values."""
    return (b1 + d1 + rl + met) / 4.0


@dataclass(frozen=True)
class MetricVector:
    """The four per-question metric values plus their unweighted mean."""

    b1: float
    d1: float
    rl: float
    met: float
    navg: float

    @classmethod
    def from_scores(cls, b1: float, d1: float, rl: float, met: float) -> "MetricVector":
        return cls(b1=b1, d1=d1, rl=rl, met=met, navg=normalized_average(b1, d1, rl, met))

    def as_dict(self) -> dict[str, float]:
        return {"b1": self.b1, "d1": self.d1, "rl": self.rl, "met": self.met, "navg": self.navg}

    def rounded(self, ndigits: int = 3) -> dict[str, float]:
        return {k: round(v, ndigits) for k, v in self.as_dict().items()}


def score_multi_reference(hyp: str, refs: Sequence[str]) -> MetricVector:
    """Score one hypothesis against every reference and average the
    per-reference overlap scores; Distinct-1 is computed once on the
    hypothesis."""
    if not refs:
        raise ValueError("refs must be nonempty")
    hyp_tokens = tokenize(hyp)
    ref_tokens = [tokenize(r) for r in refs]
    b1 = sum(bleu1(hyp_tokens, r) for r in ref_tokens) / len(refs)
    rl = sum(rouge_l(hyp_tokens, r) for r in ref_tokens) / len(refs)
    met = sum(meteor(hyp_tokens, r) for r in ref_tokens) / len(refs)
    return MetricVector.from_scores(b1=b1, d1=distinct1(hyp_tokens), rl=rl, met=met)


def mean_metric_vector(vectors: Iterable[MetricVector]) -> MetricVector:
    """Macro-average of per-question vectors (unweighted over questions)."""
    vecs = list(vectors)
    if not vecs:
        raise ValueError("no metric vectors to average")
    n = len(vecs)
    return MetricVector.from_scores(
        b1=sum(v.b1 for v in vecs) / n,
        d1=sum(v.d1 for v in vecs) / n,
        rl=sum(v.rl for v in vecs) / n,
        met=sum(v.met for v in vecs) / n,
    )
