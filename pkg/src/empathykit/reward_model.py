"""Contrastive answer reward model.

The encoder is a hashed character n-gram bag with a trainable linear
embedding: features are n-grams (over the shared CJK/ASCII tokenizer's
token stream) hashed into ``hash_dim`` buckets via CRC-32, summed through
the weight matrix and L2-normalized.  Training minimizes the mean margin
triplet loss max(0, cos(q,a-) - cos(q,a+) + m) by plain gradient descent;
the analytic gradient is checked against finite differences in the test
suite.  The binary answer reward thresholds cos(E(q), E(a)) at T.
"""

from __future__ import annotations

import json
import logging
import re
import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import QARecord
from .kernels import embed_bag, scatter_add_rows
from .metrics import tokenize

log = logging.getLogger(__name__)

NEG_KINDS = ("mismatched_emotion", "generic_frequent", "in_batch")


@dataclass
class EncoderParams:
    hash_dim: int
    embed_dim: int
    weights: np.ndarray  # (hash_dim, embed_dim) float64
    ngram_orders: tuple[int, ...]
    seed: int

    def __post_init__(self) -> None:
        if self.hash_dim < 1 or self.embed_dim < 1:
            raise ValueError("dimensions must be >= 1")
        self.ngram_orders = tuple(sorted(set(int(n) for n in self.ngram_orders)))
        if not self.ngram_orders or min(self.ngram_orders) < 1:
            raise ValueError("ngram orders must be positive integers")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.hash_dim, self.embed_dim):
            raise ValueError("weight matrix shape does not match dims")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")


@dataclass(frozen=True)
class RewardConfig:
    margin: float = 0.2
    threshold: float = 0.5
    learning_rate: float = 0.05
    batch_size: int = 16
    epochs: int = 5
    seed: int = 42

    def __post_init__(self) -> None:
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if not -1.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [-1, 1]")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass(frozen=True)
class Triplet:
    q: str
    a_pos: str
    a_neg: str
    neg_kind: str

    def __post_init__(self) -> None:
        if self.a_pos == self.a_neg:
            raise ValueError("a_pos and a_neg must differ")
        if self.neg_kind not in NEG_KINDS:
            raise ValueError(f"unknown neg_kind {self.neg_kind!r}")


def init_encoder_params(
    hash_dim: int = 2**15,
    embed_dim: int = 64,
    ngram_orders: Sequence[int] = (1, 2),
    seed: int = 42,
    init_scale: float = 0.1,
) -> EncoderParams:
    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, init_scale, size=(hash_dim, embed_dim))
    return EncoderParams(
        hash_dim=hash_dim,
        embed_dim=embed_dim,
        weights=weights,
        ngram_orders=tuple(ngram_orders),
        seed=seed,
    )


def features(text: str, params: EncoderParams) -> tuple[np.ndarray, np.ndarray]:
    """Hashed n-gram feature indices and counts for one text."""
    tokens = tokenize(text)
    counts: Counter[int] = Counter()
    for order in params.ngram_orders:
        for i in range(len(tokens) - order + 1):
            gram = "\x1f".join(tokens[i : i + order])
            counts[zlib.crc32(gram.encode("utf-8")) % params.hash_dim] += 1
    if not counts:
        raise ValueError("unencodable text")
    idx = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
    cnt = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
    return idx, cnt


def _embed_raw(idx: np.ndarray, cnt: np.ndarray, params: EncoderParams) -> np.ndarray:
    return embed_bag(params.weights, idx, cnt)


def encode(text: str, params: EncoderParams) -> np.ndarray:
    """Deterministic unit-norm embedding of ``text``."""
    idx, cnt = features(text, params)
    raw = _embed_raw(idx, cnt, params)
    norm = float(np.linalg.norm(raw))
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError("unencodable text")
    return raw / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def triplet_loss(q: str, a_pos: str, a_neg: str, params: EncoderParams, margin: float) -> float:
    """max(0, cos(E(q),E(a-)) - cos(E(q),E(a+)) + margin)."""
    eq = encode(q, params)
    return max(0.0, cosine(eq, encode(a_neg, params)) - cosine(eq, encode(a_pos, params)) + margin)


def _accumulate_triplet_grad(
    grad: np.ndarray,
    q_feat: tuple[np.ndarray, np.ndarray],
    p_feat: tuple[np.ndarray, np.ndarray],
    n_feat: tuple[np.ndarray, np.ndarray],
    params: EncoderParams,
    margin: float,
) -> float:
    """Add d(loss)/dW for one triplet into ``grad``; returns the loss value.

    With u_x the raw (pre-normalization) embedding and e_x = u_x/|u_x|,
    d cos(e_q,e_a)/d u_q = (e_a - cos * e_q)/|u_q| and symmetrically for u_a;
    d u_x/dW scatters the per-text feature counts.  The subgradient at the
    hinge boundary is taken as zero.
    """
    u_q = _embed_raw(*q_feat, params)
    u_p = _embed_raw(*p_feat, params)
    u_n = _embed_raw(*n_feat, params)
    nq, np_, nn = (float(np.linalg.norm(u)) for u in (u_q, u_p, u_n))
    if min(nq, np_, nn) == 0.0:
        raise ValueError("unencodable text")
    e_q, e_p, e_n = u_q / nq, u_p / np_, u_n / nn
    cos_p = float(np.dot(e_q, e_p))
    cos_n = float(np.dot(e_q, e_n))
    f = cos_n - cos_p + margin
    if f <= 0.0:
        return 0.0
    g_q = ((e_n - cos_n * e_q) - (e_p - cos_p * e_q)) / nq
    g_p = -(e_q - cos_p * e_p) / np_
    g_n = (e_q - cos_n * e_n) / nn
    scatter_add_rows(grad, q_feat[0], q_feat[1], g_q)
    scatter_add_rows(grad, p_feat[0], p_feat[1], g_p)
    scatter_add_rows(grad, n_feat[0], n_feat[1], g_n)
    return f


def mean_triplet_loss_and_grad(
    triplets: Sequence[Triplet],
    params: EncoderParams,
    margin: float,
    feature_cache: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
) -> tuple[float, np.ndarray]:
    """Mean triplet loss over a batch and its gradient w.r.t. the weights."""
    if not triplets:
        raise ValueError("empty triplet batch")
    cache = feature_cache if feature_cache is not None else {}

    def feat(text: str) -> tuple[np.ndarray, np.ndarray]:
        if text not in cache:
            cache[text] = features(text, params)
        return cache[text]

    grad = np.zeros_like(params.weights)
    total = 0.0
    for t in triplets:
        total += _accumulate_triplet_grad(
            grad, feat(t.q), feat(t.a_pos), feat(t.a_neg), params, margin
        )
    grad /= len(triplets)
    return total / len(triplets), grad


_SENTENCE_SPLIT = re.compile(r"[。！？\n]+")


def top_frequent_sentences(corpus: Sequence[QARecord], k: int = 20) -> list[str]:
    """The k most frequent answer sentences by exact string count (split on
    。！？ and newlines)."""
    counts: Counter[str] = Counter()
    for record in corpus:
        for answer in record.answers:
            for sentence in _SENTENCE_SPLIT.split(answer.text):
                sentence = sentence.strip()
                if sentence:
                    counts[sentence] += 1
    return [s for s, _ in counts.most_common(k)]


def sample_negatives(
    record: QARecord,
    corpus: Sequence[QARecord],
    batch: Sequence[QARecord],
    rng_seed: int | np.random.Generator,
    top_sentences: Sequence[str] | None = None,
    k: int = 20,
) -> list[Triplet]:
    """Build up to three negatives for one record: an answer from a
    different-topic record (mismatched-emotion proxy), a pseudo-answer of
    the corpus's most frequent sentences, and an answer from another batch
    record."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if not record.answers:
        raise ValueError("record has no answers")
    if not batch:
        raise ValueError("batch must be nonempty")
    q = record.question_text
    a_pos = record.answers[int(rng.integers(len(record.answers)))].text
    triplets: list[Triplet] = []

    other_topic = [r for r in corpus if r.topic != record.topic and r.answers]
    if other_topic:
        source = other_topic[int(rng.integers(len(other_topic)))]
        a_neg = source.answers[int(rng.integers(len(source.answers)))].text
        if a_neg != a_pos:
            triplets.append(Triplet(q, a_pos, a_neg, "mismatched_emotion"))
    else:
        log.warning("single-topic corpus: skipping mismatched-emotion negatives")

    top = list(top_sentences) if top_sentences is not None else top_frequent_sentences(corpus, k)
    if top:
        pseudo = "。".join(top[:3]) + "。"
        if pseudo != a_pos:
            triplets.append(Triplet(q, a_pos, pseudo, "generic_frequent"))

    peers = [r for r in batch if r.id != record.id and r.answers]
    if peers:
        source = peers[int(rng.integers(len(peers)))]
        a_neg = source.answers[int(rng.integers(len(source.answers)))].text
        if a_neg != a_pos:
            triplets.append(Triplet(q, a_pos, a_neg, "in_batch"))

    return triplets


def train_reward_model(
    corpus: Sequence[QARecord],
    config: RewardConfig,
    hash_dim: int = 2**15,
    embed_dim: int = 64,
    ngram_orders: Sequence[int] = (1, 2),
) -> tuple[EncoderParams, list[float]]:
    """Minibatch gradient descent on the mean triplet loss.

    Returns the trained parameters and the per-epoch mean losses.
    """
    if not corpus:
        raise ValueError("empty corpus")
    params = init_encoder_params(hash_dim, embed_dim, ngram_orders, seed=config.seed)
    rng = np.random.default_rng(config.seed)
    top = top_frequent_sentences(corpus)
    cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    history: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(corpus))
        losses: list[float] = []
        for start in range(0, len(corpus), config.batch_size):
            batch = [corpus[i] for i in order[start : start + config.batch_size]]
            triplets = [
                t
                for record in batch
                for t in sample_negatives(record, corpus, batch, rng, top_sentences=top)
            ]
            if not triplets:
                continue
            loss, grad = mean_triplet_loss_and_grad(
                triplets, params, config.margin, feature_cache=cache
            )
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise RuntimeError(f"training diverged at epoch {epoch}: non-finite loss/gradient")
            params.weights -= config.learning_rate * grad
            losses.append(loss)
        epoch_mean = float(np.mean(losses)) if losses else 0.0
        history.append(epoch_mean)
        log.info("reward-train epoch %d mean_loss %.6f", epoch, epoch_mean)
    return params, history


def answer_reward(q: str, a: str, params: EncoderParams, threshold: float) -> int:
    """1 iff cos(E(q), E(a)) strictly exceeds the threshold; unencodable
    inputs score 0."""
    try:
        score = cosine(encode(q, params), encode(a, params))
    except ValueError:
        return 0
    return 1 if score > threshold else 0


def _pair_cosine(q: str, a: str, params: EncoderParams) -> float:
    """Cosine for calibration; unencodable pairs pin to -1 (never above T)."""
    try:
        return cosine(encode(q, params), encode(a, params))
    except ValueError:
        return -1.0


def threshold_balanced_accuracy(
    validation: Sequence[tuple[str, str, bool]], params: EncoderParams, threshold: float
) -> float:
    pos = [_pair_cosine(q, a, params) for q, a, label in validation if label]
    neg = [_pair_cosine(q, a, params) for q, a, label in validation if not label]
    if not pos or not neg:
        raise ValueError("validation set must contain both labels")
    tpr = sum(c > threshold for c in pos) / len(pos)
    tnr = sum(c <= threshold for c in neg) / len(neg)
    return (tpr + tnr) / 2.0


def calibrate_threshold(
    validation: Sequence[tuple[str, str, bool]], params: EncoderParams
) -> float:
    """The threshold maximizing balanced accuracy of ``cos > T``.

    Candidates are midpoints between consecutive distinct validation
    cosines; on ties the smaller candidate wins.
    """
    labels = {bool(label) for _, _, label in validation}
    if labels != {True, False}:
        raise ValueError("validation set must contain both labels")
    cosines = sorted({_pair_cosine(q, a, params) for q, a, _ in validation})
    if len(cosines) == 1:
        candidates = [cosines[0]]
    else:
        candidates = [(a + b) / 2.0 for a, b in zip(cosines, cosines[1:])]
    best_t = candidates[0]
    best_ba = -1.0
    for t in candidates:
        ba = threshold_balanced_accuracy(validation, params, t)
        if ba > best_ba:
            best_t, best_ba = t, ba
    if best_ba <= 0.5:
        log.warning(
            "calibrated threshold reaches balanced accuracy %.3f <= 0.5; labels may be inverted",
            best_ba,
        )
    return float(best_t)


def save_encoder(params: EncoderParams, path: str | Path) -> None:
    """Single-file checkpoint: JSON header line + little-endian float64 weights."""
    header = {
        "hash_dim": params.hash_dim,
        "embed_dim": params.embed_dim,
        "ngram_orders": list(params.ngram_orders),
        "seed": params.seed,
    }
    with open(path, "wb") as fp:
        fp.write((json.dumps(header, separators=(",", ":")) + "\n").encode("utf-8"))
        fp.write(np.ascontiguousarray(params.weights, dtype="<f8").tobytes())


def load_encoder(path: str | Path) -> EncoderParams:
    with open(path, "rb") as fp:
        header_line = fp.readline()
        header = json.loads(header_line.decode("utf-8"))
        raw = fp.read()
    weights = np.frombuffer(raw, dtype="<f8").reshape(header["hash_dim"], header["embed_dim"])
    return EncoderParams(
        hash_dim=header["hash_dim"],
        embed_dim=header["embed_dim"],
        weights=weights.copy(),
        ngram_orders=tuple(header["ngram_orders"]),
        seed=header["seed"],
    )
