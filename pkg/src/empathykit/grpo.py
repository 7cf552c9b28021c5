"""Group-relative policy optimization over a small analytic bigram policy.

Per step the current policy rolls out a group of G sequences, each scored by
a reward function; rewards are standardized within the group (population
standard deviation, zeroed below a sigma floor) and the policy ascends the
analytic gradient of the clipped surrogate

    J = (1/G) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i) - beta * mean_i KL_i

with a sequence-level importance ratio rho_i and the nonnegative per-token
k3 KL estimator exp(d) - d - 1, d = logp_ref - logp_new, token-mean per
sequence.  The old policy is refreshed from the current one every step and
the reference policy stays frozen at the initial parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import coe
from .coe import format_reward, parse_coe
from .kernels import bigram_grad
from .reward_model import EncoderParams, answer_reward

BOS_TOKEN = "<BOS>"
EOS_TOKEN = "<EOS>"

#: LLM-scale actor learning rate; kept for paper-faithful configs while the
#: toy policy defaults to a desk-scale step size.
PAPER_ACTOR_LEARNING_RATE = 1e-6

#: a reward function maps (decoded output text, prompt text) to either a
#: total reward or a (format_component, answer_component) pair
RewardFn = Callable[[str, str], "float | tuple[float, float]"]


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 4
    clip_eps: float = 0.2
    kl_beta: float = 0.01
    learning_rate: float = 0.3
    steps: int = 1000
    rollout_temperature: float = 1.0
    max_len: int = 1024
    sigma_floor: float = 1e-8
    seed: int = 42

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be > 0")
        if self.kl_beta < 0:
            raise ValueError("kl_beta must be >= 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.rollout_temperature <= 0:
            raise ValueError("rollout_temperature must be > 0")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.sigma_floor < 0:
            raise ValueError("sigma_floor must be >= 0")


@dataclass
class ToyPolicyParams:
    """Bigram policy: row v of ``logits`` is the next-token distribution
    (after softmax) conditioned on previous token v."""

    vocab: tuple[str, ...]
    logits: np.ndarray  # (V, V) float64

    def __post_init__(self) -> None:
        self.vocab = tuple(self.vocab)
        if BOS_TOKEN not in self.vocab or EOS_TOKEN not in self.vocab:
            raise ValueError("vocab must contain BOS and EOS tokens")
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("vocab tokens must be unique")
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.shape != (len(self.vocab), len(self.vocab)):
            raise ValueError("logits must be |V| x |V|")
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits must be finite")
        self._index = {tok: i for i, tok in enumerate(self.vocab)}

    def index(self, token: str) -> int:
        return self._index[token]

    @property
    def bos_index(self) -> int:
        return self._index[BOS_TOKEN]

    @property
    def eos_index(self) -> int:
        return self._index[EOS_TOKEN]

    def copy(self) -> "ToyPolicyParams":
        return ToyPolicyParams(vocab=self.vocab, logits=self.logits.copy())


@dataclass
class RolloutGroup:
    prompt: np.ndarray
    prompt_text: str
    outputs: list[np.ndarray]
    texts: list[str]
    logp_new: list[np.ndarray]
    logp_old: list[np.ndarray]
    logp_ref: list[np.ndarray]
    rewards: np.ndarray
    advantages: np.ndarray


def group_advantages(rewards: Sequence[float], sigma_floor: float = 1e-8) -> np.ndarray:
    """Standardize rewards by the group mean and population standard
    deviation; a degenerate group (sigma below the floor) gets all-zero
    advantages."""
    n = len(rewards)
    if n < 2:
        raise ValueError("group must contain at least 2 rewards")
    mu = sum(rewards) / n
    var = sum((r - mu) ** 2 for r in rewards) / n
    sigma = var**0.5
    if sigma < sigma_floor:
        return np.zeros(n, dtype=np.float64)
    return np.array([(r - mu) / sigma for r in rewards], dtype=np.float64)


def kl_estimate(logp_new: Sequence[float], logp_ref: Sequence[float]) -> float:
    """Token-mean k3 estimator exp(d) - d - 1 with d = logp_ref - logp_new."""
    new = np.asarray(logp_new, dtype=np.float64)
    ref = np.asarray(logp_ref, dtype=np.float64)
    if new.shape != ref.shape or new.ndim != 1 or new.size == 0:
        raise ValueError("log-prob sequences must have equal nonzero length")
    delta = ref - new
    return float(np.mean(np.exp(delta) - delta - 1.0))


def total_reward(
    output_text: str, q: str, rm: EncoderParams, threshold: float
) -> tuple[float, float]:
    """(format, answer) reward components; their sum is the composite reward.

    The answer component scores the text inside the answer tags; a parse
    failure leaves nothing to score and yields 0.
    """
    fmt = float(format_reward(output_text))
    parsed = parse_coe(output_text)
    answer_text = parsed.answer if isinstance(parsed, coe.CoeOutput) else ""
    ans = float(answer_reward(q, answer_text, rm, threshold))
    return fmt, ans


def _log_softmax_row(row: np.ndarray) -> np.ndarray:
    z = row - row.max()
    return z - np.log(np.exp(z).sum())


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def policy_sample(
    params: ToyPolicyParams,
    prompt: np.ndarray,
    temperature: float,
    max_len: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Autoregressive categorical sampling.

    Temperature shapes the sampling distribution only; the returned per-token
    log-probs are those of the temperature-1 policy.  Generation stops at EOS
    or after ``max_len`` tokens.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    v = len(params.vocab)
    prev = int(prompt[-1]) if len(prompt) else params.bos_index
    tokens: list[int] = []
    logps: list[float] = []
    for _ in range(max_len):
        row = params.logits[prev]
        logp1 = _log_softmax_row(row)
        if temperature == 1.0:
            probs = np.exp(logp1)
        else:
            probs = np.exp(_log_softmax_row(row / temperature))
        tok = int(rng.choice(v, p=probs))
        tokens.append(tok)
        logps.append(float(logp1[tok]))
        prev = tok
        if tok == params.eos_index:
            break
    return np.array(tokens, dtype=np.int64), np.array(logps, dtype=np.float64)


def sequence_logps(
    params: ToyPolicyParams, prompt: np.ndarray, tokens: np.ndarray
) -> np.ndarray:
    """Per-token temperature-1 log-probabilities of ``tokens`` after ``prompt``."""
    if len(tokens) == 0:
        return np.zeros(0, dtype=np.float64)
    prevs = np.empty(len(tokens), dtype=np.int64)
    prevs[0] = int(prompt[-1]) if len(prompt) else params.bos_index
    prevs[1:] = tokens[:-1]
    rows = params.logits[prevs]
    z = rows - rows.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1))
    return z[np.arange(len(tokens)), tokens] - logz


def decode(params: ToyPolicyParams, tokens: np.ndarray) -> str:
    specials = (params.bos_index, params.eos_index)
    return "".join(params.vocab[int(t)] for t in tokens if int(t) not in specials)


def _sequence_stats(group: RolloutGroup, config: GrpoConfig):
    """Per-sequence ratios, clipped-surrogate terms and KL values."""
    g = len(group.outputs)
    if g < 1:
        raise ValueError("empty rollout group")
    rho = np.empty(g)
    pg_terms = np.empty(g)
    unclipped_selected = np.empty(g, dtype=bool)
    kls = np.empty(g)
    lo, hi = 1.0 - config.clip_eps, 1.0 + config.clip_eps
    for i in range(g):
        rho[i] = np.exp(np.sum(group.logp_new[i]) - np.sum(group.logp_old[i]))
        a = group.advantages[i]
        unclipped = rho[i] * a
        clipped = float(np.clip(rho[i], lo, hi)) * a
        pg_terms[i] = min(unclipped, clipped)
        unclipped_selected[i] = unclipped <= clipped
        kls[i] = kl_estimate(group.logp_new[i], group.logp_ref[i])
    return rho, pg_terms, unclipped_selected, kls


def surrogate_objective(group: RolloutGroup, config: GrpoConfig) -> float:
    """The clipped, KL-penalized group objective J."""
    _, pg_terms, _, kls = _sequence_stats(group, config)
    value = float(np.mean(pg_terms) - config.kl_beta * np.mean(kls))
    if not np.isfinite(value):
        raise RuntimeError("non-finite surrogate objective")
    return value


def surrogate_gradient(
    group: RolloutGroup, params: ToyPolicyParams, config: GrpoConfig
) -> tuple[float, np.ndarray, dict[str, float]]:
    """J and its analytic gradient w.r.t. the policy logits.

    The per-token coefficient on d(logp_new) combines the policy-gradient
    term (active only when the min selects the unclipped branch) and the k3
    KL penalty; each token then contributes
    coef * (onehot(token) - softmax(logits[prev])) to its previous-token row.
    ``group.logp_new`` must have been computed under ``params``.
    """
    g = len(group.outputs)
    rho, pg_terms, unclipped_selected, kls = _sequence_stats(group, config)
    objective = float(np.mean(pg_terms) - config.kl_beta * np.mean(kls))

    probs = _softmax_rows(params.logits)
    grad = np.zeros_like(params.logits)
    prev_chunks: list[np.ndarray] = []
    tok_chunks: list[np.ndarray] = []
    coef_chunks: list[np.ndarray] = []
    first_prev = int(group.prompt[-1]) if len(group.prompt) else params.bos_index
    for i in range(g):
        tokens = group.outputs[i]
        n = len(tokens)
        if n == 0:
            continue
        prevs = np.empty(n, dtype=np.int64)
        prevs[0] = first_prev
        prevs[1:] = tokens[:-1]
        pg_coef = (group.advantages[i] * rho[i] / g) if unclipped_selected[i] else 0.0
        delta = group.logp_ref[i] - group.logp_new[i]
        kl_coef = -(config.kl_beta / g) * (1.0 - np.exp(delta)) / n
        prev_chunks.append(prevs)
        tok_chunks.append(tokens)
        coef_chunks.append(pg_coef + kl_coef)
    if prev_chunks:
        bigram_grad(
            grad,
            np.concatenate(prev_chunks),
            np.concatenate(tok_chunks),
            np.concatenate(coef_chunks),
            probs,
        )
    if not np.isfinite(objective) or not np.all(np.isfinite(grad)):
        raise RuntimeError("non-finite surrogate objective or gradient")
    stats = {
        "kl": float(np.mean(kls)),
        "clip_fraction": float(np.mean(~unclipped_selected)),
        "objective": objective,
    }
    return objective, grad, stats


def _reward_components(value: "float | tuple[float, float]") -> tuple[float, float | None, float | None]:
    if isinstance(value, tuple):
        fmt, ans = value
        return float(fmt) + float(ans), float(fmt), float(ans)
    return float(value), None, None


def grpo_train(
    init: ToyPolicyParams,
    prompts: Sequence[np.ndarray],
    reward_fn: RewardFn,
    config: GrpoConfig,
) -> tuple[ToyPolicyParams, list[dict]]:
    """Train the toy policy; returns the final parameters and the per-step
    trace (step, mean_reward, mean_format_reward, mean_answer_reward, kl,
    clip_fraction, objective)."""
    if not prompts:
        raise ValueError("prompts must be nonempty")
    params = init.copy()
    ref = init.copy()
    rng = np.random.default_rng(config.seed)
    trace: list[dict] = []
    for step in range(config.steps):
        prompt = prompts[int(rng.integers(len(prompts)))]
        prompt_text = decode(params, prompt)
        outputs: list[np.ndarray] = []
        logp_old: list[np.ndarray] = []
        totals = np.empty(config.group_size)
        fmt_parts: list[float | None] = []
        ans_parts: list[float | None] = []
        texts: list[str] = []
        for i in range(config.group_size):
            tokens, logps = policy_sample(
                params, prompt, config.rollout_temperature, config.max_len, rng
            )
            text = decode(params, tokens)
            total, fmt, ans = _reward_components(reward_fn(text, prompt_text))
            outputs.append(tokens)
            logp_old.append(logps)
            texts.append(text)
            totals[i] = total
            fmt_parts.append(fmt)
            ans_parts.append(ans)
        advantages = group_advantages(totals, config.sigma_floor)
        group = RolloutGroup(
            prompt=prompt,
            prompt_text=prompt_text,
            outputs=outputs,
            texts=texts,
            logp_new=[sequence_logps(params, prompt, o) for o in outputs],
            logp_old=logp_old,
            logp_ref=[sequence_logps(ref, prompt, o) for o in outputs],
            rewards=totals,
            advantages=advantages,
        )
        _, grad, stats = surrogate_gradient(group, params, config)
        params.logits = params.logits + config.learning_rate * grad
        if not np.all(np.isfinite(params.logits)):
            raise RuntimeError(f"non-finite policy parameters at step {step}")
        trace.append(
            {
                "step": step,
                "mean_reward": float(np.mean(totals)),
                "mean_format_reward": _mean_or_none(fmt_parts),
                "mean_answer_reward": _mean_or_none(ans_parts),
                "kl": stats["kl"],
                "clip_fraction": stats["clip_fraction"],
                "objective": stats["objective"],
            }
        )
    return params, trace


def _mean_or_none(values: list[float | None]) -> float | None:
    if any(v is None for v in values):
        return None
    return float(np.mean([v for v in values if v is not None])) if values else None


def evaluate_policy(
    params: ToyPolicyParams,
    prompt: np.ndarray,
    reward_fn: RewardFn,
    n_rollouts: int,
    config: GrpoConfig,
    rng: np.random.Generator,
) -> float:
    """Mean total reward over fresh rollouts (probe; no learning)."""
    prompt_text = decode(params, prompt)
    total = 0.0
    for _ in range(n_rollouts):
        tokens, _ = policy_sample(params, prompt, config.rollout_temperature, config.max_len, rng)
        value, _, _ = _reward_components(reward_fn(decode(params, tokens), prompt_text))
        total += value
    return total / n_rollouts


# -- the tag-emission task -------------------------------------------------------

STRUCTURAL_TOKENS = coe.CANONICAL_TAG_ORDER
DEFAULT_CONTENT_TOKENS = ("安", "心", "你", "我", "好")


def tag_emission_task(
    n_content_tokens: int = 5,
    boost: float = 4.0,
    noise_scale: float = 0.1,
    seed: int = 42,
) -> tuple[ToyPolicyParams, list[np.ndarray], RewardFn]:
    """A format-reward-only task: emit one canonically tagged output.

    The initial policy is SFT-like: logits favor the canonical tag sequence
    (content tokens cycling through the five sections) with Gaussian noise,
    leaving a small but nonzero initial success probability.  Note that a
    bigram policy needs one content token per section for a deterministic
    optimum; with fewer, section-exit rows are shared and mean format reward
    is capped at 1/4.
    """
    if not 1 <= n_content_tokens <= len(DEFAULT_CONTENT_TOKENS):
        raise ValueError(f"n_content_tokens must be in 1..{len(DEFAULT_CONTENT_TOKENS)}")
    content = DEFAULT_CONTENT_TOKENS[:n_content_tokens]
    vocab = (BOS_TOKEN, EOS_TOKEN) + STRUCTURAL_TOKENS + content
    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, noise_scale, size=(len(vocab), len(vocab)))
    params = ToyPolicyParams(vocab=vocab, logits=logits)

    def c(section: int) -> str:
        return content[section % n_content_tokens]

    path = [BOS_TOKEN]
    path.append(coe.THINK_OPEN)
    for section, name in enumerate(coe.SECTION_NAMES):
        path.extend((f"<{name}>", c(section), f"</{name}>"))
    path.extend((coe.THINK_CLOSE, coe.ANSWER_OPEN, c(4), coe.ANSWER_CLOSE, EOS_TOKEN))
    for a, b in zip(path, path[1:]):
        params.logits[params.index(a), params.index(b)] += boost

    prompts = [np.array([params.bos_index], dtype=np.int64)]

    def reward_fn(text: str, _prompt_text: str) -> tuple[float, float]:
        return float(format_reward(text)), 0.0

    return params, prompts, reward_fn


# -- checkpointing ----------------------------------------------------------------


def save_policy(params: ToyPolicyParams, path: str | Path) -> None:
    """JSON header line (vocab) + little-endian float64 logits."""
    header = {"vocab": list(params.vocab)}
    with open(path, "wb") as fp:
        fp.write((json.dumps(header, ensure_ascii=False, separators=(",", ":")) + "\n").encode())
        fp.write(np.ascontiguousarray(params.logits, dtype="<f8").tobytes())


def load_policy(path: str | Path) -> ToyPolicyParams:
    with open(path, "rb") as fp:
        header = json.loads(fp.readline().decode("utf-8"))
        raw = fp.read()
    vocab = tuple(header["vocab"])
    logits = np.frombuffer(raw, dtype="<f8").reshape(len(vocab), len(vocab))
    return ToyPolicyParams(vocab=vocab, logits=logits.copy())
