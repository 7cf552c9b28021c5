"""empathykit: desk-scale pipeline for structured empathetic response
training and evaluation."""

from .coe import CoeOutput, FormatVerdict, format_reward, parse_coe, render_coe
from .corpus import (
    AnswerRecord,
    CorpusStats,
    QARecord,
    SftRecord,
    anonymize,
    build_sft_record,
    compute_stats,
    filter_corpus,
    parse_corpus,
)
from .grpo import (
    GrpoConfig,
    RolloutGroup,
    ToyPolicyParams,
    group_advantages,
    grpo_train,
    kl_estimate,
    policy_sample,
    surrogate_objective,
    total_reward,
)
from .metrics import (
    MetricVector,
    bleu1,
    distinct1,
    meteor,
    rouge_l,
    score_multi_reference,
    tokenize,
)
from .ranking import AggregateReport, RankingRecord, RankingTask, aggregate, make_assignment
from .reward_model import (
    EncoderParams,
    RewardConfig,
    Triplet,
    answer_reward,
    calibrate_threshold,
    encode,
    sample_negatives,
    train_reward_model,
    triplet_loss,
)

__version__ = "0.1.0"
