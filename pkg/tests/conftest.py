"""Shared fixtures: tiny hand corpora and the synthetic topical corpus."""

from __future__ import annotations

import json

import numpy as np
import pytest

from empathykit.corpus import AnswerRecord, QARecord


def make_record(
    rid: str,
    topic: str = "焦虑",
    title: str = "最近很难受",
    description: str = "说不清楚为什么",
    answers: tuple[str, ...] = ("谢谢你愿意说出来，我们一起看看。",),
    subtopics: tuple[str, ...] = (),
) -> QARecord:
    return QARecord(
        id=rid,
        title=title,
        description=description,
        topic=topic,
        subtopics=subtopics,
        answers=tuple(AnswerRecord(text=a) for a in answers),
    )


def corpus_lines(records) -> str:
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {
                    "id": r.id,
                    "title": r.title,
                    "description": r.description,
                    "topic": r.topic,
                    "subtopics": list(r.subtopics),
                    "answers": [{"text": a.text} for a in r.answers],
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n"


@pytest.fixture
def two_question_corpus() -> list[QARecord]:
    """2 questions with 1 and 2 answers: avg_responses_per_question = 1.5."""
    return [
        make_record("q1", topic="焦虑", answers=("第一个回答。",)),
        make_record("q2", topic="抑郁", answers=("第二个回答。", "第三个回答。")),
    ]


def topic_vocab(topic_index: int, size: int = 30) -> list[str]:
    """Disjoint per-topic word lists; ASCII runs tokenize to single tokens."""
    return [f"t{topic_index}w{i}" for i in range(size)]


def synthetic_topical_corpus(
    n_topics: int = 8,
    records_per_topic: int = 85,
    answers_per_record: int = 1,
    words_per_text: int = 12,
    seed: int = 7,
    id_prefix: str = "syn",
) -> list[QARecord]:
    """Records whose questions and answers draw words from disjoint per-topic
    vocabularies, so same-topic (q, a) pairs share tokens and cross-topic
    pairs share none."""
    rng = np.random.default_rng(seed)
    vocabs = [topic_vocab(t) for t in range(n_topics)]
    records = []
    for t in range(n_topics):
        words = vocabs[t]
        for i in range(records_per_topic):
            def text(n: int) -> str:
                picks = rng.choice(len(words), size=n)
                return " ".join(words[int(j)] for j in picks)

            records.append(
                QARecord(
                    id=f"{id_prefix}-{t}-{i}",
                    title=text(4),
                    description=text(words_per_text),
                    topic=f"topic-{t}",
                    answers=tuple(
                        AnswerRecord(text=text(words_per_text))
                        for _ in range(answers_per_record)
                    ),
                )
            )
    return records
