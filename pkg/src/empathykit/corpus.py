"""Counseling QA corpus: data model, JSONL ingest, filtering, stats, SFT records.

A corpus file is UTF-8 JSON-lines; each line holds one question with keys
``id``, ``title``, ``description``, ``topic``, optional ``subtopics``
(list of strings) and ``answers`` (list of ``{"text": ...}`` objects).
Character counts are Unicode scalar counts after NFC normalization.
"""

from __future__ import annotations

import dataclasses
import json
import re
import unicodedata
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .coe import CoeOutput, render_coe


def scalar_count(text: str) -> int:
    """Unicode scalar count after NFC normalization."""
    return len(unicodedata.normalize("NFC", text))


@dataclass(frozen=True)
class AnswerRecord:
    text: str
    char_count: int | None = None

    def __post_init__(self) -> None:
        n = scalar_count(self.text)
        if self.char_count is None:
            object.__setattr__(self, "char_count", n)
        elif self.char_count != n:
            raise ValueError(f"char_count {self.char_count} != recomputed length {n}")


@dataclass(frozen=True)
class QARecord:
    id: str
    title: str
    description: str
    topic: str
    subtopics: tuple[str, ...] = ()
    answers: tuple[AnswerRecord, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be nonempty")
        if not self.topic:
            raise ValueError("record topic must be nonempty")
        object.__setattr__(self, "subtopics", tuple(self.subtopics))
        object.__setattr__(self, "answers", tuple(self.answers))

    @property
    def question_text(self) -> str:
        """Title and description concatenated, as presented to models."""
        return f"{self.title}\n{self.description}"


@dataclass(frozen=True)
class CorpusStats:
    n_questions: int
    n_answers: int
    n_main_topics: int
    n_subtopics: int
    avg_chars_title: float
    avg_chars_description: float
    avg_chars_answer: float
    avg_responses_per_question: float


@dataclass(frozen=True)
class SftRecord:
    system: str
    user: str
    assistant: str


@dataclass(frozen=True)
class Diagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


_REQUIRED_FIELDS = ("id", "title", "description", "topic", "answers")


def _record_from_obj(obj: object) -> QARecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    for key in _REQUIRED_FIELDS:
        if key not in obj:
            raise ValueError(f"missing required field {key!r}")
    for key in ("id", "title", "description", "topic"):
        if not isinstance(obj[key], str):
            raise ValueError(f"field {key!r} must be a string")
    subtopics = obj.get("subtopics", [])
    if not isinstance(subtopics, list) or any(not isinstance(s, str) for s in subtopics):
        raise ValueError("field 'subtopics' must be a list of strings")
    if not isinstance(obj["answers"], list):
        raise ValueError("field 'answers' must be a list")
    answers = []
    for i, ans in enumerate(obj["answers"]):
        if not isinstance(ans, dict) or not isinstance(ans.get("text"), str):
            raise ValueError(f"answers[{i}] must be an object with a string 'text'")
        answers.append(AnswerRecord(text=ans["text"]))
    return QARecord(
        id=obj["id"],
        title=obj["title"],
        description=obj["description"],
        topic=obj["topic"],
        subtopics=tuple(subtopics),
        answers=tuple(answers),
    )


def parse_corpus(stream: Iterable[str]) -> tuple[list[QARecord], list[Diagnostic]]:
    """Parse JSON-lines text into records.

    Malformed lines are reported as per-line diagnostics instead of aborting;
    blank lines are skipped.  Input order is preserved and duplicate ids are
    rejected.
    """
    records: list[QARecord] = []
    diagnostics: list[Diagnostic] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            diagnostics.append(Diagnostic(lineno, f"invalid JSON: {exc.msg}"))
            continue
        try:
            record = _record_from_obj(obj)
        except ValueError as exc:
            diagnostics.append(Diagnostic(lineno, str(exc)))
            continue
        if record.id in seen_ids:
            diagnostics.append(Diagnostic(lineno, f"duplicate id {record.id!r}"))
            continue
        seen_ids.add(record.id)
        records.append(record)
    return records, diagnostics


def record_to_obj(record: QARecord) -> dict:
    return {
        "id": record.id,
        "title": record.title,
        "description": record.description,
        "topic": record.topic,
        "subtopics": list(record.subtopics),
        "answers": [{"text": a.text} for a in record.answers],
    }


def write_corpus(records: Iterable[QARecord], fp: IO[str]) -> None:
    for record in records:
        fp.write(json.dumps(record_to_obj(record), ensure_ascii=False) + "\n")


def filter_corpus(records: Sequence[QARecord], min_chars: int = 100) -> list[QARecord]:
    """Keep answers strictly longer than ``min_chars``; drop records whose
    answer list becomes empty.  Order is preserved."""
    if min_chars < 0:
        raise ValueError("min_chars must be >= 0")
    out = []
    for record in records:
        kept = tuple(a for a in record.answers if a.char_count > min_chars)
        if kept:
            out.append(dataclasses.replace(record, answers=kept))
    return out


def compute_stats(records: Sequence[QARecord]) -> CorpusStats:
    if not records:
        raise ValueError("empty corpus")
    n_questions = len(records)
    answers = [a for r in records for a in r.answers]
    n_answers = len(answers)
    return CorpusStats(
        n_questions=n_questions,
        n_answers=n_answers,
        n_main_topics=len({r.topic for r in records}),
        n_subtopics=len({s for r in records for s in r.subtopics}),
        avg_chars_title=sum(scalar_count(r.title) for r in records) / n_questions,
        avg_chars_description=sum(scalar_count(r.description) for r in records) / n_questions,
        avg_chars_answer=(sum(a.char_count for a in answers) / n_answers) if answers else 0.0,
        avg_responses_per_question=n_answers / n_questions,
    )


#: (pattern, placeholder) pairs applied in order; placeholders never re-match,
#: so scrubbing is idempotent.
DEFAULT_ANONYMIZER_RULES: tuple[tuple[re.Pattern[str], str], ...] = (
    (re.compile(r"(?:https?://|www\.)\S+"), "⟨URL⟩"),
    (re.compile(r"@\w+"), "⟨USER⟩"),
    (re.compile(r"\d{5,}"), "⟨NUM⟩"),
)


def anonymize(
    text: str, rules: Sequence[tuple[re.Pattern[str], str]] = DEFAULT_ANONYMIZER_RULES
) -> str:
    """Replace URLs, handle-like @tokens and digit runs of 5+ with fixed
    placeholder tokens."""
    for pattern, placeholder in rules:
        text = pattern.sub(placeholder, text)
    return text


def anonymize_record(record: QARecord) -> QARecord:
    return dataclasses.replace(
        record,
        title=anonymize(record.title),
        description=anonymize(record.description),
        answers=tuple(AnswerRecord(text=anonymize(a.text)) for a in record.answers),
    )


SFT_SYSTEM_PROMPT = (
    "你是一位富有同理心的心理支持顾问，擅长回应篇幅较长的求助叙述。"
    "在给出回复之前，请先在 <empathy_think> 标签内完成四层分析，四层按顺序、各自写在对应标签内："
    "<L1>情绪与处境：识别求助者的核心情绪及其客观处境</L1>"
    "<L2>成因与信念：探究情绪背后的原因与可能的认知偏差</L2>"
    "<L3>意图分析：判断求助者主要寻求哪种支持</L3>"
    "<L4>回应策略：综合以上分析制定回应方案</L4>。"
    "随后在 <answer> 标签内给出面向求助者的最终回复。除这两个标签块外不要输出任何其他内容。"
)


def build_sft_record(record: QARecord, answer_index: int, coe: CoeOutput) -> SftRecord:
    """Assemble a single-turn (system, user, assistant) training triple whose
    assistant text is the canonical serialization of ``coe``."""
    if not 0 <= answer_index < len(record.answers):
        raise IndexError(
            f"answer_index {answer_index} out of range for {len(record.answers)} answers"
        )
    chosen = record.answers[answer_index].text
    if coe.answer != unicodedata.normalize("NFC", chosen).strip():
        raise ValueError("coe.answer does not match the selected human answer")
    return SftRecord(
        system=SFT_SYSTEM_PROMPT,
        user=record.question_text,
        assistant=render_coe(coe),
    )
