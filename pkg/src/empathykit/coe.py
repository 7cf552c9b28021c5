"""Chain-of-empathy structured output: grammar, parser, serializer, format reward.

A well-formed output is a think block containing the four analysis sections
in order, followed by the answer block::

    <empathy_think><L1>...</L1><L2>...</L2><L3>...</L3><L4>...</L4></empathy_think><answer>...</answer>

Whitespace between structural elements is tolerated; any other inter-block
content, missing/duplicate/reordered tags, and empty sections are invalid.
``parse_coe`` tolerates content before the think block and after the answer
block (it extracts the structure); ``format_reward`` additionally requires
the whole string to be the structure and nothing else.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, fields

THINK_OPEN = "<empathy_think>"
THINK_CLOSE = "</empathy_think>"
ANSWER_OPEN = "<answer>"
ANSWER_CLOSE = "</answer>"
SECTION_NAMES = ("L1", "L2", "L3", "L4")

#: every structural tag, in canonical document order
CANONICAL_TAG_ORDER = (
    THINK_OPEN,
    "<L1>",
    "</L1>",
    "<L2>",
    "</L2>",
    "<L3>",
    "</L3>",
    "<L4>",
    "</L4>",
    THINK_CLOSE,
    ANSWER_OPEN,
    ANSWER_CLOSE,
)

FAILURE_REASONS = (
    "missing_tag",
    "bad_order",
    "duplicate_tag",
    "trailing_content",
    "empty_section",
    "none",
)


@dataclass(frozen=True)
class CoeOutput:
    """The four reasoning sections plus the user-facing answer.

    Content is NFC-normalized and stripped of surrounding whitespace on
    construction (the grammar's canonical form), so parse/render
    round-trips are exact.
    """

    l1: str
    l2: str
    l3: str
    l4: str
    answer: str

    def __post_init__(self) -> None:
        for f in fields(self):
            value = unicodedata.normalize("NFC", getattr(self, f.name)).strip()
            object.__setattr__(self, f.name, value)


@dataclass(frozen=True)
class FormatVerdict:
    valid: bool
    reward: int
    failure_reason: str

    def __post_init__(self) -> None:
        if self.failure_reason not in FAILURE_REASONS:
            raise ValueError(f"unknown failure reason: {self.failure_reason!r}")
        if (self.reward == 1) != self.valid or (self.failure_reason == "none") != self.valid:
            raise ValueError("inconsistent verdict")


_VALID = FormatVerdict(valid=True, reward=1, failure_reason="none")


def _fail(reason: str) -> FormatVerdict:
    return FormatVerdict(valid=False, reward=0, failure_reason=reason)


def _find_all(text: str, needle: str) -> list[int]:
    out = []
    start = 0
    while True:
        i = text.find(needle, start)
        if i < 0:
            return out
        out.append(i)
        start = i + 1


def parse_coe(text: str) -> CoeOutput | FormatVerdict:
    """Parse a generated string into a CoeOutput, or return the verdict
    naming the first violated grammar rule.

    Rule precedence: missing_tag, duplicate_tag, bad_order,
    trailing_content (non-whitespace between structural elements),
    empty_section.
    """
    s = unicodedata.normalize("NFC", text)

    positions: dict[str, int] = {}
    occurrences = {tag: _find_all(s, tag) for tag in CANONICAL_TAG_ORDER}
    if any(not occ for occ in occurrences.values()):
        return _fail("missing_tag")
    if any(len(occ) > 1 for occ in occurrences.values()):
        return _fail("duplicate_tag")
    for tag, occ in occurrences.items():
        positions[tag] = occ[0]

    ordered = [positions[tag] for tag in CANONICAL_TAG_ORDER]
    if any(a >= b for a, b in zip(ordered, ordered[1:])):
        return _fail("bad_order")

    # only whitespace may separate structural elements
    gaps = (
        (THINK_OPEN, "<L1>"),
        ("</L1>", "<L2>"),
        ("</L2>", "<L3>"),
        ("</L3>", "<L4>"),
        ("</L4>", THINK_CLOSE),
        (THINK_CLOSE, ANSWER_OPEN),
    )
    for left, right in gaps:
        between = s[positions[left] + len(left) : positions[right]]
        if between.strip():
            return _fail("trailing_content")

    sections = {}
    for name in SECTION_NAMES:
        inner = s[positions[f"<{name}>"] + len(name) + 2 : positions[f"</{name}>"]]
        sections[name] = inner.strip()
    answer = s[positions[ANSWER_OPEN] + len(ANSWER_OPEN) : positions[ANSWER_CLOSE]].strip()
    if not answer or any(not v for v in sections.values()):
        return _fail("empty_section")

    return CoeOutput(
        l1=sections["L1"],
        l2=sections["L2"],
        l3=sections["L3"],
        l4=sections["L4"],
        answer=answer,
    )


def render_coe(coe: CoeOutput) -> str:
    """Canonical serialization (no whitespace between structural elements)."""
    for f in fields(coe):
        value = getattr(coe, f.name)
        if not value:
            raise ValueError(f"empty section: {f.name}")
        for tag in CANONICAL_TAG_ORDER:
            if tag in value:
                raise ValueError(f"section {f.name} contains structural tag {tag}")
    return (
        f"{THINK_OPEN}"
        f"<L1>{coe.l1}</L1><L2>{coe.l2}</L2><L3>{coe.l3}</L3><L4>{coe.l4}</L4>"
        f"{THINK_CLOSE}"
        f"{ANSWER_OPEN}{coe.answer}{ANSWER_CLOSE}"
    )


def format_verdict(text: str) -> FormatVerdict:
    """Whole-output format check: the string must be exactly the structure,
    up to surrounding whitespace."""
    parsed = parse_coe(text)
    if isinstance(parsed, FormatVerdict):
        return parsed
    stripped = unicodedata.normalize("NFC", text).strip()
    if not (stripped.startswith(THINK_OPEN) and stripped.endswith(ANSWER_CLOSE)):
        return _fail("trailing_content")
    return _VALID


def format_reward(text: str) -> int:
    """Binary reward: 1 iff the entire output conforms to the grammar."""
    return format_verdict(text).reward
