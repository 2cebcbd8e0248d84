"""
Prompt serializations sent to the model gateway.

Layouts are byte-exact; fields are inserted verbatim.
"""

from typing import List, Sequence

from ..errors import InputError, ParseError

CQ_FIELDS = ("Query", "Facet")
US_FIELDS = ("Query", "Intent", "Question")
RANK_FIELDS = ("Query", "Document", "Question", "Answer")
RELEVANCE_FIELDS = ("Query", "Document")


def _serialize(fields: Sequence[str], values: Sequence[str]) -> str:
    for name, value in zip(fields, values):
        if not value:
            raise InputError(f"prompt field {name!r} must be non-empty")
    return " ".join(f"{name}: {value}" for name, value in zip(fields, values))


def serialize_cq_prompt(query_text: str, facet_string: str) -> str:
    """`Query: {q} Facet: {f}`"""
    return _serialize(CQ_FIELDS, (query_text, facet_string))


def serialize_us_prompt(query_text: str, intent_text: str, question: str) -> str:
    """`Query: {q} Intent: {int} Question: {cq}`"""
    return _serialize(US_FIELDS, (query_text, intent_text, question))


def serialize_rank_prompt(query_text: str, passage_text: str, question: str, answer: str) -> str:
    """`Query: {q} Document: {d} Question: {cq} Answer: {a}`"""
    return _serialize(RANK_FIELDS, (query_text, passage_text, question, answer))


def serialize_relevance_prompt(query_text: str, passage_text: str) -> str:
    """`Query: {q} Document: {d}`, the answer-free relevance prompt."""
    return _serialize(RELEVANCE_FIELDS, (query_text, passage_text))


def parse_prompt(prompt: str, fields: Sequence[str]) -> List[str]:
    """Recover field values by splitting on the literal markers (marker-free contents assumed)."""
    head = f"{fields[0]}: "
    if not prompt.startswith(head):
        raise ParseError(f"prompt does not start with {head!r}")
    rest = prompt[len(head):]
    values = []
    for name in fields[1:]:
        value, sep, rest = rest.partition(f" {name}: ")
        if not sep:
            raise ParseError(f"prompt is missing the {name!r} marker")
        values.append(value)
    values.append(rest)
    return values
