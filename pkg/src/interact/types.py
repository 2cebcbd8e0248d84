"""
Mixed-initiative interaction records.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Mapping, Optional

from ..errors import InputError, ParseError
from ..facet import Facet, Polarity


class Answer(str, Enum):
    YES = "yes"
    NO = "no"

    @property
    def sign(self) -> int:
        return 1 if self is Answer.YES else -1


class GeneratorTag(str, Enum):
    TEMPLATE = "template"
    REMOTE = "remote"


class AnswerSource(str, Enum):
    HEURISTIC = "heuristic"
    LEXICAL_SIM = "lexical_sim"
    REMOTE = "remote"


@dataclass(frozen=True)
class Interaction:
    """One clarifying question and its yes/no answer for a query."""

    query_id: str
    turn: int
    facet: Facet
    question: str
    answer: Answer
    intent_passage_id: Optional[str]
    generator: GeneratorTag
    answer_source: AnswerSource

    def __post_init__(self):
        if self.turn < 1:
            raise InputError(f"turn must be >= 1, got {self.turn}")
        if not self.question.strip():
            raise InputError("question must be non-empty")
        if self.answer_source is AnswerSource.HEURISTIC:
            expected = Answer.YES if self.facet.polarity is Polarity.POSITIVE else Answer.NO
            if self.answer is not expected:
                raise InputError(
                    f"heuristic answer {self.answer.value!r} disagrees with facet polarity {self.facet.polarity}"
                )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "qid": self.query_id,
            "turn": self.turn,
            "facet": self.facet.to_dict(),
            "question": self.question,
            "answer": self.answer.value,
            "intent_pid": self.intent_passage_id,
            "gen": self.generator.value,
            "ans_src": self.answer_source.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Interaction":
        try:
            return cls(
                query_id=str(data["qid"]),
                turn=int(data["turn"]),
                facet=Facet.from_dict(data["facet"]),
                question=data["question"],
                answer=Answer(data["answer"]),
                intent_passage_id=data.get("intent_pid"),
                generator=GeneratorTag(data["gen"]),
                answer_source=AnswerSource(data["ans_src"]),
            )
        except (KeyError, ValueError, TypeError) as e:
            raise ParseError(f"malformed interaction record: {e}") from e
