"""
User simulators answering clarifying questions with yes or no.
"""

import abc
import logging
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

from ..analysis import INDEX_ANALYZER, raw_tokens
from ..errors import InputError, ProtocolError
from ..facet import Facet, Polarity
from .prompts import serialize_us_prompt
from .types import Answer, AnswerSource

logger = logging.getLogger(__name__)

DEFAULT_THETA = 0.6
THETA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))

BOILERPLATE = frozenset({
    "are", "you", "looking", "for", "do", "want", "to", "know", "the", "a",
    "of", "is", "in", "about", "interested", "referring",
})


def heuristic_answer(facet: Facet) -> Answer:
    """yes iff the facet comes from a relevant passage."""
    if facet.polarity is None:
        raise InputError(f"facet from {facet.source_passage_id!r} has no polarity")
    return Answer.YES if facet.polarity is Polarity.POSITIVE else Answer.NO


def question_content_tokens(query_text: str, question: str) -> set:
    return set(INDEX_ANALYZER.tokenize(question)) - BOILERPLATE - set(raw_tokens(query_text))


def intent_coverage(query_text: str, intent_text: str, question: str) -> Optional[float]:
    """Fraction of question content tokens found in the intent; None when there are none."""
    content = question_content_tokens(query_text, question)
    if not content:
        return None
    return len(content & set(raw_tokens(intent_text))) / len(content)


def lexical_sim_answer(query_text: str, intent_text: str, question: str, theta: float = DEFAULT_THETA) -> Answer:
    if not intent_text or not intent_text.strip():
        raise InputError("intent text must be non-empty")
    if not 0.0 <= theta <= 1.0:
        raise InputError(f"theta must be in [0, 1], got {theta}")
    coverage = intent_coverage(query_text, intent_text, question)
    if coverage is None:
        return Answer.NO
    return Answer.YES if coverage >= theta else Answer.NO


def remote_answer(client, query_text: str, intent_text: str, question: str) -> Answer:
    """Ask the gateway simulator; anything but yes/no is a protocol error."""
    raw = client.answer(serialize_us_prompt(query_text, intent_text, question))
    normalized = raw.strip().casefold()
    if normalized == "yes":
        return Answer.YES
    if normalized == "no":
        return Answer.NO
    raise ProtocolError(f"simulator answered {raw!r}, expected 'yes' or 'no'")


class CalibrationExample(NamedTuple):
    query_text: str
    intent_text: str
    question: str
    label: Answer


def calibrate_theta(
    examples: Iterable[CalibrationExample],
    grid: Sequence[float] = THETA_GRID,
) -> Tuple[float, float]:
    """Pick the θ agreeing most often with the reference labels; ties go to the smaller θ."""
    examples = list(examples)
    if not examples:
        raise InputError("calibration needs at least one example")
    coverages: List[Optional[float]] = [intent_coverage(e.query_text, e.intent_text, e.question) for e in examples]
    best_theta, best_agreement = grid[0], -1.0
    for theta in grid:
        hits = 0
        for coverage, example in zip(coverages, examples):
            predicted = Answer.YES if coverage is not None and coverage >= theta else Answer.NO
            hits += predicted is example.label
        agreement = hits / len(examples)
        if agreement > best_agreement:
            best_theta, best_agreement = theta, agreement
    logger.info("calibrated theta=%.2f (agreement %.3f over %d examples)", best_theta, best_agreement, len(examples))
    return best_theta, best_agreement


class UserSimulator(abc.ABC):
    """Answers a clarifying question on behalf of a user with a given intent."""

    source: AnswerSource
    requires_intent: bool = True
    requires_polarity: bool = False

    @abc.abstractmethod
    def answer(self, query_text: str, facet: Facet, question: str, intent_text: Optional[str]) -> Answer:
        """Return yes or no."""


class HeuristicSimulator(UserSimulator):
    source = AnswerSource.HEURISTIC
    requires_intent = False
    requires_polarity = True

    def answer(self, query_text, facet, question, intent_text=None):
        return heuristic_answer(facet)


class LexicalSimulator(UserSimulator):
    source = AnswerSource.LEXICAL_SIM

    def __init__(self, theta: float = DEFAULT_THETA):
        self.theta = theta

    def answer(self, query_text, facet, question, intent_text=None):
        if intent_text is None:
            raise InputError("the lexical simulator needs an intent passage")
        return lexical_sim_answer(query_text, intent_text, question, self.theta)


class RemoteSimulator(UserSimulator):
    source = AnswerSource.REMOTE

    def __init__(self, client):
        self.client = client

    def answer(self, query_text, facet, question, intent_text=None):
        if intent_text is None:
            raise InputError("the remote simulator needs an intent passage")
        return remote_answer(self.client, query_text, intent_text, question)
