"""
Prompt serialization, question generation, user simulation and the gateway client.
"""

from .generators import (
    GeneratedQuestion,
    QuestionGenerator,
    RemoteGenerator,
    TemplateGenerator,
    remote_question,
    template_question,
)
from .prompts import (
    parse_prompt,
    serialize_cq_prompt,
    serialize_rank_prompt,
    serialize_relevance_prompt,
    serialize_us_prompt,
)
from .simulators import (
    CalibrationExample,
    HeuristicSimulator,
    LexicalSimulator,
    RemoteSimulator,
    UserSimulator,
    calibrate_theta,
    heuristic_answer,
    lexical_sim_answer,
    remote_answer,
)
from .types import Answer, AnswerSource, GeneratorTag, Interaction

__all__ = [
    "Answer",
    "AnswerSource",
    "CalibrationExample",
    "GeneratedQuestion",
    "GeneratorTag",
    "HeuristicSimulator",
    "Interaction",
    "LexicalSimulator",
    "QuestionGenerator",
    "RemoteGenerator",
    "RemoteSimulator",
    "TemplateGenerator",
    "UserSimulator",
    "calibrate_theta",
    "heuristic_answer",
    "lexical_sim_answer",
    "parse_prompt",
    "remote_answer",
    "remote_question",
    "serialize_cq_prompt",
    "serialize_rank_prompt",
    "serialize_relevance_prompt",
    "serialize_us_prompt",
    "template_question",
]
