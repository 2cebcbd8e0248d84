"""
Clarifying-question generators.

Every generator turns (query, facet) into a question and reports which
generator actually produced it, so fallbacks stay visible in the output.
"""

import abc
import logging
from typing import NamedTuple

from ..errors import GatewayError, GenerationError
from ..facet import Facet
from .prompts import serialize_cq_prompt
from .types import GeneratorTag

logger = logging.getLogger(__name__)

DEFAULT_NUCLEUS_P = 0.95


class GeneratedQuestion(NamedTuple):
    text: str
    tag: GeneratorTag


def template_question(facet: Facet) -> str:
    """`are you looking for {facet words}?`"""
    return f"are you looking for {facet.as_string()}?".lower()


def remote_question(client, query_text: str, facet_string: str, nucleus_p: float = DEFAULT_NUCLEUS_P) -> str:
    """
    Ask the gateway's seq2seq generator for a question.

    Raises:
        GatewayError: transport or HTTP failure after retries
        GenerationError: the generator returned only whitespace
    """
    text = client.generate(serialize_cq_prompt(query_text, facet_string), nucleus_p).strip()
    if not text:
        raise GenerationError("gateway generated an empty question")
    return text


class QuestionGenerator(abc.ABC):
    """Interface shared by the template and remote generators."""

    tag: GeneratorTag

    @abc.abstractmethod
    def generate(self, query_text: str, facet: Facet) -> GeneratedQuestion:
        """Produce a clarifying question for the query conditioned on the facet."""


class TemplateGenerator(QuestionGenerator):
    tag = GeneratorTag.TEMPLATE

    def generate(self, query_text: str, facet: Facet) -> GeneratedQuestion:
        return GeneratedQuestion(template_question(facet), self.tag)


class RemoteGenerator(QuestionGenerator):
    tag = GeneratorTag.REMOTE

    def __init__(self, client, nucleus_p: float = DEFAULT_NUCLEUS_P, fallback_to_template: bool = True):
        self.client = client
        self.nucleus_p = nucleus_p
        self.fallback_to_template = fallback_to_template

    def generate(self, query_text: str, facet: Facet) -> GeneratedQuestion:
        try:
            return GeneratedQuestion(remote_question(self.client, query_text, facet.as_string(), self.nucleus_p), self.tag)
        except (GatewayError, GenerationError) as e:
            if not self.fallback_to_template:
                raise
            logger.warning("falling back to template question for %s: %s", facet.source_passage_id, e)
            return GeneratedQuestion(template_question(facet), GeneratorTag.TEMPLATE)
