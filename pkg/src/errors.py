"""
Exception hierarchy for clarisim.

Every error carries a ``category`` and an ``exit_code`` so the command line
can report a categorized failure without inspecting the exception type.
"""

from typing import Optional


class ClarisimError(Exception):
    """Base class for all clarisim errors."""

    category = "error"
    exit_code = 1


class ConfigError(ClarisimError):
    """Invalid or unreadable configuration."""

    category = "config"
    exit_code = 2


class ParseError(ClarisimError):
    """Malformed input file."""

    category = "parse"
    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, line_no: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}:{line_no}: " if line_no is not None else f"{path}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line_no = line_no


class IntegrityError(ClarisimError):
    """Duplicate ids, dangling references or overlapping judgments."""

    category = "integrity"
    exit_code = 4


class InputError(ClarisimError):
    """A caller passed an argument outside the operation's precondition."""

    category = "input"
    exit_code = 5


class EmbeddingError(ClarisimError):
    """An embedding provider could not produce a unit vector."""

    category = "embedding"
    exit_code = 6


class ExtractionError(ClarisimError):
    """No facet could be extracted from a passage."""

    category = "extraction"
    exit_code = 7


class GatewayError(ClarisimError):
    """Transport failure or non-2xx answer from the model gateway."""

    category = "gateway"
    exit_code = 8

    def __init__(self, message: str, attempts: int = 1, status: Optional[int] = None):
        super().__init__(f"{message} (attempts={attempts})")
        self.attempts = attempts
        self.status = status


class ProtocolError(ClarisimError):
    """The gateway answered with a body that violates the wire protocol."""

    category = "protocol"
    exit_code = 9


class GenerationError(ClarisimError):
    """The question generator returned nothing usable."""

    category = "generation"
    exit_code = 10


class ScoringError(ClarisimError):
    """A reranker could not score a candidate."""

    category = "scoring"
    exit_code = 11


class RetrievalError(ClarisimError):
    """Index construction or lookup failed."""

    category = "retrieval"
    exit_code = 12


class OnlineAugmentationError(ClarisimError):
    """Online interaction generation failed for a query."""

    category = "augmentation"
    exit_code = 13


__all__ = [
    "ClarisimError",
    "ConfigError",
    "ParseError",
    "IntegrityError",
    "InputError",
    "EmbeddingError",
    "ExtractionError",
    "GatewayError",
    "ProtocolError",
    "GenerationError",
    "ScoringError",
    "RetrievalError",
    "OnlineAugmentationError",
]
