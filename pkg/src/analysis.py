"""
Text analysis shared by indexing, embedding, facet extraction and simulation.

Text is stored verbatim by the corpus loaders; everything here is a view.
"""

from dataclasses import dataclass
from typing import FrozenSet, List

import regex
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

STOPWORDS: FrozenSet[str] = frozenset(ENGLISH_STOP_WORDS)

_TOKEN_RE = regex.compile(r"[\p{L}\p{N}]+")


def raw_tokens(text: str) -> List[str]:
    """Case-folded alphanumeric runs, nothing filtered."""
    return [t.casefold() for t in _TOKEN_RE.findall(text)]


@dataclass(frozen=True)
class Analyzer:
    """Lowercase, split on non-alphanumerics, drop short tokens and optionally stopwords."""

    min_token_length: int = 2
    remove_stopwords: bool = True

    def tokenize(self, text: str) -> List[str]:
        tokens = [t for t in raw_tokens(text) if len(t) >= self.min_token_length]
        if self.remove_stopwords:
            tokens = [t for t in tokens if t not in STOPWORDS]
        return tokens

    def to_dict(self) -> dict:
        return {"min_token_length": self.min_token_length, "remove_stopwords": self.remove_stopwords}


INDEX_ANALYZER = Analyzer()
# Embedding keeps stopwords; IDF weighting already pushes them down.
EMBED_ANALYZER = Analyzer(min_token_length=2, remove_stopwords=False)
# Facet candidates: content words only.
FACET_ANALYZER = Analyzer(min_token_length=3, remove_stopwords=True)
