"""
Facet extraction: the K passage words closest to the passage embedding.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union

from .analysis import FACET_ANALYZER
from .corpus import Passage, Qrels, Query
from .embed import EmbeddingProvider, cosine, embed_texts
from .errors import EmbeddingError, ExtractionError, InputError
from .serialization import write_jsonl

logger = logging.getLogger(__name__)

DEFAULT_K = 5


class Polarity(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class Facet:
    words: Tuple[str, ...]
    source_passage_id: str
    query_id: str = ""
    polarity: Optional[Polarity] = None
    short: bool = False

    def __post_init__(self):
        if not self.words:
            raise ExtractionError("a facet needs at least one word")
        folded = [w.casefold() for w in self.words]
        if len(set(folded)) != len(folded):
            raise ExtractionError(f"facet words must be distinct: {self.words}")

    def as_string(self) -> str:
        """Space-joined words in descending salience order, as injected into prompts."""
        return " ".join(self.words)

    def with_polarity(self, polarity: Optional[Polarity], query_id: Optional[str] = None) -> "Facet":
        return Facet(
            words=self.words,
            source_passage_id=self.source_passage_id,
            query_id=self.query_id if query_id is None else query_id,
            polarity=polarity,
            short=self.short,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "qid": self.query_id,
            "pid": self.source_passage_id,
            "polarity": self.polarity.value if self.polarity else None,
            "words": list(self.words),
            "short": self.short,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Facet":
        polarity = data.get("polarity")
        return cls(
            words=tuple(data["words"]),
            source_passage_id=str(data["pid"]),
            query_id=str(data.get("qid", "")),
            polarity=Polarity(polarity) if polarity else None,
            short=bool(data.get("short", False)),
        )


def candidate_tokens(text: str) -> List[str]:
    """Case-folded content tokens of length >= 3, stopwords removed, duplicates collapsed, sorted."""
    return sorted(set(FACET_ANALYZER.tokenize(text)))


def extract_facet(passage: Passage, provider: EmbeddingProvider, k: int = DEFAULT_K, query_id: str = "") -> Facet:
    """
    Rank candidate tokens by cosine to the passage embedding and keep the top k.

    Ties are broken by ascending token. Fewer than k candidates yields a `short` facet.

    Raises:
        ExtractionError: no candidate token, or the passage cannot be embedded
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    candidates = candidate_tokens(passage.text)
    if not candidates:
        raise ExtractionError(f"passage {passage.id!r} has no candidate facet tokens")
    try:
        passage_vec, *token_vecs = embed_texts(provider, [passage.text] + candidates)
    except EmbeddingError as e:
        raise ExtractionError(f"passage {passage.id!r}: {e}") from e

    scored = sorted(
        ((cosine(vec, passage_vec), token) for token, vec in zip(candidates, token_vecs)),
        key=lambda item: (-item[0], item[1]),
    )
    words = tuple(token for _, token in scored[:k])
    return Facet(words=words, source_passage_id=passage.id, query_id=query_id, short=len(words) < k)


def build_facet_sets(
    query: Query,
    qrels: Qrels,
    passages: Mapping[str, Passage],
    provider: EmbeddingProvider,
    k: int = DEFAULT_K,
    positive_ids: Optional[Iterable[str]] = None,
    negative_ids: Optional[Iterable[str]] = None,
) -> Tuple[List[Facet], List[Facet], int]:
    """
    One positive facet per relevant passage and one negative facet per irrelevant passage.

    `positive_ids` / `negative_ids` restrict the passages used (sampling caps).
    Returns (F+, F-, skipped) where `skipped` counts passages whose extraction failed.
    """
    if query.id not in qrels:
        raise InputError(f"query {query.id!r} has no judgments")
    pos_ids = sorted(qrels.positives(query.id) if positive_ids is None else positive_ids)
    neg_ids = sorted(qrels.negatives(query.id) if negative_ids is None else negative_ids)

    skipped = 0
    sets: Dict[Polarity, List[Facet]] = {Polarity.POSITIVE: [], Polarity.NEGATIVE: []}
    for polarity, ids in ((Polarity.POSITIVE, pos_ids), (Polarity.NEGATIVE, neg_ids)):
        for pid in ids:
            try:
                facet = extract_facet(passages[pid], provider, k, query_id=query.id)
            except ExtractionError as e:
                logger.warning("skipping facet for %s/%s: %s", query.id, pid, e)
                skipped += 1
                continue
            sets[polarity].append(facet.with_polarity(polarity))
    return sets[Polarity.POSITIVE], sets[Polarity.NEGATIVE], skipped


def write_facets(facets: Iterable[Facet], path: Union[str, Path]) -> int:
    return write_jsonl((f.to_dict() for f in facets), path)
