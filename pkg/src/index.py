"""
Inverted index, BM25 first-stage ranking and RM3 query expansion.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import orjson

from .analysis import INDEX_ANALYZER, Analyzer
from .corpus import Passage
from .errors import InputError, ParseError, RetrievalError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

INDEX_FORMAT_VERSION = 1

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4
DEFAULT_DEPTH = 100


@dataclass(frozen=True)
class Ranking:
    """Ordered (passage id, score) list for one query, tagged with the stage that produced it."""

    query_id: str
    entries: Tuple[Tuple[str, float], ...]
    tag: str

    def __post_init__(self):
        seen = set()
        previous = math.inf
        for pid, score in self.entries:
            if pid in seen:
                raise InputError(f"ranking {self.query_id!r}/{self.tag}: duplicate passage id {pid!r}")
            if score > previous:
                raise InputError(f"ranking {self.query_id!r}/{self.tag}: scores must be non-increasing")
            seen.add(pid)
            previous = score

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def ids(self) -> List[str]:
        return [pid for pid, _ in self.entries]

    @cached_property
    def scores(self) -> Dict[str, float]:
        return dict(self.entries)

    @cached_property
    def score_range(self) -> Tuple[float, float]:
        values = [s for _, s in self.entries]
        return (min(values), max(values)) if values else (0.0, 0.0)

    def top(self) -> Optional[str]:
        return self.entries[0][0] if self.entries else None

    def rank_of(self, passage_id: str) -> Optional[int]:
        for rank, (pid, _) in enumerate(self.entries, start=1):
            if pid == passage_id:
                return rank
        return None

    def retag(self, tag: str) -> "Ranking":
        return Ranking(self.query_id, self.entries, tag)


def ranking_from_scores(query_id: str, scores: Mapping[str, float], tag: str, k: Optional[int] = None) -> Ranking:
    """Sort by descending score, ties by ascending passage id."""
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    if k is not None:
        ordered = ordered[:k]
    return Ranking(query_id, tuple(ordered), tag)


@dataclass
class InvertedIndex:
    analyzer: Analyzer
    postings: Dict[str, List[Tuple[str, int]]] = field(default_factory=dict)
    doc_lengths: Dict[str, int] = field(default_factory=dict)
    doc_terms: Dict[str, Dict[str, int]] = field(default_factory=dict)

    @property
    def n_docs(self) -> int:
        return len(self.doc_lengths)

    @cached_property
    def avg_length(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return sum(self.doc_lengths.values()) / len(self.doc_lengths)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def _index_from_terms(analyzer: Analyzer, doc_terms: Dict[str, Dict[str, int]]) -> InvertedIndex:
    postings: Dict[str, List[Tuple[str, int]]] = {}
    doc_lengths: Dict[str, int] = {}
    for pid in sorted(doc_terms):
        terms = doc_terms[pid]
        doc_lengths[pid] = sum(terms.values())
        for term, tf in terms.items():
            postings.setdefault(term, []).append((pid, tf))
    return InvertedIndex(analyzer=analyzer, postings=postings, doc_lengths=doc_lengths, doc_terms=doc_terms)


def build_index(passages: Mapping[str, Passage], analyzer: Analyzer = INDEX_ANALYZER) -> InvertedIndex:
    """Build the index; deterministic for a fixed analyzer regardless of input order."""
    if not passages:
        raise RetrievalError("cannot build an index over an empty collection")
    doc_terms = {pid: dict(sorted(Counter(analyzer.tokenize(passages[pid].text)).items()))
                 for pid in sorted(passages)}
    index = _index_from_terms(analyzer, doc_terms)
    logger.info("indexed %d passages, %d terms", index.n_docs, len(index.postings))
    return index


def search_weighted(
    index: InvertedIndex,
    weights: Mapping[str, float],
    k: int = DEFAULT_DEPTH,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    query_id: str = "",
    tag: str = "bm25",
) -> Ranking:
    """BM25 where each term's contribution is multiplied by its query weight."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    avg = index.avg_length or 1.0
    scores: Dict[str, float] = {}
    for term in sorted(weights):
        weight = weights[term]
        if weight <= 0 or term not in index.postings:
            continue
        idf = index.idf(term)
        for pid, tf in index.postings[term]:
            norm = k1 * (1.0 - b + b * index.doc_lengths[pid] / avg)
            scores[pid] = scores.get(pid, 0.0) + weight * idf * tf * (k1 + 1.0) / (tf + norm)
    return ranking_from_scores(query_id, scores, tag, k)


def bm25_search(
    index: InvertedIndex,
    query_text: str,
    k: int = DEFAULT_DEPTH,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    query_id: str = "",
) -> Ranking:
    """Top-k passages by BM25; a query with no indexable term yields an empty ranking."""
    weights = Counter(index.analyzer.tokenize(query_text))
    return search_weighted(index, weights, k=k, k1=k1, b=b, query_id=query_id, tag="bm25")


def query_model(index: InvertedIndex, query_text: str) -> Dict[str, float]:
    """Maximum-likelihood query model."""
    counts = Counter(index.analyzer.tokenize(query_text))
    total = sum(counts.values())
    return {t: c / total for t, c in sorted(counts.items())} if total else {}


def rm3_expand(
    index: InvertedIndex,
    query_text: str,
    fb_docs: int = 10,
    fb_terms: int = 10,
    mix: float = 0.5,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    first_pass: Optional[Ranking] = None,
) -> Dict[str, float]:
    """
    Interpolate the original query model with a relevance model from the top feedback documents.

    P(w|R) is the score-weighted average of P(w|d) over the feedback set, truncated
    to `fb_terms` terms and renormalized; the result is
    `mix * P_ml(w|q) + (1 - mix) * P(w|R)` with zero-weight terms removed.
    """
    if fb_docs < 1:
        raise InputError(f"fb_docs must be >= 1, got {fb_docs}")
    if not 0.0 <= mix <= 1.0:
        raise InputError(f"mix must be in [0, 1], got {mix}")
    original = query_model(index, query_text)
    if first_pass is None:
        first_pass = bm25_search(index, query_text, k=fb_docs, k1=k1, b=b)
    feedback = first_pass.entries[:fb_docs]
    if not feedback or not original:
        return original

    total_score = sum(score for _, score in feedback)
    relevance: Dict[str, float] = {}
    for pid, score in feedback:
        length = index.doc_lengths.get(pid, 0)
        if not length:
            continue
        doc_weight = score / total_score if total_score > 0 else 1.0 / len(feedback)
        for term, tf in index.doc_terms[pid].items():
            relevance[term] = relevance.get(term, 0.0) + doc_weight * tf / length

    top_terms = sorted(relevance.items(), key=lambda item: (-item[1], item[0]))[:fb_terms]
    mass = sum(w for _, w in top_terms)
    relevance = {t: w / mass for t, w in top_terms} if mass > 0 else {}

    expanded: Dict[str, float] = {}
    for term in set(original) | set(relevance):
        weight = mix * original.get(term, 0.0) + (1.0 - mix) * relevance.get(term, 0.0)
        if weight > 0:
            expanded[term] = weight
    return dict(sorted(expanded.items(), key=lambda item: (-item[1], item[0])))


def rm3_search(
    index: InvertedIndex,
    query_text: str,
    k: int = DEFAULT_DEPTH,
    fb_docs: int = 10,
    fb_terms: int = 10,
    mix: float = 0.5,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    query_id: str = "",
) -> Ranking:
    weights = rm3_expand(index, query_text, fb_docs=fb_docs, fb_terms=fb_terms, mix=mix, k1=k1, b=b)
    return search_weighted(index, weights, k=k, k1=k1, b=b, query_id=query_id, tag="rm3")


def save_index(index: InvertedIndex, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "analyzer": index.analyzer.to_dict(),
        "documents": {pid: index.doc_terms[pid] for pid in sorted(index.doc_terms)},
    }
    path.write_bytes(orjson.dumps(payload))


def load_index(path: PathLike) -> InvertedIndex:
    path = Path(path)
    if not path.exists():
        raise ParseError("index artifact not found", str(path))
    try:
        payload = orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise ParseError(f"corrupt index artifact: {e}", str(path)) from e
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise ParseError(f"unsupported index format version {version!r}", str(path))
    analyzer = Analyzer(**payload["analyzer"])
    return _index_from_terms(analyzer, payload["documents"])


def write_run(rankings: Iterable[Ranking], path: PathLike) -> None:
    """TREC run format: `qid Q0 pid rank score tag`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for ranking in sorted(rankings, key=lambda r: r.query_id):
            for rank, (pid, score) in enumerate(ranking.entries, start=1):
                f.write(f"{ranking.query_id} Q0 {pid} {rank} {score:.6f} {ranking.tag}\n")


def read_run(path: PathLike) -> Dict[str, Ranking]:
    path = Path(path)
    if not path.exists():
        raise ParseError("run file not found", str(path))
    rows: Dict[str, List[Tuple[int, str, float]]] = {}
    tags: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(f"expected 6 columns, got {len(parts)}", str(path), line_no)
            qid, _q0, pid, rank, score, tag = parts
            try:
                rows.setdefault(qid, []).append((int(rank), pid, float(score)))
            except ValueError as e:
                raise ParseError(f"bad rank or score: {e}", str(path), line_no) from e
            tags.setdefault(qid, tag)
    runs = {}
    for qid, entries in rows.items():
        entries.sort()
        try:
            runs[qid] = Ranking(qid, tuple((pid, score) for _, pid, score in entries), tags[qid])
        except InputError as e:
            raise ParseError(str(e), str(path)) from e
    return runs
