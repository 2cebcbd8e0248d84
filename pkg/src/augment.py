"""
Dataset augmentation with mixed-initiative interactions.

Offline: every judged passage of a query yields a facet, a clarifying question
and the answer its relevance implies. Online: the facet comes from the top
BM25 passage and a user simulator answers with a sampled relevant passage as
the hidden intent. Also hosts hard-negative denoising and dataset statistics.
"""

import abc
import logging
import math
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from . import __version__
from .corpus import Collection, Judgments, Passage, Qrels, Query
from .embed import EmbeddingProvider, cosine, embed_texts
from .errors import (
    ExtractionError,
    GatewayError,
    GenerationError,
    InputError,
    IntegrityError,
    OnlineAugmentationError,
)
from .facet import DEFAULT_K, Polarity, build_facet_sets, extract_facet
from .index import DEFAULT_B, DEFAULT_DEPTH, DEFAULT_K1, InvertedIndex, Ranking, bm25_search
from .interact import (
    Answer,
    AnswerSource,
    Interaction,
    QuestionGenerator,
    UserSimulator,
    heuristic_answer,
    serialize_relevance_prompt,
)
from .serialization import iter_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
T = TypeVar("T")
R = TypeVar("R")

INTERACTIONS_FILE = "interactions.jsonl"
MANIFEST_FILE = "manifest.json"


def map_ordered(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """Apply `fn` to every item, in parallel when jobs > 1; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(fn, items))


@dataclass(frozen=True)
class Provenance:
    config_hash: str = ""
    seed: int = 0
    version: str = __version__

    def to_dict(self) -> Dict[str, Any]:
        return {"config_hash": self.config_hash, "seed": self.seed, "version": self.version}


@dataclass
class AugmentedDataset:
    """A collection plus the interactions generated over it."""

    collection: Collection
    interactions: List[Interaction]
    provenance: Provenance = field(default_factory=Provenance)
    skipped: int = 0
    empty_queries: List[str] = field(default_factory=list)

    def __post_init__(self):
        unknown = sorted({i.query_id for i in self.interactions} - set(self.collection.queries))
        if unknown:
            raise IntegrityError(f"interactions reference unknown queries: {unknown[:5]}")

    def __len__(self) -> int:
        return len(self.interactions)

    def by_query(self) -> Dict[str, List[Interaction]]:
        grouped: Dict[str, List[Interaction]] = defaultdict(list)
        for interaction in self.interactions:
            grouped[interaction.query_id].append(interaction)
        return dict(grouped)

    def counts(self) -> Dict[str, int]:
        positive = sum(1 for i in self.interactions if i.answer is Answer.YES)
        return {
            "queries": len({i.query_id for i in self.interactions}),
            "interactions": len(self.interactions),
            "positive": positive,
            "negative": len(self.interactions) - positive,
        }


@dataclass(frozen=True)
class DatasetStats:
    n_queries: int
    n_passages: int
    n_interactions: int
    interactions_per_query: float
    mean_question_length: float
    positive_fraction: float
    negative_fraction: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "queries": self.n_queries,
            "passages": self.n_passages,
            "interactions": self.n_interactions,
            "interactions_per_query": self.interactions_per_query,
            "mean_question_length": self.mean_question_length,
            "positive_fraction": self.positive_fraction,
            "negative_fraction": self.negative_fraction,
        }


def _polarity_of(relevance: Optional[bool]) -> Optional[Polarity]:
    if relevance is None:
        return None
    return Polarity.POSITIVE if relevance else Polarity.NEGATIVE


def _cap(ids: Iterable[str], cap: Optional[int], rng: random.Random) -> List[str]:
    ordered = sorted(ids)
    if not cap or len(ordered) <= cap:
        return ordered
    return sorted(rng.sample(ordered, cap))


def sample_intent(qrels: Qrels, query_id: str, seed: int) -> Optional[str]:
    """One relevant passage id drawn from the query's seeded stream, None without positives."""
    positives = sorted(qrels.positives(query_id))
    if not positives:
        return None
    rng = random.Random(f"{seed}:{query_id}")
    return rng.choice(positives)


def ask_about_passage(
    collection: Collection,
    query: Query,
    passage_id: str,
    provider: EmbeddingProvider,
    generator: QuestionGenerator,
    answerer: UserSimulator,
    intent_passage_id: Optional[str],
    turn: int = 1,
    k: int = DEFAULT_K,
) -> Interaction:
    """
    Extract a facet from one passage, ask about it and collect the simulated answer.

    The facet carries the passage's judged polarity, or none when unjudged.
    """
    facet = extract_facet(collection.passages[passage_id], provider, k, query_id=query.id)
    facet = facet.with_polarity(_polarity_of(collection.qrels.relevance(query.id, passage_id)))
    question = generator.generate(query.text, facet)
    intent_text = collection.passages[intent_passage_id].text if intent_passage_id else None
    answer = answerer.answer(query.text, facet, question.text, intent_text)
    return Interaction(
        query_id=query.id,
        turn=turn,
        facet=facet,
        question=question.text,
        answer=answer,
        intent_passage_id=intent_passage_id,
        generator=question.tag,
        answer_source=answerer.source,
    )


class _QueryResult(NamedTuple):
    interactions: List[Interaction]
    skipped: int


def augment_offline(
    collection: Collection,
    provider: EmbeddingProvider,
    generator: QuestionGenerator,
    k: int = DEFAULT_K,
    max_pos: Optional[int] = None,
    max_neg: Optional[int] = None,
    seed: int = 42,
    jobs: int = 1,
    config_hash: str = "",
) -> AugmentedDataset:
    """
    Build one interaction per judged passage, answered from its polarity.

    Interactions are ordered by query id, positives before negatives, then
    passage id. Caps keep a seeded sample per query; None or 0 keeps everything.
    Facet or generation failures are skipped and counted.
    """
    qrels = collection.qrels
    if not len(qrels):
        raise InputError("offline augmentation needs relevance judgments")

    def augment_query(query_id: str) -> _QueryResult:
        query = collection.queries[query_id]
        rng = random.Random(f"{seed}:{query_id}:caps")
        positive_ids = _cap(qrels.positives(query_id), max_pos, rng)
        negative_ids = _cap(qrels.negatives(query_id), max_neg, rng)
        positives, negatives, skipped = build_facet_sets(
            query, qrels, collection.passages, provider, k,
            positive_ids=positive_ids, negative_ids=negative_ids,
        )
        interactions = []
        for facet in positives + negatives:
            try:
                question = generator.generate(query.text, facet)
            except (GatewayError, GenerationError) as e:
                logger.warning("skipping question for %s/%s: %s", query_id, facet.source_passage_id, e)
                skipped += 1
                continue
            interactions.append(Interaction(
                query_id=query_id,
                turn=1,
                facet=facet,
                question=question.text,
                answer=heuristic_answer(facet),
                intent_passage_id=None,
                generator=question.tag,
                answer_source=AnswerSource.HEURISTIC,
            ))
        return _QueryResult(interactions, skipped)

    query_ids = qrels.query_ids()
    results = map_ordered(augment_query, query_ids, jobs)

    interactions: List[Interaction] = []
    skipped = 0
    empty = []
    for query_id, result in zip(query_ids, results):
        if not result.interactions:
            logger.warning("query %s produced no interactions", query_id)
            empty.append(query_id)
        interactions.extend(result.interactions)
        skipped += result.skipped

    logger.info(
        "offline augmentation: %d interactions over %d queries (%d skipped)",
        len(interactions), len(query_ids) - len(empty), skipped,
    )
    return AugmentedDataset(
        collection=collection,
        interactions=interactions,
        provenance=Provenance(config_hash=config_hash, seed=seed),
        skipped=skipped,
        empty_queries=empty,
    )


class OnlineResult(NamedTuple):
    interaction: Interaction
    ranking: Ranking


def _first_stage(index, query, depth, k1, b, first_stage) -> Ranking:
    ranking = first_stage if first_stage is not None else bm25_search(
        index, query.text, k=depth, k1=k1, b=b, query_id=query.id
    )
    if not len(ranking):
        raise OnlineAugmentationError(f"query {query.id!r}: first-stage retrieval returned nothing")
    return ranking


def _online_intent(collection: Collection, query: Query, answerer: UserSimulator, seed: int) -> Optional[str]:
    intent_id = sample_intent(collection.qrels, query.id, seed)
    if intent_id is None and answerer.requires_intent:
        raise OnlineAugmentationError(
            f"query {query.id!r} has no relevant passage to act as the user intent; "
            f"judge the query or answer with the heuristic simulator"
        )
    return intent_id


def augment_online(
    collection: Collection,
    index: InvertedIndex,
    provider: EmbeddingProvider,
    generator: QuestionGenerator,
    answerer: UserSimulator,
    query: Query,
    depth: int = DEFAULT_DEPTH,
    seed: int = 42,
    k: int = DEFAULT_K,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    first_stage: Optional[Ranking] = None,
) -> OnlineResult:
    """
    Single-turn interaction conditioned on the top-retrieved passage.

    Returns the interaction with the first-stage ranking it was drawn from.

    Raises:
        OnlineAugmentationError: empty retrieval, no intent for an intent-driven
            simulator, or a top passage that cannot be turned into a question
    """
    ranking = _first_stage(index, query, depth, k1, b, first_stage)
    intent_id = _online_intent(collection, query, answerer, seed)
    try:
        interaction = ask_about_passage(
            collection, query, ranking.top(), provider, generator, answerer, intent_id, turn=1, k=k
        )
    except (ExtractionError, InputError) as e:
        raise OnlineAugmentationError(f"query {query.id!r}: {e}") from e
    return OnlineResult(interaction, ranking)


def augment_online_multi(
    collection: Collection,
    index: InvertedIndex,
    provider: EmbeddingProvider,
    generator: QuestionGenerator,
    answerer: UserSimulator,
    query: Query,
    depth: int = DEFAULT_DEPTH,
    top_n: int = 1,
    flop_n: int = 0,
    seed: int = 42,
    k: int = DEFAULT_K,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    first_stage: Optional[Ranking] = None,
) -> Tuple[List[Interaction], Ranking]:
    """
    Several facets per query: the first `top_n` passages act as pseudo-relevant,
    the last `flop_n` as pseudo-irrelevant. Turns number the questions in that order.
    """
    if top_n < 1 or flop_n < 0:
        raise InputError(f"need top_n >= 1 and flop_n >= 0, got {top_n}, {flop_n}")
    ranking = _first_stage(index, query, depth, k1, b, first_stage)
    intent_id = _online_intent(collection, query, answerer, seed)

    ids = ranking.ids
    chosen = ids[:top_n] + [pid for pid in (ids[-flop_n:] if flop_n else []) if pid not in ids[:top_n]]
    interactions = []
    for pid in chosen:
        try:
            interactions.append(ask_about_passage(
                collection, query, pid, provider, generator, answerer, intent_id,
                turn=len(interactions) + 1, k=k,
            ))
        except (ExtractionError, InputError) as e:
            logger.warning("skipping online facet %s/%s: %s", query.id, pid, e)
    if not interactions:
        raise OnlineAugmentationError(f"query {query.id!r}: no usable passage among {len(chosen)} candidates")
    return interactions, ranking


class DenoiseScorer(abc.ABC):
    """Scores how relevant a judged-negative passage looks for its query."""

    name: str

    @abc.abstractmethod
    def score(self, query: Query, passage: Passage, positives: Sequence[Passage]) -> float:
        """Higher means more likely a false negative."""


class EmbeddingDenoiseScorer(DenoiseScorer):
    """Max cosine to the query's positive passages, or to the query itself when it has none."""

    name = "local"

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider

    def score(self, query, passage, positives):
        references = [p.text for p in positives] or [query.text]
        candidate, *others = embed_texts(self.provider, [passage.text] + references)
        return max(cosine(candidate, other) for other in others)


class RemoteDenoiseScorer(DenoiseScorer):
    """log p(true) of the gateway scorer for the answer-free relevance prompt."""

    name = "remote"

    def __init__(self, client):
        self.client = client

    def score(self, query, passage, positives):
        return self.client.score(serialize_relevance_prompt(query.text, passage.text))


class DenoiseResult(NamedTuple):
    collection: Collection
    removed: Dict[str, List[str]]
    score_range: Tuple[float, float]

    @property
    def n_removed(self) -> int:
        return sum(len(ids) for ids in self.removed.values())


def denoise_negatives(collection: Collection, scorer: DenoiseScorer, threshold: float) -> DenoiseResult:
    """
    Drop judged negatives scoring at or above `threshold`.

    Positives are never touched and no passage is ever added.
    """
    qrels = collection.qrels
    judgments: Dict[str, Judgments] = {}
    removed: Dict[str, List[str]] = {}
    observed: List[float] = []
    for query_id in qrels.query_ids():
        query = collection.queries[query_id]
        positives = [collection.passages[pid] for pid in sorted(qrels.positives(query_id))]
        kept, dropped = [], []
        for pid in sorted(qrels.negatives(query_id)):
            value = scorer.score(query, collection.passages[pid], positives)
            observed.append(value)
            (dropped if value >= threshold else kept).append(pid)
        if dropped:
            removed[query_id] = dropped
        judgments[query_id] = Judgments(positives=qrels.positives(query_id), negatives=frozenset(kept))

    score_range = (min(observed), max(observed)) if observed else (math.nan, math.nan)
    if observed and not score_range[0] <= threshold <= score_range[1]:
        logger.warning(
            "denoise threshold %.4g is outside the observed score range [%.4g, %.4g]",
            threshold, score_range[0], score_range[1],
        )
    result = DenoiseResult(collection.with_qrels(Qrels(judgments)), removed, score_range)
    logger.info("denoising removed %d negatives over %d queries", result.n_removed, len(removed))
    return result


def calibrate_denoise_threshold(
    scores: Sequence[float], is_true_negative: Sequence[bool]
) -> Tuple[float, float]:
    """
    Threshold maximizing the precision of retained negatives on a labeled slice.

    Candidates are every observed score plus +inf (keep all); ties go to the
    largest threshold so as many negatives as possible survive.
    Returns (threshold, precision).
    """
    if len(scores) != len(is_true_negative):
        raise InputError("scores and labels must have the same length")
    if not scores:
        raise InputError("calibration needs at least one labeled negative")
    values = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(is_true_negative, dtype=bool)

    best_threshold, best_precision = math.inf, -1.0
    for threshold in sorted(set(values.tolist()) | {math.inf}):
        retained = values < threshold
        if not retained.any():
            continue
        precision = float(labels[retained].mean())
        if precision >= best_precision:
            best_threshold, best_precision = threshold, precision
    return best_threshold, best_precision


def compute_stats(dataset: AugmentedDataset) -> DatasetStats:
    """Corpus statistics; question length counts whitespace-separated tokens."""
    if not dataset.interactions:
        raise InputError("cannot compute statistics of an empty dataset")
    per_query = dataset.by_query()
    n = len(dataset.interactions)
    positive = sum(1 for i in dataset.interactions if i.answer is Answer.YES)
    return DatasetStats(
        n_queries=len(per_query),
        n_passages=len({i.facet.source_passage_id for i in dataset.interactions}),
        n_interactions=n,
        interactions_per_query=n / len(per_query),
        mean_question_length=sum(len(i.question.split()) for i in dataset.interactions) / n,
        positive_fraction=positive / n,
        negative_fraction=(n - positive) / n,
    )


def question_similarity(dataset: AugmentedDataset, provider: EmbeddingProvider) -> Dict[str, Dict[str, float]]:
    """
    Mean cosine of each question to its source passage and to its query, per facet polarity.

    Questions leaning toward their passage rather than the bare query show the
    facet actually steers generation.
    """
    sums: Dict[str, List[float]] = defaultdict(lambda: [0.0, 0.0, 0])
    for interaction in dataset.interactions:
        polarity = interaction.facet.polarity.value if interaction.facet.polarity else "none"
        passage = dataset.collection.passages[interaction.facet.source_passage_id]
        query = dataset.collection.queries[interaction.query_id]
        question_vec, passage_vec, query_vec = embed_texts(
            provider, [interaction.question, passage.text, query.text]
        )
        acc = sums[polarity]
        acc[0] += cosine(question_vec, passage_vec)
        acc[1] += cosine(question_vec, query_vec)
        acc[2] += 1
    return {
        polarity: {"passage": p / n, "query": q / n, "n": n}
        for polarity, (p, q, n) in sorted(sums.items())
    }


def write_dataset(dataset: AugmentedDataset, out_dir: PathLike, extra: Optional[Mapping[str, Any]] = None) -> Path:
    """Write interactions.jsonl and its manifest; returns the JSONL path."""
    out_dir = Path(out_dir)
    path = out_dir / INTERACTIONS_FILE
    write_jsonl((i.to_dict() for i in dataset.interactions), path)
    manifest = {
        **dataset.provenance.to_dict(),
        "counts": dataset.counts(),
        "skipped": dataset.skipped,
        "empty_queries": dataset.empty_queries,
    }
    manifest.update(extra or {})
    write_json(manifest, out_dir / MANIFEST_FILE)
    return path


def read_interactions(path: PathLike) -> List[Interaction]:
    return [Interaction.from_dict(record) for record in iter_jsonl(path)]
