"""
Second-stage reranking with clarifying-question interactions.

A scorer returns log p(relevant | query, passage, question, answer). A session
asks one question per turn and ranks candidates by the running sum of those
log scores.
"""

import abc
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set

import numpy as np

from .analysis import raw_tokens
from .augment import ask_about_passage, map_ordered, sample_intent
from .corpus import Collection, Passage, Query
from .embed import EmbeddingProvider
from .errors import ExtractionError, InputError, OnlineAugmentationError, ScoringError
from .facet import DEFAULT_K
from .index import DEFAULT_B, DEFAULT_DEPTH, DEFAULT_K1, InvertedIndex, Ranking, bm25_search
from .interact import Interaction, QuestionGenerator, UserSimulator, serialize_rank_prompt
from .metrics import mrr_at_k, ranking_entropy

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 2.0
DEFAULT_T_MAX = 5
FACET_SOURCES = ("updated", "initial")


def coverage(words: Sequence[str], passage_text: str) -> float:
    """Fraction of the words present among the passage tokens."""
    if not words:
        return 0.0
    tokens = set(raw_tokens(passage_text))
    return sum(1 for w in words if w.casefold() in tokens) / len(words)


def log_sigmoid(x: float) -> float:
    return float(-np.logaddexp(0.0, -x))


def local_score(
    cohort: Ranking,
    passage: Passage,
    interaction: Interaction,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
) -> float:
    """
    log sigmoid(alpha * bm25n + beta * sign(answer) * coverage(facet, passage)).

    bm25n is the passage's first-stage score min-max normalized over `cohort`;
    a constant cohort normalizes to 0.5.

    Raises:
        ScoringError: the passage is not part of the cohort
    """
    scores = cohort.scores
    if passage.id not in scores:
        raise ScoringError(f"passage {passage.id!r} is outside the candidate list of {cohort.query_id!r}")
    low, high = cohort.score_range
    bm25n = 0.5 if high == low else (scores[passage.id] - low) / (high - low)
    x = alpha * bm25n + beta * interaction.answer.sign * coverage(interaction.facet.words, passage.text)
    return log_sigmoid(x)


def remote_score(client, query: Query, passage: Passage, interaction: Interaction) -> float:
    prompt = serialize_rank_prompt(query.text, passage.text, interaction.question, interaction.answer.value)
    return client.score(prompt)


class Scorer(abc.ABC):
    """log p(relevant | q, p, cq, a); deterministic for fixed inputs."""

    name: str

    @abc.abstractmethod
    def score(self, query: Query, passage: Passage, interaction: Interaction, cohort: Ranking) -> float:
        """Score one candidate of `cohort`."""

    def score_all(
        self, query: Query, cohort: Ranking, interaction: Interaction, passages: Mapping[str, Passage]
    ) -> Dict[str, float]:
        return {pid: self.score(query, passages[pid], interaction, cohort) for pid in cohort.ids}


class LocalScorer(Scorer):
    name = "local"

    def __init__(self, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA):
        self.alpha = alpha
        self.beta = beta

    def score(self, query, passage, interaction, cohort):
        return local_score(cohort, passage, interaction, self.alpha, self.beta)


class RemoteScorer(Scorer):
    name = "remote"

    def __init__(self, client, jobs: int = 1):
        self.client = client
        self.jobs = jobs

    def score(self, query, passage, interaction, cohort):
        return remote_score(self.client, query, passage, interaction)

    def score_all(self, query, cohort, interaction, passages):
        ids = cohort.ids
        values = map_ordered(lambda pid: self.score(query, passages[pid], interaction, cohort), ids, self.jobs)
        return dict(zip(ids, values))


def _sorted_by_total(cohort: Ranking, totals: Mapping[str, float], tag: str) -> Ranking:
    """Descending total; ties keep the cohort order."""
    order = sorted(enumerate(cohort.ids), key=lambda item: (-totals[item[1]], item[0]))
    return Ranking(cohort.query_id, tuple((pid, totals[pid]) for _, pid in order), tag)


def rerank_interactions(
    ranking: Ranking,
    scorer: Scorer,
    query: Query,
    interactions: Sequence[Interaction],
    passages: Mapping[str, Passage],
) -> Ranking:
    """Rank by the summed log scores of every interaction; tag carries the last turn."""
    if not len(ranking):
        raise InputError(f"cannot rerank an empty ranking for {ranking.query_id!r}")
    if not interactions:
        raise InputError(f"no interaction to rerank {ranking.query_id!r} with")
    totals = dict.fromkeys(ranking.ids, 0.0)
    for interaction in sorted(interactions, key=lambda i: i.turn):
        for pid, value in scorer.score_all(query, ranking, interaction, passages).items():
            totals[pid] += value
    last_turn = max(i.turn for i in interactions)
    return _sorted_by_total(ranking, totals, f"rerank:t={last_turn}")


def rerank_once(
    ranking: Ranking,
    scorer: Scorer,
    query: Query,
    interaction: Interaction,
    passages: Mapping[str, Passage],
) -> Ranking:
    """Reorder the candidates by their score under one interaction."""
    return rerank_interactions(ranking, scorer, query, [interaction], passages)


def rerank_all(
    rankings: Mapping[str, Ranking],
    scorer: Scorer,
    queries: Mapping[str, Query],
    interactions: Iterable[Interaction],
    passages: Mapping[str, Passage],
    jobs: int = 1,
) -> Dict[str, Ranking]:
    """
    Rerank every query that has interactions; the others keep their first-stage order.
    """
    grouped: Dict[str, List[Interaction]] = defaultdict(list)
    for interaction in interactions:
        grouped[interaction.query_id].append(interaction)

    query_ids = sorted(rankings)

    def rerank_query(query_id: str) -> Ranking:
        ranking = rankings[query_id]
        if query_id not in grouped or not len(ranking):
            return ranking
        return rerank_interactions(ranking, scorer, queries[query_id], grouped[query_id], passages)

    reranked = dict(zip(query_ids, map_ordered(rerank_query, query_ids, jobs)))
    logger.info("reranked %d of %d queries", sum(1 for q in query_ids if q in grouped), len(query_ids))
    return reranked


@dataclass
class Turn:
    interaction: Interaction
    ranking: Ranking
    mrr: Optional[float]
    entropy: float


@dataclass
class Session:
    """Running state of a multi-turn clarification session for one query."""

    query: Query
    initial: Ranking
    intent_passage_id: Optional[str] = None
    mrr_k: int = 10
    turns: List[Turn] = field(default_factory=list)
    cumulative: Dict[str, float] = field(default_factory=dict)
    used: Set[str] = field(default_factory=set)
    skipped: Set[str] = field(default_factory=set)
    initial_mrr: Optional[float] = None

    def __post_init__(self):
        if not self.cumulative:
            self.cumulative = dict.fromkeys(self.initial.ids, 0.0)

    @property
    def T(self) -> int:
        return len(self.turns)

    @property
    def current(self) -> Ranking:
        return self.turns[-1].ranking if self.turns else self.initial

    @property
    def interactions(self) -> List[Interaction]:
        return [turn.interaction for turn in self.turns]

    def rankings(self) -> List[Ranking]:
        """Initial ranking followed by the ranking after each turn."""
        return [self.initial] + [turn.ranking for turn in self.turns]

    def trace_records(self) -> List[Dict[str, Any]]:
        """Turn 0 holds the first-stage ranking; later records carry the interaction."""
        records = [{
            "qid": self.query.id,
            "turn": 0,
            "tag": self.initial.tag,
            "interaction": None,
            "ranking": [[pid, score] for pid, score in self.initial],
            "mrr": self.initial_mrr,
            "mrr_k": self.mrr_k,
            "entropy": ranking_entropy([s for _, s in self.initial]),
        }]
        for t, turn in enumerate(self.turns, start=1):
            records.append({
                "qid": self.query.id,
                "turn": t,
                "tag": turn.ranking.tag,
                "interaction": turn.interaction.to_dict(),
                "ranking": [[pid, score] for pid, score in turn.ranking],
                "mrr": turn.mrr,
                "mrr_k": self.mrr_k,
                "entropy": turn.entropy,
            })
        return records


def _next_source(session: Session, facet_source: str) -> Optional[str]:
    order = session.current.ids if facet_source == "updated" else session.initial.ids
    for pid in order:
        if pid not in session.used and pid not in session.skipped:
            return pid
    return None


def run_session(
    collection: Collection,
    index: InvertedIndex,
    provider: EmbeddingProvider,
    generator: QuestionGenerator,
    answerer: UserSimulator,
    scorer: Scorer,
    query: Query,
    t_max: int = DEFAULT_T_MAX,
    depth: int = DEFAULT_DEPTH,
    seed: int = 42,
    k: int = DEFAULT_K,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    facet_source: str = "updated",
    mrr_k: int = 10,
    first_stage: Optional[Ranking] = None,
) -> Session:
    """
    Ask up to `t_max` questions, each about the best-ranked passage not asked about yet.

    The candidate pool is the first-stage list and never changes; only its order
    does. Passages whose facet cannot be extracted, or that are unjudged when the
    answerer needs a polarity, are set aside and the next one is tried. Running out of candidates ends the session early.
    """
    if t_max < 1:
        raise InputError(f"t_max must be >= 1, got {t_max}")
    if facet_source not in FACET_SOURCES:
        raise InputError(f"facet_source must be one of {FACET_SOURCES}, got {facet_source!r}")

    initial = first_stage if first_stage is not None else bm25_search(
        index, query.text, k=depth, k1=k1, b=b, query_id=query.id
    )
    if not len(initial):
        raise OnlineAugmentationError(f"query {query.id!r}: first-stage retrieval returned nothing")
    intent_id = sample_intent(collection.qrels, query.id, seed)
    if intent_id is None and answerer.requires_intent:
        raise OnlineAugmentationError(
            f"query {query.id!r} has no relevant passage to act as the user intent; "
            f"judge the query or answer with the heuristic simulator"
        )

    positives = collection.qrels.positives(query.id)
    judged = query.id in collection.qrels

    def mrr_of(ranking: Ranking) -> Optional[float]:
        return mrr_at_k(ranking.ids, positives, mrr_k) if judged else None

    session = Session(query=query, initial=initial, intent_passage_id=intent_id, mrr_k=mrr_k)
    session.initial_mrr = mrr_of(initial)

    for t in range(1, t_max + 1):
        interaction = None
        while interaction is None:
            pid = _next_source(session, facet_source)
            if pid is None:
                break
            if answerer.requires_polarity and collection.qrels.relevance(query.id, pid) is None:
                logger.info("session %s: skipping unjudged facet source %s", query.id, pid)
                session.skipped.add(pid)
                continue
            try:
                interaction = ask_about_passage(
                    collection, query, pid, provider, generator, answerer, intent_id, turn=t, k=k
                )
            except ExtractionError as e:
                logger.warning("session %s: skipping facet source %s: %s", query.id, pid, e)
                session.skipped.add(pid)
                continue
            session.used.add(pid)
        if interaction is None:
            logger.info("session %s ended after %d turns: candidates exhausted", query.id, session.T)
            break

        for candidate, value in scorer.score_all(query, initial, interaction, collection.passages).items():
            session.cumulative[candidate] += value
        ranking = _sorted_by_total(initial, session.cumulative, f"rerank:t={t}")
        session.turns.append(Turn(
            interaction=interaction,
            ranking=ranking,
            mrr=mrr_of(ranking),
            entropy=ranking_entropy([s for _, s in ranking]),
        ))
    return session
