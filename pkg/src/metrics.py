"""
Retrieval and text-similarity metrics.

Rankings are plain sequences of passage ids (best first); relevance is a set of
positive ids. Every metric here is a pure function.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Collection as CollectionType, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
from nltk.translate.meteor_score import meteor_score
from rich.table import Table

from .analysis import raw_tokens
from .corpus import Qrels
from .embed import EmbeddingProvider, cosine, embed_texts
from .errors import InputError
from .index import Ranking

logger = logging.getLogger(__name__)

DEFAULT_RBO_P = 0.9
RBO_MODES = ("min", "ext")
ENTROPY_BASE = "e"


def _check_k(k: int) -> None:
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")


def mrr_at_k(ranking: Sequence[str], positives: CollectionType[str], k: int = 10) -> float:
    """Reciprocal rank of the first positive within the top k, else 0."""
    _check_k(k)
    if not positives:
        logger.warning("no positive passages; reciprocal rank is 0")
        return 0.0
    for rank, pid in enumerate(ranking[:k], start=1):
        if pid in positives:
            return 1.0 / rank
    return 0.0


def ndcg_at_k(ranking: Sequence[str], positives: CollectionType[str], k: int = 10) -> float:
    """Binary-gain NDCG with a log2(rank + 1) discount."""
    _check_k(k)
    if not positives:
        logger.warning("no positive passages; NDCG is 0")
        return 0.0
    dcg = sum(1.0 / math.log2(rank + 1) for rank, pid in enumerate(ranking[:k], start=1) if pid in positives)
    ideal = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(k, len(positives)) + 1))
    return dcg / ideal


class _ExactStemmer:
    """Stemmer that leaves words alone, so the stem stage adds no matches."""

    def stem(self, word: str) -> str:
        return word


class _NoSynonyms:
    """WordNet stand-in without synsets, so the synonym stage adds no matches."""

    def synsets(self, word: str) -> list:
        return []


def meteor(hypothesis: str, reference: str) -> float:
    """
    Exact-match unigram METEOR over case-folded alphanumeric tokens.

    nltk's scorer with alpha 0.9, beta 3 and gamma 0.5; the stem and synonym
    stages are switched off.
    """
    if not hypothesis.strip() or not reference.strip():
        raise InputError("meteor needs a non-empty hypothesis and reference")
    hyp, ref = raw_tokens(hypothesis), raw_tokens(reference)
    if not hyp or not ref:
        return 0.0
    return float(meteor_score(
        [ref], hyp, preprocess=str.lower, stemmer=_ExactStemmer(), wordnet=_NoSynonyms(),
        alpha=0.9, beta=3.0, gamma=0.5,
    ))


def cosim(questions: Sequence[str], references: Sequence[str], provider: EmbeddingProvider) -> float:
    """Mean pairwise cosine between question and reference embeddings."""
    if len(questions) != len(references):
        raise InputError(f"cosim needs equal-length lists, got {len(questions)} and {len(references)}")
    if not questions:
        raise InputError("cosim needs at least one pair")
    vectors = embed_texts(provider, list(questions) + list(references))
    n = len(questions)
    return sum(cosine(vectors[i], vectors[n + i]) for i in range(n)) / n


def ranking_entropy(scores: Sequence[float]) -> float:
    """Shannon entropy (natural log) of the softmax over the candidates' log scores."""
    values = np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        raise InputError("entropy needs at least one score")
    if not np.all(np.isfinite(values)):
        raise InputError("entropy needs finite scores")
    log_p = values - np.logaddexp.reduce(values)
    return float(max(0.0, -np.sum(np.exp(log_p) * log_p)))


def _overlaps(s: Sequence[str], t: Sequence[str], depth: int) -> List[int]:
    """X_d = |S[:d] & T[:d]| for d = 1..depth, each list cut at its own length."""
    seen_s, seen_t = set(), set()
    overlap = 0
    result = []
    for d in range(depth):
        a = s[d] if d < len(s) else None
        b = t[d] if d < len(t) else None
        if a is not None and b is not None and a == b:
            overlap += 1
        else:
            if a is not None:
                overlap += a in seen_t
                seen_s.add(a)
            if b is not None:
                overlap += b in seen_s
                seen_t.add(b)
        result.append(overlap)
    return result


def rbo(s: Sequence[str], t: Sequence[str], p: float = DEFAULT_RBO_P, mode: str = "ext") -> float:
    """
    Rank-biased overlap of two rankings.

    `min` is the truncated sum (1 - p) * sum_{d<=D} p^(d-1) A_d over the shorter
    depth D. `ext` extrapolates the agreement seen at the end of the lists to
    infinite depth and handles lists of different lengths.
    """
    if not 0.0 < p < 1.0:
        raise InputError(f"rbo p must be in (0, 1), got {p}")
    if mode not in RBO_MODES:
        raise InputError(f"rbo mode must be one of {RBO_MODES}, got {mode!r}")
    if not s or not t:
        raise InputError("rbo needs two non-empty rankings")

    if mode == "min":
        depth = min(len(s), len(t))
        overlaps = _overlaps(s, t, depth)
        return (1.0 - p) * sum(p ** (d - 1) * x / d for d, x in enumerate(overlaps, start=1))

    short, long_ = (s, t) if len(s) <= len(t) else (t, s)
    sl, ll = len(short), len(long_)
    overlaps = _overlaps(short, long_, ll)
    x_s, x_l = overlaps[sl - 1], overlaps[ll - 1]
    total = sum(x / d * p ** d for d, x in enumerate(overlaps, start=1))
    total += sum(x_s * (d - sl) / (sl * d) * p ** d for d in range(sl + 1, ll + 1))
    return (1.0 - p) / p * total + ((x_l - x_s) / ll + x_s / sl) * p ** ll


@dataclass
class MetricReport:
    """Per-query metric values with their macro averages."""

    per_query: Dict[str, Dict[str, float]]
    metrics: List[str]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def macro(self) -> Dict[str, float]:
        if not self.per_query:
            return {name: 0.0 for name in self.metrics}
        return {
            name: sum(values[name] for values in self.per_query.values()) / len(self.per_query)
            for name in self.metrics
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metadata": self.metadata,
            "macro": self.macro,
            "per_query": {qid: self.per_query[qid] for qid in sorted(self.per_query)},
        }


def evaluate_run(
    run: Mapping[str, Ranking],
    qrels: Qrels,
    k_values: Sequence[int] = (1, 3, 10),
    mrr_k: int = 10,
    rbo_p: float = DEFAULT_RBO_P,
) -> MetricReport:
    """MRR@mrr_k and NDCG@k for every query present in both the run and the judgments."""
    metrics = [f"mrr@{mrr_k}"] + [f"ndcg@{k}" for k in k_values]
    evaluated = sorted(set(run) & set(qrels.query_ids()))
    missing = len(set(qrels.query_ids()) - set(run))
    if missing:
        logger.info("%d judged queries have no ranking and are not evaluated", missing)

    per_query = {}
    for qid in evaluated:
        ids = run[qid].ids
        positives = qrels.positives(qid)
        values = {f"mrr@{mrr_k}": mrr_at_k(ids, positives, mrr_k)}
        for k in k_values:
            values[f"ndcg@{k}"] = ndcg_at_k(ids, positives, k)
        per_query[qid] = values

    metadata = {
        "k_values": list(k_values),
        "mrr_k": mrr_k,
        "rbo_p": rbo_p,
        "entropy_base": ENTROPY_BASE,
        "queries": len(evaluated),
    }
    return MetricReport(per_query=per_query, metrics=metrics, metadata=metadata)


def render_report(report: MetricReport, title: str = "Evaluation") -> Table:
    table = Table(title=f"{title} ({report.metadata.get('queries', len(report.per_query))} queries)")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right", style="green")
    for name, value in report.macro.items():
        table.add_row(name, f"{value:.4f}")
    return table


@dataclass(frozen=True)
class TurnRow:
    turn: int
    queries: int
    mrr: float
    ndcg: float
    entropy: float
    rbo_prev: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "turn": self.turn,
            "queries": self.queries,
            "mrr": self.mrr,
            "ndcg": self.ndcg,
            "entropy": self.entropy,
            "rbo_prev": self.rbo_prev,
        }


def session_turn_table(
    records: Iterable[Mapping[str, Any]],
    qrels: Qrels,
    mrr_k: int = 10,
    ndcg_k: int = 10,
    rbo_p: float = DEFAULT_RBO_P,
    rbo_mode: str = "ext",
) -> List[TurnRow]:
    """
    Macro metrics per turn over session traces.

    A session that ended early keeps contributing its last ranking. `rbo_prev`
    of turn t is the mean RBO between the rankings of turns t-1 and t.
    """
    by_query: Dict[str, Dict[int, Mapping[str, Any]]] = {}
    for record in records:
        by_query.setdefault(record["qid"], {})[int(record["turn"])] = record
    if not by_query:
        raise InputError("no session records to tabulate")
    max_turn = max(max(turns) for turns in by_query.values())

    def state(turns: Dict[int, Mapping[str, Any]], t: int) -> Mapping[str, Any]:
        return turns[max(d for d in turns if d <= t)]

    rows = []
    for t in range(0, max_turn + 1):
        mrr_sum = ndcg_sum = entropy_sum = rbo_sum = 0.0
        judged = 0
        for qid in sorted(by_query):
            record = state(by_query[qid], t)
            ids = [pid for pid, _ in record["ranking"]]
            entropy_sum += float(record["entropy"])
            if qid in qrels:
                judged += 1
                mrr_sum += mrr_at_k(ids, qrels.positives(qid), mrr_k)
                ndcg_sum += ndcg_at_k(ids, qrels.positives(qid), ndcg_k)
            if t > 0:
                previous = [pid for pid, _ in state(by_query[qid], t - 1)["ranking"]]
                rbo_sum += rbo(previous, ids, rbo_p, rbo_mode)
        n = len(by_query)
        rows.append(TurnRow(
            turn=t,
            queries=n,
            mrr=mrr_sum / judged if judged else 0.0,
            ndcg=ndcg_sum / judged if judged else 0.0,
            entropy=entropy_sum / n,
            rbo_prev=rbo_sum / n if t > 0 else None,
        ))
    return rows


def rbo_series(rows: Sequence[TurnRow]) -> List[float]:
    """RBO(t, t+1) for t = 1..T-1."""
    return [row.rbo_prev for row in rows if row.turn >= 2]


def write_turn_table_csv(rows: Sequence[TurnRow], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["turn", "queries", "mrr", "ndcg", "entropy", "rbo_prev"])
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_dict())


def render_turn_table(rows: Sequence[TurnRow], title: str = "Session turns") -> Table:
    table = Table(title=title)
    for column in ("Turn", "Queries", "MRR", "NDCG", "Entropy", "RBO(t-1,t)"):
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(
            str(row.turn),
            str(row.queries),
            f"{row.mrr:.4f}",
            f"{row.ndcg:.4f}",
            f"{row.entropy:.4f}",
            "-" if row.rbo_prev is None else f"{row.rbo_prev:.4f}",
        )
    return table
