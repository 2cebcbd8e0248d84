"""
Tests for retrieval metrics, including brute-force oracles and anchor values.
"""

import csv
import math
import random

import pytest
from nltk.translate.meteor_score import meteor_score

from src.analysis import raw_tokens
from src.corpus import Judgments, Qrels
from src.errors import InputError
from src.index import Ranking
from src.metrics import (
    cosim,
    evaluate_run,
    meteor,
    mrr_at_k,
    ndcg_at_k,
    ranking_entropy,
    rbo,
    rbo_series,
    render_report,
    render_turn_table,
    session_turn_table,
    write_turn_table_csv,
)

POOL = [f"p{i}" for i in range(30)]


class IdentityStemmer:
    def stem(self, word):
        return word


class NoSynsets:
    def synsets(self, word):
        return []


def oracle_mrr(ranking, positives, k):
    ranks = [r for r, pid in enumerate(ranking, start=1) if pid in positives and r <= k]
    return 1.0 / min(ranks) if ranks else 0.0


def oracle_ndcg(ranking, positives, k):
    gains = [1.0 if pid in positives else 0.0 for pid in ranking][:k]
    dcg = sum(g / math.log2(i + 2) for i, g in enumerate(gains))
    ideal_gains = [1.0] * min(k, len(positives))
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal_gains))
    return dcg / idcg


def agreement(s, t, d):
    return len(set(s[:d]) & set(t[:d])) / d


def oracle_rbo_min(s, t, p):
    depth = min(len(s), len(t))
    return (1 - p) * sum(p ** (d - 1) * agreement(s, t, d) for d in range(1, depth + 1))


def oracle_rbo_ext(s, t, p):
    short, long_ = (s, t) if len(s) <= len(t) else (t, s)
    sl, ll = len(short), len(long_)

    def overlap(d):
        return len(set(short[:d]) & set(long_[:d]))

    x_s, x_l = overlap(sl), overlap(ll)
    total = sum(overlap(d) / d * p ** d for d in range(1, ll + 1))
    total += sum(x_s * (d - sl) / (sl * d) * p ** d for d in range(sl + 1, ll + 1))
    return (1 - p) / p * total + ((x_l - x_s) / ll + x_s / sl) * p ** ll


def oracle_entropy(scores):
    z = sum(math.exp(s) for s in scores)
    probabilities = [math.exp(s) / z for s in scores]
    return -sum(q * math.log(q) for q in probabilities if q > 0)


def oracle_meteor(hypothesis, reference):
    """Exact-match METEOR for sentences without repeated words, where the alignment is unique."""
    ref_pos = {word: j for j, word in enumerate(reference)}
    pairs = [(i, ref_pos[word]) for i, word in enumerate(hypothesis) if word in ref_pos]
    if not pairs:
        return 0.0
    chunks = 1 + sum(
        1 for (i0, j0), (i1, j1) in zip(pairs, pairs[1:]) if not (i1 == i0 + 1 and j1 == j0 + 1)
    )
    precision, recall = len(pairs) / len(hypothesis), len(pairs) / len(reference)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    return fmean * (1 - 0.5 * (chunks / len(pairs)) ** 3)


class TestRankMetrics:
    """Test MRR and NDCG."""

    def test_oracle(self):
        """Test 200 random rankings of up to six passages against brute force."""
        rng = random.Random(17)
        for _ in range(200):
            ranking = rng.sample(POOL[:8], rng.randint(1, 6))
            positives = set(rng.sample(POOL[:8], rng.randint(1, 3)))
            k = rng.randint(1, 6)
            assert mrr_at_k(ranking, positives, k) == oracle_mrr(ranking, positives, k)
            assert ndcg_at_k(ranking, positives, k) == pytest.approx(oracle_ndcg(ranking, positives, k), abs=1e-15)

    def test_rank_eight(self):
        """Test that a positive at rank 8 gives a reciprocal rank of 0.125."""
        ranking = [f"n{i}" for i in range(7)] + ["pos"] + [f"m{i}" for i in range(92)]
        assert mrr_at_k(ranking, {"pos"}, 100) == 0.125
        assert mrr_at_k(ranking, {"pos"}, 5) == 0.0

    def test_no_positives(self):
        """Test that a query without positives scores zero."""
        assert mrr_at_k(["a"], set(), 10) == 0.0
        assert ndcg_at_k(["a"], set(), 10) == 0.0

    def test_invalid_k(self):
        """Test that k must be positive."""
        with pytest.raises(InputError):
            mrr_at_k(["a"], {"a"}, 0)
        with pytest.raises(InputError):
            ndcg_at_k(["a"], {"a"}, 0)

    def test_reorder_below_k(self):
        """Test that shuffling the tail below rank k changes neither metric."""
        rng = random.Random(19)
        for _ in range(100):
            ranking = rng.sample(POOL, 15)
            positives = set(rng.sample(POOL, 4))
            k = rng.randint(1, 10)
            tail = ranking[k:]
            rng.shuffle(tail)
            reordered = ranking[:k] + tail
            assert mrr_at_k(reordered, positives, k) == mrr_at_k(ranking, positives, k)
            assert ndcg_at_k(reordered, positives, k) == ndcg_at_k(ranking, positives, k)

    def test_perfect_ndcg(self):
        """Test that all positives on top give an NDCG of one."""
        assert ndcg_at_k(["a", "b", "c"], {"a", "b"}, 3) == pytest.approx(1.0)


class TestRBO:
    """Test rank-biased overlap."""

    def test_oracle(self):
        """Test both modes on 100 random 20-item instances."""
        rng = random.Random(23)
        for _ in range(100):
            s = rng.sample(POOL, 20)
            t = rng.sample(POOL, 20)
            p = rng.choice([0.5, 0.8, 0.9, 0.95])
            assert rbo(s, t, p, "min") == pytest.approx(oracle_rbo_min(s, t, p), abs=1e-12)
            assert rbo(s, t, p, "ext") == pytest.approx(oracle_rbo_ext(s, t, p), abs=1e-12)

    def test_uneven_lengths(self):
        """Test extrapolation over lists of different lengths."""
        rng = random.Random(29)
        for _ in range(50):
            s = rng.sample(POOL, rng.randint(1, 20))
            t = rng.sample(POOL, rng.randint(1, 20))
            assert rbo(s, t, 0.9) == pytest.approx(oracle_rbo_ext(s, t, 0.9), abs=1e-12)
            assert rbo(s, t, 0.9) == pytest.approx(rbo(t, s, 0.9), abs=1e-12)

    def test_identical(self):
        """Test that identical rankings have an extrapolated overlap of one."""
        ranking = POOL[:20]
        assert rbo(ranking, list(ranking), 0.9, "ext") == pytest.approx(1.0, abs=1e-9)

    def test_disjoint(self):
        """Test that disjoint rankings have no overlap."""
        assert rbo(POOL[:10], POOL[10:20], 0.9, "min") == 0.0
        assert rbo(POOL[:10], POOL[10:20], 0.9, "ext") == 0.0

    def test_swap(self):
        """Test that swapping two items gives exactly p."""
        assert rbo(["a", "b"], ["b", "a"], 0.9) == pytest.approx(0.9)

    def test_min_below_ext(self):
        """Test that the truncated overlap never exceeds the extrapolated one."""
        rng = random.Random(37)
        for _ in range(100):
            n = rng.randint(1, 20)
            s, t = rng.sample(POOL, n), rng.sample(POOL, n)
            p = rng.choice([0.5, 0.8, 0.9, 0.95])
            assert rbo(s, t, p, "min") <= rbo(s, t, p, "ext") + 1e-12

    def test_validation(self):
        """Test argument checks."""
        with pytest.raises(InputError):
            rbo(["a"], ["a"], 1.0)
        with pytest.raises(InputError):
            rbo(["a"], ["a"], 0.9, "max")
        with pytest.raises(InputError):
            rbo([], ["a"], 0.9)


class TestEntropy:
    """Test ranking entropy."""

    def test_oracle(self):
        """Test against direct summation on 100 random instances."""
        rng = random.Random(31)
        for _ in range(100):
            scores = [rng.uniform(-10.0, 0.0) for _ in range(20)]
            assert ranking_entropy(scores) == pytest.approx(oracle_entropy(scores), abs=1e-12)

    def test_uniform(self):
        """Test that uniform scores over 100 candidates give ln(100)."""
        assert ranking_entropy([-2.0] * 100) == pytest.approx(math.log(100), abs=1e-6)

    def test_single_candidate(self):
        """Test that one candidate has zero entropy."""
        assert ranking_entropy([-3.0]) == 0.0

    def test_shift_invariance(self):
        """Test that adding a constant to every score leaves the entropy unchanged."""
        rng = random.Random(41)
        for _ in range(50):
            scores = [rng.uniform(-10.0, 0.0) for _ in range(20)]
            shift = rng.uniform(-100.0, 100.0)
            assert ranking_entropy([s + shift for s in scores]) == pytest.approx(ranking_entropy(scores), abs=1e-9)

    def test_one_hot(self):
        """Test that one candidate leading by 50 leaves almost no entropy."""
        assert ranking_entropy([50.0] + [0.0] * 99) < 1e-12

    def test_validation(self):
        """Test that scores must be present and finite."""
        with pytest.raises(InputError):
            ranking_entropy([])
        with pytest.raises(InputError):
            ranking_entropy([0.0, float("-inf")])


class TestTextMetrics:
    """Test METEOR and embedding similarity."""

    def test_meteor_identical(self):
        """Test that an identical sentence only pays the one-chunk penalty."""
        assert meteor("mercury is a toxic metal", "mercury is a toxic metal") == pytest.approx(1 - 0.5 / 125)

    def test_meteor_swapped(self):
        """Test that two matches in two chunks pay half."""
        assert meteor("alpha beta", "beta alpha") == pytest.approx(0.5)

    def test_meteor_partial(self):
        """Test precision, recall and fragmentation together."""
        assert meteor("alpha beta gamma", "alpha beta") == pytest.approx(20 / 21 * 15 / 16)

    def test_meteor_disjoint(self):
        """Test that no match scores zero."""
        assert meteor("alpha", "beta") == 0.0

    def test_meteor_empty(self):
        """Test that empty strings are rejected."""
        with pytest.raises(InputError):
            meteor("", "beta")

    def test_meteor_oracle(self):
        """Test agreement with a direct computation on 200 random sentence pairs."""
        rng = random.Random(43)
        vocabulary = [f"w{i}" for i in range(12)]
        for _ in range(200):
            hypothesis = rng.sample(vocabulary, rng.randint(1, 8))
            reference = rng.sample(vocabulary, rng.randint(1, 8))
            expected = oracle_meteor(hypothesis, reference)
            assert meteor(" ".join(hypothesis), " ".join(reference)) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("hypothesis, reference", [
        ("Are you looking for the jaguar's habitat?", "are you interested in jaguar habitat"),
        ("Mercury is a TOXIC metal.", "mercury, the toxic element"),
        ("the cat sat on the mat", "the mat the cat sat on"),
        ("install python packages with pip", "pip installs python packages"),
    ])
    def test_meteor_matches_nltk(self, hypothesis, reference):
        """Test that case and punctuation are folded before exact matching."""
        expected = meteor_score(
            [raw_tokens(reference)], raw_tokens(hypothesis),
            stemmer=IdentityStemmer(), wordnet=NoSynsets(),
        )
        assert meteor(hypothesis, reference) == pytest.approx(expected)

    def test_meteor_self_beats_disjoint(self):
        """Test that a sentence scores higher against itself than against a disjoint one."""
        rng = random.Random(47)
        for _ in range(50):
            words = rng.sample(POOL, 10)
            x, y = " ".join(words[:5]), " ".join(words[5:])
            assert meteor(x, x) > meteor(x, y)

    def test_cosim(self, toy_provider):
        """Test that identical lists have similarity one."""
        texts = ["jaguar habitat", "python packages"]
        assert cosim(texts, texts, toy_provider) == pytest.approx(1.0)
        with pytest.raises(InputError):
            cosim(texts, texts[:1], toy_provider)


class TestReports:
    """Test run evaluation and session turn tables."""

    def test_evaluate_run(self, toy_collection):
        """Test that only queries in both the run and the judgments are evaluated."""
        run = {
            "q1": Ranking("q1", (("p02", 2.0), ("p01", 1.0)), "bm25"),
            "q9": Ranking("q9", (("p05", 1.0),), "bm25"),
        }
        report = evaluate_run(run, toy_collection.qrels, k_values=[1, 3], mrr_k=10)
        assert list(report.per_query) == ["q1"]
        assert report.per_query["q1"]["mrr@10"] == 0.5
        assert report.per_query["q1"]["ndcg@1"] == 0.0
        assert report.per_query["q1"]["ndcg@3"] == pytest.approx(1 / math.log2(3))
        assert report.macro["mrr@10"] == 0.5
        assert report.metadata["queries"] == 1
        assert report.metadata["entropy_base"] == "e"
        assert render_report(report).row_count == 3

    def records(self):
        def record(qid, turn, ids, entropy):
            return {"qid": qid, "turn": turn, "ranking": [[pid, -float(i)] for i, pid in enumerate(ids)],
                    "entropy": entropy}

        return [
            record("q1", 0, ["p02", "p01"], 0.6),
            record("q1", 1, ["p01", "p02"], 0.5),
            record("q1", 2, ["p01", "p02"], 0.4),
            record("q2", 0, ["p09", "p06"], 0.6),
            record("q2", 1, ["p06", "p09"], 0.3),
        ]

    def test_turn_table(self, toy_collection):
        """Test per-turn macro metrics with an early-ending session carried forward."""
        rows = session_turn_table(self.records(), toy_collection.qrels, mrr_k=10, ndcg_k=10, rbo_p=0.9)
        assert [row.turn for row in rows] == [0, 1, 2]
        assert [row.mrr for row in rows] == [0.75, 0.75, 0.75]
        assert rows[0].rbo_prev is None
        assert rows[1].rbo_prev == pytest.approx(0.9)
        assert rows[2].rbo_prev == pytest.approx(1.0)
        assert rows[2].entropy == pytest.approx(0.35)
        assert rbo_series(rows) == [rows[2].rbo_prev]
        assert render_turn_table(rows).row_count == 3

    def test_turn_table_unjudged(self):
        """Test that unjudged queries count for entropy but not for MRR."""
        qrels = Qrels({"q1": Judgments(positives=frozenset({"p01"}))})
        rows = session_turn_table(self.records(), qrels)
        assert rows[0].mrr == 0.5
        assert rows[0].queries == 2

    def test_turn_table_empty(self, toy_collection):
        """Test that a table needs records."""
        with pytest.raises(InputError):
            session_turn_table([], toy_collection.qrels)

    def test_write_csv(self, tmp_path, toy_collection):
        """Test the CSV export of the turn table."""
        rows = session_turn_table(self.records(), toy_collection.qrels)
        path = tmp_path / "tables" / "turns.csv"
        write_turn_table_csv(rows, path)
        with open(path, newline="") as f:
            table = list(csv.DictReader(f))
        assert len(table) == 3
        assert table[0]["turn"] == "0"
        assert table[0]["rbo_prev"] == ""
        assert float(table[1]["rbo_prev"]) == pytest.approx(0.9)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
