"""
End-to-end pipelines behind the command line.

Each ``cmd_*`` function takes a validated ``ClarisimConfig``, reads its inputs
from the configured paths and writes its outputs under ``paths.output_dir``
together with a manifest (config hash, seed, version).
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from rich.console import Console
from rich.progress import Progress

from . import __version__
from .analysis import Analyzer
from .augment import (
    AugmentedDataset,
    DatasetStats,
    DenoiseScorer,
    EmbeddingDenoiseScorer,
    Provenance,
    RemoteDenoiseScorer,
    augment_offline,
    augment_online,
    augment_online_multi,
    compute_stats,
    denoise_negatives,
    map_ordered,
    question_similarity,
    read_interactions,
    sample_intent,
    write_dataset,
)
from .config import ClarisimConfig
from .config.utils import canonical_config, config_hash
from .corpus import Collection, load_collection, load_passages, write_qrels
from .embed import EmbeddingProvider, build_provider
from .errors import InputError, OnlineAugmentationError
from .facet import write_facets
from .index import InvertedIndex, Ranking, bm25_search, build_index, load_index, read_run, rm3_search, save_index, write_run
from .interact import (
    Answer,
    CalibrationExample,
    HeuristicSimulator,
    LexicalSimulator,
    QuestionGenerator,
    RemoteGenerator,
    RemoteSimulator,
    TemplateGenerator,
    UserSimulator,
    calibrate_theta,
    heuristic_answer,
)
from .interact.gateway import GatewayClient
from .metrics import (
    evaluate_run,
    rbo_series,
    render_report,
    render_turn_table,
    session_turn_table,
    write_turn_table_csv,
)
from .rerank import LocalScorer, RemoteScorer, Scorer, rerank_all, run_session
from .serialization import iter_jsonl, write_json, write_jsonl

logger = logging.getLogger(__name__)

console = Console()
progress_console = Console(stderr=True)

T = TypeVar("T")
R = TypeVar("R")


# Factories


def needs_gateway(config: ClarisimConfig) -> bool:
    return "remote" in (
        config.embedding.provider,
        config.generator.kind,
        config.answerer.kind,
        config.scorer.kind,
        config.denoise.scorer,
    )


def build_client(config: ClarisimConfig) -> Optional[GatewayClient]:
    """Gateway client when any component is remote, else None."""
    if not needs_gateway(config):
        return None
    logger.debug("using model gateway at %s", config.gateway.url)
    return GatewayClient(config.gateway)


def build_generator(config: ClarisimConfig, client: Optional[GatewayClient]) -> QuestionGenerator:
    if config.generator.kind == "remote":
        return RemoteGenerator(
            client,
            nucleus_p=config.gateway.nucleus_p,
            fallback_to_template=config.generator.fallback_to_template,
        )
    return TemplateGenerator()


def build_answerer(config: ClarisimConfig, client: Optional[GatewayClient]) -> UserSimulator:
    kind = config.answerer.kind
    if kind == "remote":
        return RemoteSimulator(client)
    if kind == "lexical_sim":
        return LexicalSimulator(theta=config.answerer.theta)
    return HeuristicSimulator()


def build_scorer(config: ClarisimConfig, client: Optional[GatewayClient]) -> Scorer:
    if config.scorer.kind == "remote":
        return RemoteScorer(client, jobs=config.gateway.max_in_flight)
    return LocalScorer(alpha=config.scorer.alpha, beta=config.scorer.beta)


def build_denoise_scorer(
    config: ClarisimConfig, provider: EmbeddingProvider, client: Optional[GatewayClient]
) -> DenoiseScorer:
    if config.denoise.scorer == "remote":
        return RemoteDenoiseScorer(client)
    return EmbeddingDenoiseScorer(provider)


def config_analyzer(config: ClarisimConfig) -> Analyzer:
    return Analyzer(
        min_token_length=config.analyzer.min_token_length,
        remove_stopwords=config.analyzer.remove_stopwords,
    )


# Shared plumbing


def output_dir(config: ClarisimConfig, command: str) -> Path:
    path = Path(config.paths.output_dir) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(config: ClarisimConfig, out_dir: Path, command: str, **extra: Any) -> Path:
    """Everything needed to reproduce the directory's outputs."""
    manifest = {
        "command": command,
        "config_hash": config_hash(config),
        "seed": config.run.seed,
        "version": __version__,
        "config": canonical_config(config),
    }
    manifest.update(extra)
    path = out_dir / "manifest.json"
    write_json(manifest, path)
    return path


def load_inputs(config: ClarisimConfig, with_qrels: bool = True) -> Collection:
    paths = config.paths
    return load_collection(
        paths.passages,
        paths.queries,
        paths.qrels if with_qrels and paths.qrels else None,
        qrels_format=paths.qrels_format,
        lenient=paths.lenient,
    )


def obtain_index(config: ClarisimConfig, collection: Collection) -> InvertedIndex:
    """Saved index when it matches the configured analyzer and collection size, else a fresh one."""
    analyzer = config_analyzer(config)
    path = Path(config.paths.index)
    if path.exists():
        index = load_index(path)
        if index.analyzer == analyzer and index.n_docs == len(collection.passages):
            return index
        logger.warning("index at %s does not match the configuration; rebuilding in memory", path)
    return build_index(collection.passages, analyzer)


def run_queries(
    config: ClarisimConfig, fn: Callable[[T], R], items: Sequence[T], description: str
) -> List[R]:
    """Ordered per-query map with an optional progress bar on stderr."""
    jobs = config.run.jobs
    if not config.run.show_progress:
        return map_ordered(fn, items, jobs)
    with Progress(console=progress_console, transient=True) as progress:
        task = progress.add_task(description, total=len(items))

        def tracked(item: T) -> R:
            try:
                return fn(item)
            finally:
                progress.advance(task)

        return map_ordered(tracked, items, jobs)


def interactive_query_ids(collection: Collection) -> List[str]:
    """Judged queries when judgments exist, else every query."""
    return collection.qrels.query_ids() if len(collection.qrels) else sorted(collection.queries)


def first_stage(config: ClarisimConfig, index: InvertedIndex, collection: Collection, query_id: str) -> Ranking:
    query = collection.queries[query_id]
    bm25 = config.bm25
    if config.rm3.enabled:
        rm3 = config.rm3
        return rm3_search(
            index, query.text, k=bm25.depth, fb_docs=rm3.fb_docs, fb_terms=rm3.fb_terms,
            mix=rm3.mix, k1=bm25.k1, b=bm25.b, query_id=query_id,
        )
    return bm25_search(index, query.text, k=bm25.depth, k1=bm25.k1, b=bm25.b, query_id=query_id)


# Commands


def cmd_index(config: ClarisimConfig) -> Path:
    passages = load_passages(config.paths.passages)
    index = build_index(passages, config_analyzer(config))
    save_index(index, config.paths.index)
    write_manifest(
        config, output_dir(config, "index"), "index",
        index_path=str(config.paths.index), passages=index.n_docs, terms=len(index.postings),
    )
    logger.info("saved index to %s", config.paths.index)
    return Path(config.paths.index)


def cmd_search(config: ClarisimConfig, query_ids: Optional[Sequence[str]] = None) -> Path:
    collection = load_inputs(config, with_qrels=False)
    index = obtain_index(config, collection)
    selected = sorted(query_ids) if query_ids else sorted(collection.queries)
    unknown = [qid for qid in selected if qid not in collection.queries]
    if unknown:
        raise InputError(f"unknown query ids: {unknown[:5]}")

    rankings = run_queries(config, lambda qid: first_stage(config, index, collection, qid), selected, "search")
    tag = "rm3" if config.rm3.enabled else "bm25"
    out = output_dir(config, "search")
    path = out / f"run.{tag}.trec"
    write_run(rankings, path)
    write_manifest(config, out, "search", run=path.name, queries=len(rankings))
    return path


def cmd_augment_offline(config: ClarisimConfig) -> Tuple[Path, DatasetStats]:
    collection = load_inputs(config)
    client = build_client(config)
    provider = build_provider(config, collection.passages, client)
    generator = build_generator(config, client)
    dataset = augment_offline(
        collection,
        provider,
        generator,
        k=config.facet.k,
        max_pos=config.augment.max_pos or None,
        max_neg=config.augment.max_neg or None,
        seed=config.run.seed,
        jobs=config.run.jobs,
        config_hash=config_hash(config),
    )
    stats = compute_stats(dataset)
    out = output_dir(config, "offline")
    path = write_dataset(dataset, out, extra={"command": "augment-offline", "version": __version__})
    write_facets((interaction.facet for interaction in dataset.interactions), out / "facets.jsonl")
    write_json(stats.to_dict(), out / "stats.json")
    return path, stats


def cmd_augment_online(config: ClarisimConfig) -> Path:
    collection = load_inputs(config)
    index = obtain_index(config, collection)
    client = build_client(config)
    provider = build_provider(config, collection.passages, client)
    generator = build_generator(config, client)
    answerer = build_answerer(config, client)
    settings = config.augment
    multi = settings.online_top_n > 1 or settings.online_flop_n > 0

    def augment_query(query_id: str) -> Optional[Tuple[List, Ranking]]:
        query = collection.queries[query_id]
        ranking = first_stage(config, index, collection, query_id)
        try:
            if multi:
                return augment_online_multi(
                    collection, index, provider, generator, answerer, query,
                    depth=config.bm25.depth, top_n=settings.online_top_n, flop_n=settings.online_flop_n,
                    seed=config.run.seed, k=config.facet.k, first_stage=ranking,
                )
            result = augment_online(
                collection, index, provider, generator, answerer, query,
                depth=config.bm25.depth, seed=config.run.seed, k=config.facet.k, first_stage=ranking,
            )
            return [result.interaction], result.ranking
        except OnlineAugmentationError as e:
            logger.warning("online augmentation failed: %s", e)
            return None

    query_ids = interactive_query_ids(collection)
    results = run_queries(config, augment_query, query_ids, "augment-online")
    interactions = [i for r in results if r for i in r[0]]
    rankings = [r[1] for r in results if r]
    failures = sorted(qid for qid, r in zip(query_ids, results) if r is None)

    dataset = AugmentedDataset(
        collection=collection,
        interactions=interactions,
        provenance=Provenance(config_hash=config_hash(config), seed=config.run.seed),
        skipped=len(failures),
        empty_queries=failures,
    )
    out = output_dir(config, "online")
    path = write_dataset(dataset, out, extra={"command": "augment-online", "failed_queries": failures})
    write_run(rankings, out / f"run.{'rm3' if config.rm3.enabled else 'bm25'}.trec")
    return path


def cmd_rerank(config: ClarisimConfig, run_path: Path, interactions_path: Path) -> Path:
    collection = load_inputs(config, with_qrels=False)
    rankings = read_run(run_path)
    interactions = read_interactions(interactions_path)
    unknown = sorted({qid for qid in rankings if qid not in collection.queries})
    if unknown:
        raise InputError(f"run references unknown queries: {unknown[:5]}")
    scorer = build_scorer(config, build_client(config))
    reranked = rerank_all(
        rankings, scorer, collection.queries, interactions, collection.passages, jobs=config.run.jobs
    )
    out = output_dir(config, "rerank")
    path = out / "run.rerank.trec"
    write_run(reranked.values(), path)
    write_manifest(
        config, out, "rerank",
        run=str(run_path), interactions=str(interactions_path), queries=len(reranked),
    )
    return path


def cmd_session(config: ClarisimConfig) -> Path:
    collection = load_inputs(config)
    index = obtain_index(config, collection)
    client = build_client(config)
    provider = build_provider(config, collection.passages, client)
    generator = build_generator(config, client)
    answerer = build_answerer(config, client)
    scorer = build_scorer(config, client)
    t_max = config.session.t_max

    def session_for(query_id: str):
        try:
            return run_session(
                collection, index, provider, generator, answerer, scorer,
                collection.queries[query_id],
                t_max=t_max,
                depth=config.bm25.depth,
                seed=config.run.seed,
                k=config.facet.k,
                k1=config.bm25.k1,
                b=config.bm25.b,
                facet_source=config.session.facet_source,
                mrr_k=config.eval.mrr_k,
                first_stage=first_stage(config, index, collection, query_id),
            )
        except OnlineAugmentationError as e:
            logger.warning("session skipped: %s", e)
            return None

    query_ids = interactive_query_ids(collection)
    sessions = [s for s in run_queries(config, session_for, query_ids, "session") if s is not None]

    out = output_dir(config, "session")
    for t in range(0, t_max + 1):
        # a session that ended early keeps its last ranking in later files
        write_run([s.rankings()[min(t, s.T)] for s in sessions], out / f"run.t{t}.trec")
    trace_path = out / "trace.jsonl"
    write_jsonl((record for s in sessions for record in s.trace_records()), trace_path)
    write_manifest(
        config, out, "session",
        queries=len(sessions),
        failed_queries=len(query_ids) - len(sessions),
        turns={s.query.id: s.T for s in sessions},
    )
    return out


def cmd_eval(
    config: ClarisimConfig, run_paths: Sequence[Path], trace_path: Optional[Path] = None
) -> Dict[str, Any]:
    """Metric reports for each run file, plus the per-turn table when a session trace is given."""
    if not run_paths and trace_path is None:
        raise InputError("nothing to evaluate: pass run files or a session trace")
    collection = load_inputs(config)
    if not len(collection.qrels):
        raise InputError("evaluation needs relevance judgments")
    settings = config.eval
    out = output_dir(config, "eval")
    results: Dict[str, Any] = {"runs": {}}

    for run_path in run_paths:
        run_path = Path(run_path)
        report = evaluate_run(
            read_run(run_path), collection.qrels,
            k_values=settings.k_values, mrr_k=settings.mrr_k, rbo_p=settings.rbo_p,
        )
        write_json(report.to_dict(), out / f"{run_path.stem}.metrics.json")
        console.print(render_report(report, title=run_path.name))
        results["runs"][run_path.name] = report

    if trace_path is not None:
        rows = session_turn_table(
            iter_jsonl(trace_path), collection.qrels,
            mrr_k=settings.mrr_k, ndcg_k=max(settings.k_values),
            rbo_p=settings.rbo_p, rbo_mode=settings.rbo_mode,
        )
        write_turn_table_csv(rows, out / "turns.csv")
        write_json(
            {"turns": [row.to_dict() for row in rows], "rbo_series": rbo_series(rows)},
            out / "turns.json",
        )
        console.print(render_turn_table(rows))
        results["turns"] = rows

    write_manifest(
        config, out, "eval",
        runs=[str(p) for p in run_paths], trace=str(trace_path) if trace_path else None,
    )
    return results


def cmd_stats(config: ClarisimConfig, interactions_path: Path, similarity: bool = False) -> DatasetStats:
    collection = load_inputs(config)
    dataset = AugmentedDataset(collection=collection, interactions=read_interactions(interactions_path))
    stats = compute_stats(dataset)
    payload: Dict[str, Any] = stats.to_dict()
    if similarity:
        provider = build_provider(config, collection.passages, build_client(config))
        payload["question_similarity"] = question_similarity(dataset, provider)
    write_json(payload, output_dir(config, "stats") / "stats.json")
    return stats


def cmd_denoise(config: ClarisimConfig) -> Path:
    collection = load_inputs(config)
    if not len(collection.qrels):
        raise InputError("denoising needs relevance judgments")
    client = build_client(config)
    provider = build_provider(config, collection.passages, client)
    scorer = build_denoise_scorer(config, provider, client)
    result = denoise_negatives(collection, scorer, config.denoise.threshold)

    out = output_dir(config, "denoise")
    suffix = "jsonl" if config.paths.qrels_format == "hardneg_jsonl" else "txt"
    path = out / f"qrels.denoised.{suffix}"
    write_qrels(result.collection.qrels, path, format=config.paths.qrels_format)
    write_json(result.removed, out / "removed.json")
    write_manifest(
        config, out, "denoise",
        removed=result.n_removed,
        score_range=list(result.score_range),
    )
    return path


def calibration_examples(collection: Collection, interactions_path: Path, seed: int) -> List[CalibrationExample]:
    """Heuristic-labeled examples whose intent is the query's sampled relevant passage."""
    examples = []
    for interaction in read_interactions(interactions_path):
        intent_id = sample_intent(collection.qrels, interaction.query_id, seed)
        if intent_id is None or interaction.facet.polarity is None:
            continue
        examples.append(CalibrationExample(
            query_text=collection.queries[interaction.query_id].text,
            intent_text=collection.passages[intent_id].text,
            question=interaction.question,
            label=heuristic_answer(interaction.facet),
        ))
    return examples


def cmd_calibrate_theta(config: ClarisimConfig, interactions_path: Path) -> Tuple[float, float]:
    collection = load_inputs(config)
    examples = calibration_examples(collection, interactions_path, config.run.seed)
    theta, agreement = calibrate_theta(examples)
    out = output_dir(config, "calibration")
    write_json(
        {
            "theta": theta,
            "agreement": agreement,
            "examples": len(examples),
            "positive_examples": sum(1 for e in examples if e.label is Answer.YES),
        },
        out / "theta.json",
    )
    write_manifest(config, out, "calibrate-theta", interactions=str(interactions_path))
    return theta, agreement
