"""
clarisim command line.

Run ``python -m src.main --help`` for the command list.
"""

import functools
from pathlib import Path

import click
from rich.console import Console

from . import __version__
from .config import load_config
from .config.cli_config import CLIConfigManager
from .config.utils import config_hash, dump_config, save_config_file
from .errors import ClarisimError
from .logging_config import setup_logging
from . import pipelines


console = Console()


class CategorizedError(click.ClickException):
    """A ClarisimError surfaced with its category and exit code."""

    def __init__(self, error: ClarisimError):
        super().__init__(f"[{error.category}] {error}")
        self.exit_code = error.exit_code


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ClarisimError as e:
            raise CategorizedError(e) from e
    return wrapper


def resolve_config(ctx: click.Context, **params):
    """Global flags, then command flags, layered over files and environment."""
    manager: CLIConfigManager = ctx.obj["CLI"]
    manager.update(params)
    errors = manager.validate_args()
    if errors:
        raise click.UsageError("; ".join(errors))
    config = load_config(ctx.obj["CONFIG_FILE"], manager.get_config_overrides())
    setup_logging(config.app.log_level, colored=config.app.colored_logs)
    return config


@click.group(context_settings={"help_option_names": ["--help", "-h"]})
@click.option("--config-file", type=click.Path(), help="Path to configuration file.")
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default=None, help="Logging level.")
@click.option("--seed", type=int, default=None, help="Global random seed.")
@click.option("--jobs", type=int, default=None, help="Queries processed in parallel.")
@click.option("--lenient/--strict", default=None, help="Drop qrels lines with unknown ids instead of failing.")
@click.option("--output-dir", type=click.Path(), default=None, help="Root directory for outputs.")
@click.option("--set", "set_options", multiple=True, metavar="SECTION.KEY=VALUE",
              help="Override any configuration value.")
@click.version_option(__version__, "--version", "-v", message="clarisim version: %(version)s")
@click.pass_context
def cli(ctx, config_file, verbose, log_level, seed, jobs, lenient, output_dir, set_options):
    """
    clarisim: mixed-initiative retrieval with simulated clarifying questions.
    """
    ctx.ensure_object(dict)
    ctx.obj["CONFIG_FILE"] = config_file
    ctx.obj["CLI"] = CLIConfigManager(dict(
        config_file=config_file,
        verbose=verbose,
        log_level=log_level.upper() if log_level else None,
        seed=seed,
        jobs=jobs,
        lenient=lenient,
        output_dir=output_dir,
        set_options=set_options,
    ))


@cli.command()
@click.option("--passages", type=click.Path(), default=None, help="Passage TSV file.")
@click.option("--index-path", type=click.Path(), default=None, help="Where to write the index.")
@click.pass_context
@handle_errors
def index(ctx, passages, index_path):
    """Build and save the BM25 index."""
    config = resolve_config(ctx, passages=passages, index_path=index_path)
    path = pipelines.cmd_index(config)
    click.echo(f"Index written to {path}")


@cli.command()
@click.option("--rm3/--no-rm3", default=None, help="Expand queries with RM3.")
@click.option("--depth", type=int, default=None, help="Passages retrieved per query.")
@click.option("--query-id", "query_ids", multiple=True, help="Restrict to these queries.")
@click.pass_context
@handle_errors
def search(ctx, rm3, depth, query_ids):
    """Retrieve passages for every query into a TREC run file."""
    config = resolve_config(ctx, rm3=rm3, depth=depth)
    path = pipelines.cmd_search(config, query_ids)
    click.echo(f"Run written to {path}")


@cli.command(name="augment-offline")
@click.option("--max-pos", type=int, default=None, help="Positives kept per query (0 = all).")
@click.option("--max-neg", type=int, default=None, help="Negatives kept per query (0 = all).")
@click.option("--facet-k", type=int, default=None, help="Words per facet.")
@click.option("--generator", type=click.Choice(["template", "remote"]), default=None)
@click.pass_context
@handle_errors
def augment_offline(ctx, max_pos, max_neg, facet_k, generator):
    """Turn every judged passage into a clarifying question and its answer."""
    config = resolve_config(ctx, max_pos=max_pos, max_neg=max_neg, facet_k=facet_k, generator=generator)
    path, stats = pipelines.cmd_augment_offline(config)
    click.echo(f"{stats.n_interactions} interactions written to {path}")
    click.echo(f"Positive answers: {stats.positive_fraction:.1%}")


@cli.command(name="augment-online")
@click.option("--depth", type=int, default=None, help="Passages retrieved per query.")
@click.option("--generator", type=click.Choice(["template", "remote"]), default=None)
@click.option("--answerer", type=click.Choice(["heuristic", "lexical_sim", "remote"]), default=None)
@click.option("--theta", type=float, default=None, help="Lexical simulator threshold.")
@click.pass_context
@handle_errors
def augment_online(ctx, depth, generator, answerer, theta):
    """Ask about the top-retrieved passage of every query."""
    config = resolve_config(ctx, depth=depth, generator=generator, answerer=answerer, theta=theta)
    path = pipelines.cmd_augment_online(config)
    click.echo(f"Interactions written to {path}")


@cli.command()
@click.option("--run", "run_path", type=click.Path(exists=True), required=True, help="First-stage run file.")
@click.option("--interactions", type=click.Path(exists=True), required=True, help="Interactions JSONL.")
@click.option("--scorer", type=click.Choice(["local", "remote"]), default=None)
@click.pass_context
@handle_errors
def rerank(ctx, run_path, interactions, scorer):
    """Rerank a run file with the answered questions."""
    config = resolve_config(ctx, scorer=scorer)
    path = pipelines.cmd_rerank(config, Path(run_path), Path(interactions))
    click.echo(f"Reranked run written to {path}")


@cli.command()
@click.option("--t-max", type=int, default=None, help="Questions per session.")
@click.option("--depth", type=int, default=None, help="Candidate list size.")
@click.option("--generator", type=click.Choice(["template", "remote"]), default=None)
@click.option("--answerer", type=click.Choice(["heuristic", "lexical_sim", "remote"]), default=None)
@click.option("--scorer", type=click.Choice(["local", "remote"]), default=None)
@click.option("--facet-source", type=click.Choice(["updated", "initial"]), default=None,
              help="Pick facets from the reranked or the first-stage list.")
@click.pass_context
@handle_errors
def session(ctx, t_max, depth, generator, answerer, scorer, facet_source):
    """Run multi-turn clarification sessions."""
    config = resolve_config(
        ctx, t_max=t_max, depth=depth, generator=generator, answerer=answerer,
        scorer=scorer, facet_source=facet_source,
    )
    out = pipelines.cmd_session(config)
    click.echo(f"Session runs and trace written to {out}")


@cli.command(name="eval")
@click.option("--run", "run_paths", type=click.Path(exists=True), multiple=True, help="Run file(s) to evaluate.")
@click.option("--trace", "trace_path", type=click.Path(exists=True), default=None, help="Session trace JSONL.")
@click.option("--rbo-p", type=float, default=None, help="RBO persistence.")
@click.option("--rbo-mode", type=click.Choice(["min", "ext"]), default=None)
@click.pass_context
@handle_errors
def evaluate(ctx, run_paths, trace_path, rbo_p, rbo_mode):
    """Compute MRR/NDCG for run files and per-turn tables for session traces."""
    config = resolve_config(ctx, rbo_p=rbo_p, rbo_mode=rbo_mode)
    pipelines.cmd_eval(config, [Path(p) for p in run_paths], Path(trace_path) if trace_path else None)


@cli.command()
@click.option("--interactions", type=click.Path(exists=True), required=True, help="Interactions JSONL.")
@click.option("--similarity", is_flag=True, help="Also report question/passage embedding similarity.")
@click.pass_context
@handle_errors
def stats(ctx, interactions, similarity):
    """Dataset statistics for an interactions file."""
    config = resolve_config(ctx)
    result = pipelines.cmd_stats(config, Path(interactions), similarity=similarity)
    for key, value in result.to_dict().items():
        click.echo(f"{key}: {value}")


@cli.command()
@click.option("--threshold", type=float, default=None, help="Remove negatives scoring at or above this.")
@click.option("--denoise-scorer", type=click.Choice(["local", "remote"]), default=None)
@click.pass_context
@handle_errors
def denoise(ctx, threshold, denoise_scorer):
    """Remove likely false negatives from the judgments."""
    config = resolve_config(ctx, threshold=threshold, denoise_scorer=denoise_scorer)
    path = pipelines.cmd_denoise(config)
    click.echo(f"Denoised judgments written to {path}")


@cli.command(name="calibrate-theta")
@click.option("--interactions", type=click.Path(exists=True), required=True, help="Offline interactions JSONL.")
@click.pass_context
@handle_errors
def calibrate_theta(ctx, interactions):
    """Fit the lexical simulator threshold against heuristic answers."""
    config = resolve_config(ctx)
    theta, agreement = pipelines.cmd_calibrate_theta(config, Path(interactions))
    click.echo(f"theta={theta:.1f} agreement={agreement:.3f}")


@cli.command(name="show-config")
@click.option("--format", "file_format", type=click.Choice(["toml", "yaml", "json"]), default="toml")
@click.option("--output", "output_path", type=click.Path(), default=None,
              help="Also write the configuration to this file (format from its extension).")
@click.pass_context
@handle_errors
def show_config(ctx, file_format, output_path):
    """Print the effective configuration and its hash."""
    config = resolve_config(ctx)
    if output_path:
        path = save_config_file(config.model_dump(mode="json"), output_path)
        click.echo(f"configuration written to {path}")
    console.print(dump_config(config.model_dump(mode="json"), file_format), markup=False, highlight=False)
    click.echo(f"# config hash: {config_hash(config)}")


if __name__ == "__main__":
    cli()
