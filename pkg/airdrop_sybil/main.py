"""
Main entry point for the airdrop_sybil CLI.
"""

import dataclasses
import json
import logging
import os
import sys
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import Progress
from rich.table import Table

from airdrop_sybil import __version__, pipeline
from airdrop_sybil.activity import MATCH_MODES, build_activity_sequences, similarity_matrix
from airdrop_sybil.cluster import Clustering, reorder_matrix
from airdrop_sybil.config import Config, RunConfig
from airdrop_sybil.export import subgraph_to_dot, write_dot, write_matrix_csv
from airdrop_sybil.file_handler import FileHandler
from airdrop_sybil.pipeline import GroundTruth, Snapshot
from airdrop_sybil.report import ComponentResult, DetectionReport, ReportError, interaction_table, load_report, save_report
from airdrop_sybil.synthgen import ScenarioConfig, generate, write_bundle
from airdrop_sybil.txgraph import extract_subgraph

logger = logging.getLogger(__name__)


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@contextmanager
def _exit_codes():
    """Map failures to exit statuses: 2 for invalid input, 1 for I/O."""
    try:
        yield
    except ValueError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(2)
    except OSError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)


def _grid(cast: Callable[[str], Any]) -> Callable:
    def parse(ctx, param, value: str) -> List[Any]:
        try:
            values = [cast(v) for v in value.split(",") if v.strip()]
        except ValueError:
            raise click.BadParameter(f"expected a comma-separated list, got {value!r}")
        if not values:
            raise click.BadParameter("grid must not be empty")
        return values
    return parse


class _ProgressRenderer:
    """Renders pipeline progress events with rich."""

    def __init__(self, enabled: bool):
        self.progress = Progress(console=Console(stderr=True), disable=not enabled, transient=True)
        self.task = None

    def __call__(self, event: Dict[str, Any]) -> None:
        if event["type"] == "planned":
            self.task = self.progress.add_task("Components", total=event["total"])
        elif event["type"] == "component" and self.task is not None:
            self.progress.update(self.task, completed=event["done"])


def _load_run(config_path: str, out: Optional[str] = None, **overrides: Any) -> Tuple[RunConfig, Snapshot]:
    config = Config(config_path)
    config.apply_overrides(report=os.path.abspath(out) if out else None, **overrides)
    run = config.build()
    snapshot = FileHandler().load_snapshot(run.snapshot)
    return run, snapshot


def _check_snapshot(report: DetectionReport, snapshot: Snapshot) -> None:
    if report.snapshot_id != snapshot.snapshot_id:
        raise ReportError(
            f"report was produced from snapshot {report.snapshot_id}, not {snapshot.snapshot_id}"
        )


def _export_dots(
    snapshot: Snapshot,
    run: RunConfig,
    report: DetectionReport,
    out_dir: str,
    cluster_ids: Iterable[str] = (),
) -> int:
    """Write one DOT file per selected cluster (default: flagged clusters)."""
    wanted = set(cluster_ids)
    os.makedirs(out_dir, exist_ok=True)
    graphs = {}
    written = 0
    for component in report.components:
        for cluster in component.clusters:
            if not (cluster.cluster_id in wanted if wanted else cluster.flagged):
                continue
            if component.chain not in graphs:
                graphs[component.chain] = pipeline.chain_graph(snapshot, component.chain)
            graph = graphs[component.chain]
            seeds = [a for a in cluster.accounts if a in graph]
            if not seeds:
                continue
            sg = extract_subgraph(graph, seeds, run.caps)
            dot = subgraph_to_dot(sg, cluster.patterns, name=cluster.cluster_id)
            write_dot(dot, os.path.join(out_dir, f"{cluster.cluster_id}.dot"))
            written += 1
    logger.info("Wrote %d DOT files to %s", written, out_dir)
    return written


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Log debug output")
@click.option("--quiet", "-q", is_flag=True, help="Only log warnings and errors")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, quiet: bool):
    """
    airdrop_sybil - Detect airdrop Sybils from activity similarity and transfer patterns.
    """
    ctx.ensure_object(dict)
    ctx.obj["quiet"] = quiet
    _setup_logging(verbose, quiet)


@cli.command()
@click.option("--config", "-c", "config_path", required=True, help="Run configuration (YAML or JSON)")
@click.option("--out", "-o", help="Report path (overrides output.report)")
@click.option("--jobs", "-j", type=int, help="Parallel component workers")
@click.option("--chain", "chains", multiple=True, help="Restrict the run to a chain (repeatable)")
@click.option("--eps", type=float, help="DBSCAN eps for the selected chains")
@click.option("--min-pts", type=int, help="DBSCAN min_pts for the selected chains")
@click.option("--match-mode", type=click.Choice(MATCH_MODES), help="Activity match mode")
@click.option("--dot-dir", help="Write DOT files of flagged clusters here")
@click.pass_context
def detect(
    ctx: click.Context,
    config_path: str,
    out: Optional[str],
    jobs: Optional[int],
    chains: Tuple[str, ...],
    eps: Optional[float],
    min_pts: Optional[int],
    match_mode: Optional[str],
    dot_dir: Optional[str],
):
    """
    Run detection over a snapshot and write the report.
    """
    with _exit_codes():
        run, snapshot = _load_run(
            config_path, out, jobs=jobs, chains=chains, eps=eps, min_pts=min_pts, match_mode=match_mode
        )
        renderer = _ProgressRenderer(enabled=not ctx.obj.get("quiet"))
        with renderer.progress:
            report = pipeline.detect(snapshot, run, progress=renderer)

        report_dir = os.path.dirname(run.report_path)
        if report_dir:
            os.makedirs(report_dir, exist_ok=True)
        save_report(report, run.report_path)
        logger.info("Report saved to %s", run.report_path)

        target = os.path.abspath(dot_dir) if dot_dir else run.dot_dir
        if target:
            _export_dots(snapshot, run, report, target)
        click.echo(json.dumps({
            "report": run.report_path,
            "components": len(report.components),
            "flagged_accounts": len(report.flagged_accounts),
        }, indent=2))


@cli.command()
@click.argument("scenario")
@click.option("--out", "-o", required=True, help="Output directory")
@click.option("--seed", type=int, help="Override the scenario's RNG seed")
def simulate(scenario: str, out: str, seed: Optional[int]):
    """
    Generate a labelled synthetic snapshot from a scenario file.
    """
    with _exit_codes():
        cfg = ScenarioConfig.load(scenario)
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed)
        snapshot, truth = generate(cfg)
        write_bundle(out, snapshot, truth, cfg)
        click.echo(json.dumps({
            "out": out,
            "snapshot_id": snapshot.snapshot_id,
            "transactions": len(snapshot.transactions),
            "events": len(snapshot.events),
            "bots": len(truth.bots),
        }, indent=2))


@cli.command()
@click.argument("report_path")
@click.argument("truth_path")
def evaluate(report_path: str, truth_path: str):
    """
    Score a report against ground truth and print the metrics as JSON.
    """
    with _exit_codes():
        report = load_report(report_path)
        truth = GroundTruth.load(truth_path)
        metrics = pipeline.evaluate(report, truth)
        click.echo(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))


@cli.command("export-dot")
@click.option("--config", "-c", "config_path", required=True, help="Run configuration the report came from")
@click.argument("report_path")
@click.option("--cluster", "cluster_ids", multiple=True, help="Cluster id to export (repeatable; default: flagged)")
@click.option("--out", "-o", required=True, help="Output directory")
def export_dot(config_path: str, report_path: str, cluster_ids: Tuple[str, ...], out: str):
    """
    Write DOT renderings of cluster subgraphs with their patterns.
    """
    with _exit_codes():
        run, snapshot = _load_run(config_path)
        report = load_report(report_path)
        _check_snapshot(report, snapshot)
        known = {c.cluster_id for c in report.clusters()}
        missing = sorted(set(cluster_ids) - known)
        if missing:
            raise ReportError(f"unknown cluster id(s): {', '.join(missing)}")
        written = _export_dots(snapshot, run, report, out, cluster_ids)
        click.echo(json.dumps({"out": out, "files": written}, indent=2))


@cli.command()
@click.option("--config", "-c", "config_path", required=True, help="Run configuration (YAML or JSON)")
@click.option("--chain", required=True, help="Chain to tune")
@click.option("--eps-grid", default="0.1,0.2,0.3,0.4,0.5,0.6", callback=_grid(float), help="Comma-separated eps values")
@click.option("--min-pts-grid", default="2,3,4,5", callback=_grid(int), help="Comma-separated min_pts values")
@click.option("--match-mode", type=click.Choice(MATCH_MODES), help="Activity match mode")
def tune(config_path: str, chain: str, eps_grid: List[float], min_pts_grid: List[int], match_mode: Optional[str]):
    """
    Grid-search DBSCAN parameters for a chain by silhouette.
    """
    with _exit_codes():
        run, snapshot = _load_run(config_path, chains=(chain,), match_mode=match_mode)
        scores: Dict[Tuple[float, int], Optional[float]] = {}
        best = pipeline.tune_chain(snapshot, run, chain, eps_grid, min_pts_grid, scores)

        table = Table(title=f"Silhouette on {chain}")
        table.add_column("eps", justify="right")
        for min_pts in sorted(set(min_pts_grid)):
            table.add_column(f"min_pts={min_pts}", justify="right")
        for eps in sorted(set(eps_grid)):
            cells = []
            for min_pts in sorted(set(min_pts_grid)):
                score = scores.get((eps, min_pts))
                cells.append("-" if score is None else f"{score:.3f}")
            table.add_row(f"{eps:.3f}", *cells)
        Console().print(table)
        click.echo(json.dumps({"chain": chain, "eps": best.eps, "min_pts": best.min_pts}))


@cli.command()
@click.option("--config", "-c", "config_path", required=True, help="Run configuration the report came from")
@click.argument("report_path")
@click.argument("cluster_id")
def inspect(config_path: str, report_path: str, cluster_id: str):
    """
    Show the activity sequences of a reported cluster.
    """
    with _exit_codes():
        _, snapshot = _load_run(config_path)
        report = load_report(report_path)
        _check_snapshot(report, snapshot)
        cluster = next((c for c in report.clusters() if c.cluster_id == cluster_id), None)
        if cluster is None:
            raise ReportError(f"unknown cluster id: {cluster_id}")

        sequences, _ = build_activity_sequences(snapshot.events)
        rows = interaction_table(sequences, cluster.accounts)
        table = Table(title=f"{cluster_id} (mean similarity {cluster.mean_similarity:.3f})")
        table.add_column("Account")
        for i in range(1, len(rows[0]) if rows else 1):
            table.add_column(str(i))
        for row in rows:
            table.add_row(*row)
        Console().print(table)


def _find_component(report: DetectionReport, component_id: str, chain: Optional[str]) -> ComponentResult:
    matches = [
        c for c in report.components
        if c.component_id == component_id and (chain is None or c.chain == chain)
    ]
    if not matches:
        raise ReportError(f"unknown component: {component_id}")
    if len(matches) > 1:
        raise ReportError(f"{component_id} spans several chains; pass --chain")
    return matches[0]


@cli.command("export-matrix")
@click.option("--config", "-c", "config_path", required=True, help="Run configuration the report came from")
@click.argument("report_path")
@click.argument("component_id")
@click.option("--chain", help="Chain of the component, when it spans several")
@click.option("--out", "-o", required=True, help="CSV destination")
def export_matrix(config_path: str, report_path: str, component_id: str, chain: Optional[str], out: str):
    """
    Write a component's similarity matrix, grouped by cluster, as CSV.
    """
    with _exit_codes():
        run, snapshot = _load_run(config_path)
        report = load_report(report_path)
        _check_snapshot(report, snapshot)
        component = _find_component(report, component_id, chain)

        clustering = Clustering(
            clusters=tuple(frozenset(c.accounts) for c in component.clusters),
            noise=frozenset(component.noise),
            params=run.params_for(component.chain),
        )
        accounts = sorted({a for c in component.clusters for a in c.accounts} | set(component.noise))
        sequences, _ = build_activity_sequences(snapshot.events)
        matrix = similarity_matrix([sequences[a] for a in accounts], run.match_mode)
        order, reordered = reorder_matrix(clustering, accounts, matrix)
        write_matrix_csv(out, order, reordered)
        click.echo(json.dumps({"out": out, "accounts": len(order)}, indent=2))


def main():
    """
    Main entry point for the CLI.
    """
    try:
        cli()
    except Exception as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
