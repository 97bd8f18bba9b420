"""
End-to-end Sybil detection: components, clusters, transfer patterns, report.
"""

import hashlib
import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from functools import cached_property
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from airdrop_sybil import __version__
from airdrop_sybil.activity import ActivitySequence, build_activity_sequences, similarity_matrix
from airdrop_sybil.cluster import ClusterParams, dbscan, mean_pairwise_similarity, silhouette, tune_params
from airdrop_sybil.config import ConfigError, RunConfig
from airdrop_sybil.ingest import (
    Address,
    DappEvent,
    FilterConfig,
    ParseDiagnostic,
    Transaction,
    apply_filters,
    serialize_events,
    serialize_transactions,
)
from airdrop_sybil.patterns import COMPLEX, RADIAL, SEQUENTIAL, get_pattern_searches
from airdrop_sybil.report import (
    ClusterResult,
    ComponentResult,
    DetectionReport,
    ReportError,
    RunMetadata,
)
from airdrop_sybil.txgraph import TransactionGraph, build_graph, connected_components, extract_subgraph, merge_graphs

logger = logging.getLogger(__name__)

ProgressFn = Callable[[Dict[str, Any]], None]

BOT_PATTERNS = (RADIAL, SEQUENTIAL, COMPLEX)


@dataclass
class Snapshot:
    """
    Parsed snapshot contents: transfers, DApp events and filter lists.
    """
    transactions: List[Transaction] = field(default_factory=list)
    events: List[DappEvent] = field(default_factory=list)
    filters: FilterConfig = field(default_factory=FilterConfig)
    diagnostics: Dict[str, List[ParseDiagnostic]] = field(default_factory=dict)

    @property
    def chains(self) -> List[str]:
        return sorted({tx.chain for tx in self.transactions} | {e.chain for e in self.events})

    def transactions_on(self, chain: str) -> List[Transaction]:
        return [tx for tx in self.transactions if tx.chain == chain]

    @property
    def accounts(self) -> Set[Address]:
        found = {e.account for e in self.events}
        for tx in self.transactions:
            found.add(tx.sender)
            found.add(tx.receiver)
        return found

    @cached_property
    def snapshot_id(self) -> str:
        """First 16 hex digits of SHA-256 over the canonical transactions then events."""
        digest = hashlib.sha256()
        digest.update(serialize_transactions(self.transactions).encode("utf-8"))
        digest.update(serialize_events(self.events).encode("utf-8"))
        return digest.hexdigest()[:16]


@dataclass(frozen=True)
class BotTruth:
    pattern: str
    chain: str
    treasury: Address
    accounts: FrozenSet[Address]


@dataclass
class GroundTruth:
    """
    Labels of a synthetic snapshot: which accounts belong to which bot.
    """
    snapshot_id: str
    bots: Dict[str, BotTruth] = field(default_factory=dict)

    def __post_init__(self):
        owner: Dict[Address, str] = {}
        for bot_id, bot in self.bots.items():
            if bot.pattern not in BOT_PATTERNS:
                raise ReportError(f"bot {bot_id}: unknown pattern type '{bot.pattern}'")
            for account in bot.accounts:
                if account in owner:
                    raise ReportError(f"account {account} labeled by bots {owner[account]} and {bot_id}")
                owner[account] = bot_id

    @property
    def bot_accounts(self) -> Set[Address]:
        return {a for bot in self.bots.values() for a in bot.accounts}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "snapshot_id": self.snapshot_id,
            "bots": {
                bot_id: {
                    "pattern": bot.pattern,
                    "chain": bot.chain,
                    "treasury": bot.treasury.value,
                    "accounts": sorted(a.value for a in bot.accounts),
                }
                for bot_id, bot in sorted(self.bots.items())
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GroundTruth":
        try:
            bots = {}
            for bot_id, entry in data["bots"].items():
                chain = entry["chain"]
                bots[bot_id] = BotTruth(
                    pattern=entry["pattern"],
                    chain=chain,
                    treasury=Address.parse(chain, entry["treasury"]),
                    accounts=frozenset(Address.parse(chain, v) for v in entry["accounts"]),
                )
            return cls(snapshot_id=data["snapshot_id"], bots=bots)
        except ReportError:
            raise
        except (KeyError, TypeError, AttributeError, ValueError) as e:
            raise ReportError(f"malformed ground truth: {e}") from e

    def save(self, file_path: str) -> None:
        with open(file_path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, file_path: str) -> "GroundTruth":
        with open(file_path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ReportError(f"ground truth is not JSON: {e}") from e
        if not isinstance(data, dict):
            raise ReportError("ground truth root must be an object")
        return cls.from_dict(data)


@dataclass
class Metrics:
    """
    Account-level detection quality. ``None`` marks an undefined ratio (0/0).
    """
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    per_pattern_recall: Dict[str, Optional[float]] = field(default_factory=dict)
    true_positives: int = 0
    flagged: int = 0
    bot_accounts: int = 0

    def to_dict(self) -> Dict[str, Any]:
        """Undefined values are left out rather than reported as 0 or 1."""
        data: Dict[str, Any] = {
            "true_positives": self.true_positives,
            "flagged": self.flagged,
            "bot_accounts": self.bot_accounts,
        }
        for name in ("precision", "recall", "f1"):
            value = getattr(self, name)
            if value is not None:
                data[name] = value
        data["per_pattern_recall"] = {
            k: v for k, v in sorted(self.per_pattern_recall.items()) if v is not None
        }
        return data


@dataclass(frozen=True)
class ComponentTask:
    component_id: str
    chain: str
    size: int
    accounts: Tuple[Address, ...]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _notify(progress: Optional[ProgressFn], kind: str, message: str, **extra: Any) -> None:
    """Send a progress event if a handler is installed."""
    if progress:
        try:
            progress({"type": kind, "message": message, **extra})
        except Exception as e:
            logger.debug("Progress handler failed: %s", e)


def eligible_accounts(
    events: Iterable[DappEvent],
    min_volume: Decimal = Decimal(0),
    min_events: int = 0,
) -> Set[Address]:
    """
    Accounts meeting the airdrop eligibility prerequisite.

    Args:
        events: DApp events
        min_volume: Minimum summed event amount (missing amounts count as 0)
        min_events: Minimum number of events

    Returns:
        The eligible accounts
    """
    volume: Dict[Address, Decimal] = defaultdict(Decimal)
    count: Dict[Address, int] = defaultdict(int)
    for event in events:
        count[event.account] += 1
        if event.amount is not None:
            volume[event.account] += event.amount
    return {a for a in count if count[a] >= min_events and volume[a] >= min_volume}


def _run_chains(snapshot: Snapshot, config: RunConfig) -> List[str]:
    if config.chains is not None:
        for chain in config.chains:
            config.params_for(chain)
        return list(config.chains)
    for chain in snapshot.chains:
        config.params_for(chain)
    return snapshot.chains


def _process_component(
    task: ComponentTask,
    graphs: Mapping[str, TransactionGraph],
    sequences: Mapping[Address, ActivitySequence],
    config: RunConfig,
) -> ComponentResult:
    """Cluster one component on one chain and search patterns per cluster."""
    graph = graphs[task.chain]
    accounts = list(task.accounts)
    similarity = similarity_matrix([sequences[a] for a in accounts], config.match_mode)
    distance = 1.0 - similarity
    clustering = dbscan(accounts, distance, config.params_for(task.chain))

    score = None
    if len(clustering.clusters) >= 2:
        score = silhouette(clustering, distance, accounts)

    searches = get_pattern_searches(
        config.patterns.sequential, config.patterns.radial, list(config.patterns.complex)
    )
    clusters = []
    for k, members in enumerate(clustering.clusters):
        ordered = sorted(members)
        result = ClusterResult(
            cluster_id=f"{task.component_id}-{task.chain}-{k}",
            accounts=ordered,
            mean_similarity=mean_pairwise_similarity(ordered, similarity, accounts),
        )
        seeds = [a for a in ordered if a in graph]
        if len(seeds) >= 2 and searches:
            sg = extract_subgraph(graph, seeds, config.caps)
            for search in searches:
                found = search.search(sg, seeds)
                getattr(result, search.name).extend(found)
        result.flagged = any(len(p.accounts & members) >= 2 for p in result.patterns)
        clusters.append(result)

    return ComponentResult(
        component_id=task.component_id,
        chain=task.chain,
        size=task.size,
        accounts=len(accounts),
        clusters=clusters,
        noise=sorted(clustering.noise),
        silhouette=score,
    )


_WORKER_STATE: Optional[Tuple[Mapping[str, TransactionGraph], Mapping[Address, ActivitySequence], RunConfig]] = None


def _pool_init(graphs, sequences, config) -> None:
    global _WORKER_STATE
    _WORKER_STATE = (graphs, sequences, config)


def _pool_task(task: ComponentTask) -> ComponentResult:
    graphs, sequences, config = _WORKER_STATE
    return _process_component(task, graphs, sequences, config)


def _plan_components(
    graphs: Mapping[str, TransactionGraph],
    sequences: Mapping[Address, ActivitySequence],
    chains: List[str],
    min_component_size: int,
) -> List[ComponentTask]:
    """
    One task per (component, chain) with enough eligible accounts.

    Components come from the merged cross-chain graph; an account counts once
    however many chains it is active on.
    """
    active: Dict[str, Set[str]] = defaultdict(set)
    for account in sequences:
        active[account.value].add(account.chain)

    merged = merge_graphs(graphs[c] for c in chains)
    tasks = []
    skipped = 0
    for index, component in enumerate(connected_components(merged)):
        values = sorted(v.value for v in component if v.value in active)
        if len(values) < min_component_size:
            skipped += 1
            continue
        component_id = f"cc-{index:05d}"
        for chain in chains:
            accounts = tuple(Address(chain, v) for v in values if chain in active[v])
            if accounts:
                tasks.append(ComponentTask(component_id, chain, len(component), accounts))
    logger.info("Planned %d component tasks (%d small components skipped)", len(tasks), skipped)
    return tasks


@dataclass
class PreparedRun:
    """Per-chain graphs and clusterable sequences of a snapshot."""
    chains: List[str]
    graphs: Dict[str, TransactionGraph]
    sequences: Dict[Address, ActivitySequence]
    skipped_events: List[ParseDiagnostic] = field(default_factory=list)


def chain_graph(snapshot: Snapshot, chain: str) -> TransactionGraph:
    """The filtered transaction graph of one chain."""
    return build_graph(apply_filters(snapshot.transactions_on(chain), snapshot.filters), chain=chain)


def prepare(snapshot: Snapshot, config: RunConfig) -> PreparedRun:
    """
    Filter transfers, build graphs and select the accounts to cluster.

    Accounts are dropped when filtered, ineligible, or hubs of their chain.

    Raises:
        ConfigError: If a chain to analyse has no clustering parameters
    """
    chains = _run_chains(snapshot, config)
    graphs = {chain: chain_graph(snapshot, chain) for chain in chains}

    events = [
        e for e in snapshot.events
        if e.chain in graphs and not snapshot.filters.excludes(e.account)
    ]
    sequences, skipped = build_activity_sequences(events)
    if config.eligibility.enabled:
        eligible = eligible_accounts(events, config.eligibility.min_volume, config.eligibility.min_events)
        sequences = {a: s for a, s in sequences.items() if a in eligible}

    threshold = config.caps.hub_degree_threshold
    hubs = {
        a for a in sequences
        if a in graphs[a.chain] and graphs[a.chain].degree(a) > threshold
    }
    if hubs:
        logger.info("Excluding %d hub accounts from clustering", len(hubs))
        sequences = {a: s for a, s in sequences.items() if a not in hubs}
    return PreparedRun(chains=chains, graphs=graphs, sequences=sequences, skipped_events=skipped)


def tune_chain(
    snapshot: Snapshot,
    config: RunConfig,
    chain: str,
    eps_grid: Iterable[float],
    min_pts_grid: Iterable[int],
    scores: Optional[Dict[Tuple[float, int], Optional[float]]] = None,
) -> ClusterParams:
    """
    Grid-search clustering parameters for one chain.

    Uses every account that detect would cluster on the chain.

    Raises:
        ConfigError: If the chain is not analysed under this config
        ValueError: If no grid point yields two clusters
    """
    prepared = prepare(snapshot, config)
    if chain not in prepared.graphs:
        raise ConfigError(f"chain '{chain}' is not part of this run")
    tasks = _plan_components(prepared.graphs, prepared.sequences, prepared.chains, config.min_component_size)
    accounts = sorted({a for t in tasks if t.chain == chain for a in t.accounts})
    similarity = similarity_matrix([prepared.sequences[a] for a in accounts], config.match_mode)
    return tune_params(accounts, 1.0 - similarity, eps_grid, min_pts_grid, scores)


def detect(
    snapshot: Snapshot,
    config: RunConfig = RunConfig(),
    progress: Optional[ProgressFn] = None,
) -> DetectionReport:
    """
    Run the full detection framework over a snapshot.

    Transfers are filtered and turned into one graph per chain; components
    are discovered on the merged cross-chain graph; accounts of each
    component are clustered by activity similarity per chain; each cluster is
    confirmed by transfer-pattern search on that chain's graph.

    Args:
        snapshot: The parsed snapshot
        config: Validated run settings
        progress: Optional callback receiving progress event dicts

    Returns:
        The detection report

    Raises:
        ConfigError: If a chain to analyse has no clustering parameters
    """
    started_at = _now()
    prepared = prepare(snapshot, config)
    chains, graphs, sequences = prepared.chains, prepared.graphs, prepared.sequences
    _notify(progress, "start", f"Analysing {len(chains)} chain(s)", chains=chains)

    tasks = _plan_components(graphs, sequences, chains, config.min_component_size)
    _notify(progress, "planned", f"{len(tasks)} component tasks", total=len(tasks))

    results: List[ComponentResult] = []
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(
            max_workers=config.jobs, initializer=_pool_init, initargs=(graphs, sequences, config)
        ) as pool:
            for result in pool.map(_pool_task, tasks):
                results.append(result)
                _notify(progress, "component", result.component_id, done=len(results), total=len(tasks))
    else:
        for task in tasks:
            results.append(_process_component(task, graphs, sequences, config))
            _notify(progress, "component", task.component_id, done=len(results), total=len(tasks))

    flagged = sorted({a for r in results for c in r.clusters if c.flagged for a in c.accounts})
    skipped = {name: len(d) for name, d in snapshot.diagnostics.items() if d}
    if prepared.skipped_events:
        skipped["activity"] = len(prepared.skipped_events)

    report = DetectionReport(
        metadata=RunMetadata(
            config_hash=config.config_hash(),
            snapshot_id=snapshot.snapshot_id,
            version=__version__,
            started_at=started_at,
            finished_at=_now(),
        ),
        components=results,
        flagged_accounts=flagged,
        skipped_records=skipped,
    )
    logger.info("Flagged %d accounts in %d components", len(flagged), len(results))
    _notify(progress, "done", f"{len(flagged)} accounts flagged", flagged=len(flagged))
    return report


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def evaluate(report: DetectionReport, truth: GroundTruth) -> Metrics:
    """
    Score a report against ground truth.

    A bot counts as recovered when at least half of its accounts sit together
    in one flagged cluster.

    Raises:
        ReportError: If report and ground truth describe different snapshots
    """
    if report.snapshot_id != truth.snapshot_id:
        raise ReportError(
            f"snapshot mismatch: report {report.snapshot_id}, ground truth {truth.snapshot_id}"
        )
    flagged = set(report.flagged_accounts)
    bots = truth.bot_accounts
    tp = len(flagged & bots)
    precision = _ratio(tp, len(flagged))
    recall = _ratio(tp, len(bots))
    f1 = None
    if precision is not None and recall is not None:
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0

    flagged_clusters = [frozenset(c.accounts) for c in report.clusters() if c.flagged]
    recovered: Dict[str, int] = defaultdict(int)
    totals: Dict[str, int] = defaultdict(int)
    for bot in truth.bots.values():
        totals[bot.pattern] += 1
        if any(2 * len(bot.accounts & members) >= len(bot.accounts) for members in flagged_clusters):
            recovered[bot.pattern] += 1

    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        per_pattern_recall={p: _ratio(recovered[p], totals[p]) for p in BOT_PATTERNS if totals[p]},
        true_positives=tp,
        flagged=len(flagged),
        bot_accounts=len(bots),
    )
