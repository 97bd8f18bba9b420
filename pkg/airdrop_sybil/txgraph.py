"""
Transaction graphs: per-chain construction, components, cluster subgraphs,
SCC condensation and reachability.
"""

import logging
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx

from airdrop_sybil.ingest import Address, Transaction

logger = logging.getLogger(__name__)

MERGED_CHAIN = "*"


@dataclass(frozen=True)
class EdgeAggregate:
    """All transfers along one ordered account pair, collapsed."""
    tx_count: int
    total_amount: Decimal
    first_ts: int
    last_ts: int


@dataclass(frozen=True)
class SubgraphCaps:
    max_vertices: int = 5000
    hub_degree_threshold: int = 1000


class TransactionGraph:
    """
    Simple directed graph of aggregated transfers on one chain.

    The underlying ``networkx.DiGraph`` stores an ``agg`` attribute
    (EdgeAggregate) on every edge. No self-loops, at most one edge per
    ordered pair.
    """

    def __init__(self, chain: str, graph: Optional[nx.DiGraph] = None):
        self.chain = chain
        self.graph = graph if graph is not None else nx.DiGraph()

    @property
    def vertices(self) -> Set[Address]:
        return set(self.graph.nodes)

    @property
    def edges(self) -> Dict[Tuple[Address, Address], EdgeAggregate]:
        return {(u, v): data["agg"] for u, v, data in self.graph.edges(data=True)}

    def degree(self, vertex: Address) -> int:
        return self.graph.degree(vertex)

    def __contains__(self, vertex: Address) -> bool:
        return vertex in self.graph


@dataclass
class Subgraph:
    """A cluster-centred slice of a TransactionGraph."""
    seed: FrozenSet[Address]
    graph: nx.DiGraph
    distances: Dict[Address, int] = field(default_factory=dict)

    @property
    def vertices(self) -> Set[Address]:
        return set(self.graph.nodes)

    @property
    def edges(self) -> Dict[Tuple[Address, Address], EdgeAggregate]:
        return {(u, v): data["agg"] for u, v, data in self.graph.edges(data=True)}


@dataclass(frozen=True)
class CondensationDag:
    """
    SCC condensation of a subgraph.

    SCC indices follow the smallest member address; ``topo_order`` is the
    lexicographically smallest topological order of those indices.
    """
    sccs: Tuple[FrozenSet[Address], ...]
    dag_edges: FrozenSet[Tuple[int, int]]
    vertex_to_scc: Dict[Address, int]
    topo_order: Tuple[int, ...]

    def predecessors(self) -> Dict[int, List[int]]:
        preds: Dict[int, List[int]] = {i: [] for i in range(len(self.sccs))}
        for u, v in sorted(self.dag_edges):
            preds[v].append(u)
        return preds

    def members(self, index: int) -> List[Address]:
        return sorted(self.sccs[index])


class ReachabilityGraph:
    """
    Undirected graph with an edge wherever one vertex reaches the other.
    """

    def __init__(self, graph: nx.Graph):
        self.graph = graph

    @property
    def vertices(self) -> Set[Address]:
        return set(self.graph.nodes)

    @property
    def edges(self) -> Set[FrozenSet[Address]]:
        return {frozenset((u, v)) for u, v in self.graph.edges}

    def has_edge(self, u: Address, v: Address) -> bool:
        return self.graph.has_edge(u, v)

    def is_clique(self, vertices: Iterable[Address]) -> bool:
        nodes = sorted(set(vertices))
        return all(
            self.graph.has_edge(u, v)
            for i, u in enumerate(nodes)
            for v in nodes[i + 1:]
        )


def _add_transfer(graph: nx.DiGraph, u, v, amount: Decimal, ts: int) -> None:
    graph.add_node(u)
    graph.add_node(v)
    if u == v:
        return
    if graph.has_edge(u, v):
        agg = graph[u][v]["agg"]
        graph[u][v]["agg"] = EdgeAggregate(
            tx_count=agg.tx_count + 1,
            total_amount=agg.total_amount + amount,
            first_ts=min(agg.first_ts, ts),
            last_ts=max(agg.last_ts, ts),
        )
    else:
        graph.add_edge(u, v, agg=EdgeAggregate(1, amount, ts, ts))


def build_graph(txs: List[Transaction], chain: Optional[str] = None) -> TransactionGraph:
    """
    Build the aggregated transfer graph of one chain.

    Args:
        txs: Filtered transactions, all from one chain
        chain: Chain name for an empty input (taken from the transactions otherwise)

    Returns:
        The transaction graph

    Raises:
        ValueError: If the transactions span several chains
    """
    chains = {tx.chain for tx in txs}
    if len(chains) > 1:
        raise ValueError(f"transactions span several chains: {sorted(chains)}")
    name = chains.pop() if chains else (chain or "")
    graph = nx.DiGraph()
    for tx in txs:
        _add_transfer(graph, tx.sender, tx.receiver, tx.amount, tx.timestamp)
    logger.debug(
        "Built %s graph: %d vertices, %d edges",
        name, graph.number_of_nodes(), graph.number_of_edges(),
    )
    return TransactionGraph(name, graph)


def merge_graphs(graphs: Iterable[TransactionGraph]) -> TransactionGraph:
    """
    Merge per-chain graphs into one graph keyed on the address value.

    Vertices of the result live on the pseudo-chain ``*``; the same EOA on two
    chains becomes one vertex.
    """
    merged = nx.DiGraph()
    for tg in graphs:
        for vertex in tg.graph.nodes:
            merged.add_node(vertex.on(MERGED_CHAIN))
        for u, v, data in tg.graph.edges(data=True):
            agg = data["agg"]
            mu, mv = u.on(MERGED_CHAIN), v.on(MERGED_CHAIN)
            if mu == mv:
                continue
            if merged.has_edge(mu, mv):
                old = merged[mu][mv]["agg"]
                agg = EdgeAggregate(
                    old.tx_count + agg.tx_count,
                    old.total_amount + agg.total_amount,
                    min(old.first_ts, agg.first_ts),
                    max(old.last_ts, agg.last_ts),
                )
            merged.add_edge(mu, mv, agg=agg)
    return TransactionGraph(MERGED_CHAIN, merged)


def connected_components(g: TransactionGraph) -> List[Set[Address]]:
    """Weakly connected components, sorted by their smallest member."""
    components = [set(c) for c in nx.weakly_connected_components(g.graph)]
    components.sort(key=min)
    return components


def extract_subgraph(
    g: TransactionGraph,
    seed: Iterable[Address],
    caps: SubgraphCaps = SubgraphCaps(),
) -> Subgraph:
    """
    Extract the seed accounts and everything within two undirected hops.

    Hubs (total degree above ``caps.hub_degree_threshold``) are neither kept
    nor traversed, unless they are seeds themselves. The vertex set is capped
    at ``caps.max_vertices`` by (distance, address); seeds are always kept.

    Args:
        g: The chain's transaction graph
        seed: The cluster accounts
        caps: Size and hub limits

    Returns:
        The induced subgraph with original edge directions

    Raises:
        ValueError: If the seed set is empty or not contained in the graph
    """
    seeds = frozenset(seed)
    if not seeds:
        raise ValueError("empty seed set")
    missing = [v for v in seeds if v not in g.graph]
    if missing:
        raise ValueError(f"seed vertices not in graph: {sorted(missing)[:3]}")

    def keep(v: Address) -> bool:
        return v in seeds or g.graph.degree(v) <= caps.hub_degree_threshold

    view = nx.subgraph_view(g.graph, filter_node=keep).to_undirected(as_view=True)
    distances: Dict[Address, int] = {}
    frontier = sorted(seeds)
    for v in frontier:
        distances[v] = 0
    for depth in (1, 2):
        next_frontier = set()
        for u in frontier:
            for w in view.neighbors(u):
                if w not in distances:
                    next_frontier.add(w)
        for w in next_frontier:
            distances[w] = depth
        frontier = sorted(next_frontier)

    ordered = sorted(distances, key=lambda v: (distances[v], v))
    limit = max(caps.max_vertices, len(seeds))
    if len(ordered) > limit:
        logger.info("Subgraph truncated from %d to %d vertices", len(ordered), limit)
        ordered = ordered[:limit]
    if len(seeds) > caps.max_vertices:
        logger.warning("Seed set of %d exceeds max_vertices=%d", len(seeds), caps.max_vertices)

    sub = nx.DiGraph()
    sub.add_nodes_from(ordered)
    kept = set(ordered)
    for u in ordered:
        for v in g.graph.successors(u):
            if v in kept:
                sub.add_edge(u, v, **g.graph[u][v])
    return Subgraph(seed=seeds, graph=sub, distances={v: distances[v] for v in ordered})


def condense_sccs(sg: Subgraph) -> CondensationDag:
    """Strongly connected component condensation with deterministic indexing."""
    sccs = sorted(
        (frozenset(c) for c in nx.strongly_connected_components(sg.graph)),
        key=min,
    )
    vertex_to_scc = {v: i for i, scc in enumerate(sccs) for v in scc}
    dag_edges = frozenset(
        (vertex_to_scc[u], vertex_to_scc[v])
        for u, v in sg.graph.edges
        if vertex_to_scc[u] != vertex_to_scc[v]
    )
    dag = nx.DiGraph()
    dag.add_nodes_from(range(len(sccs)))
    dag.add_edges_from(dag_edges)
    topo_order = tuple(nx.lexicographical_topological_sort(dag))
    return CondensationDag(
        sccs=tuple(sccs),
        dag_edges=dag_edges,
        vertex_to_scc=vertex_to_scc,
        topo_order=topo_order,
    )


def reachability_graph(sg: Subgraph) -> ReachabilityGraph:
    """
    Exact reachability closure of a subgraph, symmetrised.

    One BFS per vertex; subgraphs are capped, so this stays tractable.
    """
    closure = nx.Graph()
    closure.add_nodes_from(sg.graph.nodes)
    for u in sg.graph.nodes:
        for v in nx.descendants(sg.graph, u):
            if v != u:
                closure.add_edge(u, v)
    return ReachabilityGraph(closure)


def reach_within(graph: nx.DiGraph, source: Address, hops: int = 2) -> Set[Address]:
    """Vertices reachable from ``source`` by 1..hops directed edges, excluding itself."""
    lengths = nx.single_source_shortest_path_length(graph, source, cutoff=hops)
    return {v for v, d in lengths.items() if d >= 1 and v != source}


def undirected_ball(graph: nx.DiGraph, sources: Iterable[Address], radius: int = 2) -> Set[Address]:
    """All vertices within ``radius`` undirected hops of any source."""
    undirected = graph.to_undirected(as_view=True)
    ball: Set[Address] = set()
    for s in sources:
        if s in graph:
            ball.update(nx.single_source_shortest_path_length(undirected, s, cutoff=radius))
    return ball
