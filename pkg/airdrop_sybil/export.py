"""
Graph and matrix exports: DOT renderings of subgraphs with pattern overlays,
and cluster-grouped similarity matrices as CSV.
"""

import logging
from typing import Iterable, Sequence

import graphviz
import numpy as np

from airdrop_sybil.ingest import Address
from airdrop_sybil.patterns import ComplexPattern, Pattern, RadialPattern, SequentialPattern
from airdrop_sybil.txgraph import Subgraph

logger = logging.getLogger(__name__)

CENTER_COLOR = "red"
PATH_COLOR = "blue"


def _flatten(patterns: Iterable[Pattern]) -> Iterable[Pattern]:
    for pattern in patterns:
        if isinstance(pattern, ComplexPattern):
            yield from _flatten(pattern.first_stage)
            yield from _flatten(pattern.second_stage)
        else:
            yield pattern


def subgraph_to_dot(sg: Subgraph, patterns: Iterable[Pattern] = (), name: str = "subgraph") -> graphviz.Digraph:
    """
    Render a subgraph, marking seeds and overlaying patterns.

    Vertices are labelled by their first 8 hex digits and emitted in address
    order, edges in (source, target) order, so equal inputs give equal text.
    Radial centers are drawn in red; consecutive sequential path vertices are
    joined in blue, dashed where the hop is indirect.

    Args:
        sg: The subgraph to render
        patterns: Patterns found on it
        name: Graph name

    Returns:
        The graphviz digraph
    """
    flat = list(_flatten(patterns))
    centers = {p.center for p in flat if isinstance(p, RadialPattern)}
    path_hops = set()
    for p in flat:
        if isinstance(p, SequentialPattern):
            path_hops.update(zip(p.path_vertices, p.path_vertices[1:]))

    dot = graphviz.Digraph(name=name, comment=f"{len(sg.graph)} vertices, {len(sg.seed)} seeds")
    for v in sorted(sg.graph.nodes):
        attrs = {"label": v.short}
        if v in sg.seed:
            attrs.update(style="filled", fillcolor="lightgrey")
        if v in centers:
            attrs.update(color=CENTER_COLOR, penwidth="2")
        dot.node(v.value, **attrs)

    for u, v in sorted(sg.graph.edges):
        agg = sg.graph[u][v]["agg"]
        attrs = {"label": str(agg.tx_count)}
        if (u, v) in path_hops:
            attrs.update(color=PATH_COLOR, penwidth="2")
        dot.edge(u.value, v.value, **attrs)

    for u, v in sorted(path_hops):
        if not sg.graph.has_edge(u, v):
            dot.edge(u.value, v.value, color=PATH_COLOR, style="dashed", constraint="false")
    return dot


def write_dot(dot: graphviz.Digraph, file_path: str) -> None:
    """Write the DOT source; no graphviz executable is needed."""
    with open(file_path, "w", encoding="utf-8") as f:
        f.write(dot.source)
    logger.debug("Wrote %s", file_path)


def write_matrix_csv(file_path: str, accounts: Sequence[Address], matrix: np.ndarray) -> None:
    """
    Write a square matrix as CSV; the header names the accounts, rows follow
    the same order.
    """
    if matrix.shape != (len(accounts), len(accounts)):
        raise ValueError("matrix shape does not match the accounts")
    header = ",".join(a.value for a in accounts)
    np.savetxt(file_path, matrix, fmt="%.6f", delimiter=",", header=header, comments="")
