"""
Sequential pattern search.

A set of seeds lies on one transfer path exactly when it is contained in a
clique of the reachability graph. The reachability graph of a digraph is the
comparability graph of its SCC condensation, so the clique covering the most
seeds is the maximum-weight chain of the condensation, weighted by seeds per
SCC. That chain is found exactly by dynamic programming in topological order.
"""

import logging
from typing import Dict, Iterable, List, Optional, Tuple

from airdrop_sybil.ingest import Address
from airdrop_sybil.patterns.base import BasePatternSearch, SequentialPattern, SEQUENTIAL, check_seeds
from airdrop_sybil.txgraph import CondensationDag, Subgraph, condense_sccs

logger = logging.getLogger(__name__)

MIN_COVERAGE = 3


def _chain_sequence(cond: CondensationDag, chain: List[int]) -> Tuple[Address, ...]:
    return tuple(v for index in chain for v in cond.members(index))


def _walk_back(best_pred: Dict[int, Optional[int]], end: int) -> List[int]:
    chain = [end]
    while best_pred[chain[-1]] is not None:
        chain.append(best_pred[chain[-1]])
    chain.reverse()
    return chain


def max_seed_chain(cond: CondensationDag, seeds: Iterable[Address]) -> Tuple[List[int], int]:
    """
    Maximum-weight chain of the condensation with weight |SCC ∩ seeds|.

    Among chains of equal weight, fewer vertices win, then the
    lexicographically smallest vertex sequence.

    Args:
        cond: Condensation of the cluster subgraph
        seeds: The seed accounts

    Returns:
        The chain as SCC indices in path order, and its weight
    """
    seeds = frozenset(seeds)
    n = len(cond.sccs)
    if n == 0:
        return [], 0
    weight = [len(cond.sccs[i] & seeds) for i in range(n)]
    size = [len(cond.sccs[i]) for i in range(n)]
    preds = cond.predecessors()

    # rank of the best chain ending at each SCC: (-weight, vertex count), lower wins
    rank: Dict[int, Tuple[int, int]] = {}
    best_pred: Dict[int, Optional[int]] = {}

    def sequence(end: int) -> Tuple[Address, ...]:
        return _chain_sequence(cond, _walk_back(best_pred, end))

    for v in cond.topo_order:
        rank[v] = (-weight[v], size[v])
        best_pred[v] = None
        for p in preds[v]:
            cand = (rank[p][0] - weight[v], rank[p][1] + size[v])
            if cand < rank[v] or (
                cand == rank[v]
                and sequence(p) + tuple(cond.members(v)) < sequence(v)
            ):
                rank[v] = cand
                best_pred[v] = p

    best_end = 0
    for v in range(1, n):
        if rank[v] < rank[best_end] or (rank[v] == rank[best_end] and sequence(v) < sequence(best_end)):
            best_end = v
    if rank[best_end][0] == 0:
        return [], 0
    return _walk_back(best_pred, best_end), -rank[best_end][0]


def search_sequential(sg: Subgraph, seeds: Iterable[Address]) -> List[SequentialPattern]:
    """
    Greedy sequential pattern search.

    Repeatedly takes the chain covering the most remaining seeds; stops once
    the best chain covers two seeds or fewer. Emitted patterns cover disjoint
    seed sets.

    Args:
        sg: The cluster subgraph
        seeds: Seed accounts within the subgraph

    Returns:
        The sequential patterns in emission order
    """
    remaining = set(check_seeds(sg, seeds))
    cond = condense_sccs(sg)
    patterns: List[SequentialPattern] = []
    while len(remaining) >= MIN_COVERAGE:
        chain, covered_count = max_seed_chain(cond, remaining)
        if covered_count < MIN_COVERAGE:
            break
        path = _chain_sequence(cond, chain)
        covered = frozenset(v for v in path if v in remaining)
        patterns.append(SequentialPattern(path_vertices=path, covered_seed=covered))
        remaining -= covered
        logger.debug("Sequential pattern covering %d seeds over %d vertices", len(covered), len(path))
    return patterns


class SequentialSearch(BasePatternSearch):
    """Sequential (funding chain) search."""

    name = SEQUENTIAL

    def search(self, sg: Subgraph, seeds: Iterable[Address]) -> List[SequentialPattern]:
        return search_sequential(sg, seeds)
