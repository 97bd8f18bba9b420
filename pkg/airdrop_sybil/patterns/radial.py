"""
Radial pattern search.
"""

import logging
from typing import Dict, Iterable, List, Optional, Set, Tuple

from airdrop_sybil.ingest import Address
from airdrop_sybil.patterns.base import BasePatternSearch, RadialPattern, RADIAL, check_seeds
from airdrop_sybil.txgraph import Subgraph, reach_within, undirected_ball

logger = logging.getLogger(__name__)

RADIAL_HOPS = 2
MIN_SPOKES = 2


def best_center(
    sg: Subgraph,
    remaining: Set[Address],
    reach: Dict[Address, Set[Address]],
) -> Optional[Tuple[Address, frozenset]]:
    """
    The candidate center reaching the most remaining seeds.

    Candidates are all vertices within two undirected hops of a remaining
    seed; ties go to the smallest address.
    """
    best: Optional[Tuple[Address, frozenset]] = None
    for v in sorted(undirected_ball(sg.graph, remaining, RADIAL_HOPS)):
        if v not in reach:
            reach[v] = reach_within(sg.graph, v, RADIAL_HOPS)
        covered = frozenset(reach[v] & remaining)
        if best is None or len(covered) > len(best[1]):
            best = (v, covered)
    return best


def search_radial(sg: Subgraph, seeds: Iterable[Address]) -> List[RadialPattern]:
    """
    Greedy radial pattern search.

    Each round picks the center reaching (within two directed hops) the most
    remaining seeds, emits it with those seeds as spokes and removes them.
    Stops when the best center covers fewer than two seeds.

    Args:
        sg: The cluster subgraph
        seeds: Seed accounts within the subgraph

    Returns:
        The radial patterns in emission order
    """
    remaining = set(check_seeds(sg, seeds))
    reach: Dict[Address, Set[Address]] = {}
    patterns: List[RadialPattern] = []
    while remaining:
        chosen = best_center(sg, remaining, reach)
        if chosen is None or len(chosen[1]) < MIN_SPOKES:
            break
        center, spokes = chosen
        patterns.append(RadialPattern(center=center, spokes=spokes))
        remaining -= spokes
        logger.debug("Radial pattern at %s with %d spokes", center.short, len(spokes))
    return patterns


class RadialSearch(BasePatternSearch):
    """Radial (star) search."""

    name = RADIAL

    def search(self, sg: Subgraph, seeds: Iterable[Address]) -> List[RadialPattern]:
        return search_radial(sg, seeds)
