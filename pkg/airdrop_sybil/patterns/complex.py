"""
Two-stage compositions of the fundamental patterns.
"""

from typing import Iterable, List

from airdrop_sybil.ingest import Address
from airdrop_sybil.patterns.base import (
    BasePatternSearch,
    COMPLEX,
    COMPLEX_ORDERS,
    ComplexPattern,
    RADIAL_FIRST,
    check_seeds,
)
from airdrop_sybil.patterns.radial import search_radial
from airdrop_sybil.patterns.sequential import search_sequential
from airdrop_sybil.txgraph import Subgraph


def search_complex(sg: Subgraph, seeds: Iterable[Address], order: str = RADIAL_FIRST) -> List[ComplexPattern]:
    """
    Search a two-stage composition.

    ``radial_first``: radial search over the seeds, then a sequential search
    seeded with the returned centers; one composition is emitted.
    ``sequential_first``: sequential search over the seeds, then for each
    sequential pattern a radial search seeded with its path vertices; one
    composition per sequential pattern.

    A composition is emitted whenever its first stage is non-empty.

    Args:
        sg: The cluster subgraph
        seeds: Seed accounts within the subgraph
        order: ``radial_first`` or ``sequential_first``

    Returns:
        The compositions found

    Raises:
        ValueError: On an unknown order
    """
    if order not in COMPLEX_ORDERS:
        raise ValueError(f"unknown composition order {order!r}")
    seeds = check_seeds(sg, seeds)

    if order == RADIAL_FIRST:
        radial = search_radial(sg, seeds)
        if not radial:
            return []
        centers = {p.center for p in radial}
        chained = search_sequential(sg, centers)
        return [ComplexPattern(order=order, first_stage=tuple(radial), second_stage=tuple(chained))]

    compositions = []
    for pattern in search_sequential(sg, seeds):
        fanned = search_radial(sg, pattern.path_vertices)
        compositions.append(
            ComplexPattern(order=order, first_stage=(pattern,), second_stage=tuple(fanned))
        )
    return compositions


class ComplexSearch(BasePatternSearch):
    """Runs one composition order."""

    name = COMPLEX

    def __init__(self, order: str = RADIAL_FIRST):
        if order not in COMPLEX_ORDERS:
            raise ValueError(f"unknown composition order {order!r}")
        self.order = order

    def search(self, sg: Subgraph, seeds: Iterable[Address]) -> List[ComplexPattern]:
        return search_complex(sg, seeds, self.order)
