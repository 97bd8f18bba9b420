"""
Base class and result types for token-transfer pattern searches.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Tuple, Union

from airdrop_sybil.ingest import Address
from airdrop_sybil.txgraph import Subgraph

SEQUENTIAL = "sequential"
RADIAL = "radial"
COMPLEX = "complex"

RADIAL_FIRST = "radial_first"
SEQUENTIAL_FIRST = "sequential_first"
COMPLEX_ORDERS = (RADIAL_FIRST, SEQUENTIAL_FIRST)


@dataclass(frozen=True)
class SequentialPattern:
    """
    A funding chain through the subgraph.

    ``path_vertices`` is ordered so each vertex reaches the next; it covers at
    least three seeds.
    """
    path_vertices: Tuple[Address, ...]
    covered_seed: FrozenSet[Address]

    kind = SEQUENTIAL

    @property
    def accounts(self) -> FrozenSet[Address]:
        return self.covered_seed


@dataclass(frozen=True)
class RadialPattern:
    """A center reaching at least two seeds within two directed hops."""
    center: Address
    spokes: FrozenSet[Address]

    kind = RADIAL

    @property
    def accounts(self) -> FrozenSet[Address]:
        return self.spokes


@dataclass(frozen=True)
class ComplexPattern:
    """
    A two-stage composition.

    For ``radial_first`` the second stage is a sequential search seeded with
    the first stage's centers; for ``sequential_first`` it is a radial search
    seeded with one sequential pattern's path vertices.
    """
    order: str
    first_stage: Tuple[Union[SequentialPattern, RadialPattern], ...]
    second_stage: Tuple[Union[SequentialPattern, RadialPattern], ...]

    kind = COMPLEX

    @property
    def join_vertices(self) -> FrozenSet[Address]:
        if self.order == RADIAL_FIRST:
            return frozenset(p.center for p in self.first_stage)
        return frozenset(v for p in self.first_stage for v in p.path_vertices)

    @property
    def accounts(self) -> FrozenSet[Address]:
        covered = set()
        for pattern in self.first_stage + self.second_stage:
            covered.update(pattern.accounts)
        return frozenset(covered)


Pattern = Union[SequentialPattern, RadialPattern, ComplexPattern]


class BasePatternSearch(ABC):
    """
    Abstract base class for pattern searches.

    Every search works on a cluster-centred subgraph and a seed set (the
    cluster's accounts present in that subgraph), and is deterministic.
    """

    name: str = ""

    @abstractmethod
    def search(self, sg: Subgraph, seeds: Iterable[Address]) -> List[Pattern]:
        """
        Search the subgraph for patterns over the seeds.

        Args:
            sg: The cluster subgraph
            seeds: Seed accounts, a subset of the subgraph's vertices

        Returns:
            The emitted patterns, in emission order
        """
        pass


def check_seeds(sg: Subgraph, seeds: Iterable[Address]) -> FrozenSet[Address]:
    seeds = frozenset(seeds)
    missing = seeds - set(sg.graph.nodes)
    if missing:
        raise ValueError(f"seeds outside the subgraph: {sorted(missing)[:3]}")
    return seeds
