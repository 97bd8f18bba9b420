"""
Token-transfer pattern searches over cluster subgraphs.
"""

from typing import List, Optional

from airdrop_sybil.patterns.base import (
    BasePatternSearch,
    ComplexPattern,
    Pattern,
    RadialPattern,
    SequentialPattern,
    COMPLEX,
    COMPLEX_ORDERS,
    RADIAL,
    RADIAL_FIRST,
    SEQUENTIAL,
    SEQUENTIAL_FIRST,
)
from airdrop_sybil.patterns.complex import ComplexSearch, search_complex
from airdrop_sybil.patterns.radial import RadialSearch, search_radial
from airdrop_sybil.patterns.sequential import SequentialSearch, max_seed_chain, search_sequential


def get_pattern_search(name: str, order: Optional[str] = None) -> BasePatternSearch:
    """
    Get a pattern search instance by name.

    Args:
        name: ``sequential``, ``radial`` or ``complex``
        order: Composition order, only for ``complex`` (default radial_first)

    Returns:
        A pattern search instance

    Raises:
        ValueError: If the name is unknown
    """
    if name == SEQUENTIAL:
        return SequentialSearch()
    if name == RADIAL:
        return RadialSearch()
    if name == COMPLEX:
        return ComplexSearch(order or RADIAL_FIRST)
    raise ValueError(f"Unknown pattern search '{name}'")


def get_pattern_searches(sequential: bool, radial: bool, complex_orders: List[str]) -> List[BasePatternSearch]:
    """Instantiate the enabled searches in report order."""
    searches: List[BasePatternSearch] = []
    if sequential:
        searches.append(get_pattern_search(SEQUENTIAL))
    if radial:
        searches.append(get_pattern_search(RADIAL))
    for order in complex_orders:
        searches.append(get_pattern_search(COMPLEX, order))
    return searches


__all__ = [
    "BasePatternSearch",
    "ComplexPattern",
    "ComplexSearch",
    "Pattern",
    "RadialPattern",
    "RadialSearch",
    "SequentialPattern",
    "SequentialSearch",
    "get_pattern_search",
    "get_pattern_searches",
    "max_seed_chain",
    "search_complex",
    "search_radial",
    "search_sequential",
    "COMPLEX",
    "COMPLEX_ORDERS",
    "RADIAL",
    "RADIAL_FIRST",
    "SEQUENTIAL",
    "SEQUENTIAL_FIRST",
]
