"""
Shared fixture builders for the airdrop_sybil tests.
"""

from decimal import Decimal
from typing import Iterable, Optional, Tuple

import networkx as nx

from airdrop_sybil.ingest import Address, DappEvent, Transaction
from airdrop_sybil.txgraph import EdgeAggregate, Subgraph

CHAIN = "arbitrum"


def addr(index: int, chain: str = CHAIN) -> Address:
    """A deterministic 40-hex-digit address for a small integer."""
    return Address.parse(chain, f"0x{index:040x}")


def tx(
    sender: int,
    receiver: int,
    index: int,
    chain: str = CHAIN,
    amount: str = "1",
    timestamp: Optional[int] = None,
    **flags,
) -> Transaction:
    return Transaction(
        tx_hash=f"0xtx{chain}{index:06d}",
        chain=chain,
        timestamp=index if timestamp is None else timestamp,
        sender=addr(sender, chain),
        receiver=addr(receiver, chain),
        token="ETH",
        amount=Decimal(amount),
        **flags,
    )


def event(
    account: int,
    activity_type: str,
    timestamp: int,
    chain: str = CHAIN,
    amount: Optional[str] = None,
    tx_hash: Optional[str] = None,
) -> DappEvent:
    return DappEvent(
        tx_hash=tx_hash or f"0xev{chain}{account:04d}{timestamp:06d}",
        chain=chain,
        timestamp=timestamp,
        account=addr(account, chain),
        activity_type=activity_type,
        amount=Decimal(amount) if amount is not None else None,
    )


def subgraph(edges: Iterable[Tuple[int, int]], seeds: Iterable[int], chain: str = CHAIN) -> Subgraph:
    """A bare Subgraph over integer-named vertices, for pattern searches."""
    graph = nx.DiGraph()
    for u, v in edges:
        graph.add_edge(addr(u, chain), addr(v, chain), agg=EdgeAggregate(1, Decimal(1), 0, 0))
    seed_set = frozenset(addr(s, chain) for s in seeds)
    graph.add_nodes_from(seed_set)
    return Subgraph(seed=seed_set, graph=graph, distances={s: 0 for s in seed_set})
