"""
DApp activity sequences and the pair-set Jaccard similarity.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from airdrop_sybil.ingest import Address, DappEvent, ParseDiagnostic

logger = logging.getLogger(__name__)

EPSILON = 1e-12

TYPE_ONLY = "type_only"
TYPE_AND_AMOUNT = "type_and_amount"
MATCH_MODES = (TYPE_ONLY, TYPE_AND_AMOUNT)


@dataclass(frozen=True)
class MatchMode:
    """
    How two activities are compared.

    ``type_only`` compares activity types; ``type_and_amount`` also requires
    the relative amount gap to be within ``delta``.
    """
    kind: str = TYPE_ONLY
    delta: float = 0.05

    def __post_init__(self):
        if self.kind not in MATCH_MODES:
            raise ValueError(f"unknown match mode {self.kind!r}")
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must be within [0, 1]")

    @classmethod
    def type_only(cls) -> "MatchMode":
        return cls(TYPE_ONLY)

    @classmethod
    def type_and_amount(cls, delta: float = 0.05) -> "MatchMode":
        return cls(TYPE_AND_AMOUNT, delta)


@dataclass(frozen=True)
class Activity:
    timestamp: int
    activity_type: str
    amount: Optional[Decimal] = None
    route_from: Optional[str] = None
    route_to: Optional[str] = None
    tx_hash: str = ""

    def __post_init__(self):
        if not self.activity_type:
            raise ValueError("activity_type must be non-empty")


@dataclass(frozen=True)
class ActivitySequence:
    """Time-ordered activities of one account; ties broken by tx_hash."""
    account: Address
    items: Tuple[Activity, ...]

    @classmethod
    def of(cls, account: Address, items: Iterable[Activity]) -> "ActivitySequence":
        return cls(account, tuple(sorted(items, key=lambda a: (a.timestamp, a.tx_hash))))

    @property
    def types(self) -> List[str]:
        return [item.activity_type for item in self.items]


ActivityKey = Tuple[Hashable, ...]
PairSet = FrozenSet[Tuple[ActivityKey, ActivityKey]]


def build_activity_sequences(
    events: Iterable[DappEvent],
) -> Tuple[Dict[Address, ActivitySequence], List[ParseDiagnostic]]:
    """
    Group events into one sorted sequence per account.

    Args:
        events: Pre-decoded DApp events

    Returns:
        The sequences keyed by account, and a diagnostic per skipped event
        (line numbers are the event's 1-based position in the input)
    """
    grouped: Dict[Address, List[Activity]] = defaultdict(list)
    diagnostics: List[ParseDiagnostic] = []
    for position, event in enumerate(events, start=1):
        if not event.activity_type:
            diagnostics.append(ParseDiagnostic(position, f"empty activity_type in {event.tx_hash}"))
            continue
        grouped[event.account].append(Activity(
            timestamp=event.timestamp,
            activity_type=event.activity_type,
            amount=event.amount,
            route_from=event.route_from,
            route_to=event.route_to,
            tx_hash=event.tx_hash,
        ))
    if diagnostics:
        logger.warning("Skipped %d events with empty activity_type", len(diagnostics))
    sequences = {account: ActivitySequence.of(account, items) for account, items in grouped.items()}
    return sequences, diagnostics


def activity_match(x: Activity, y: Activity, mode: MatchMode = MatchMode()) -> bool:
    """
    Whether two activities are similar in the sense of the match mode.

    Missing amounts only match missing amounts.
    """
    if x.activity_type != y.activity_type:
        return False
    if mode.kind == TYPE_ONLY:
        return True
    if x.amount is None or y.amount is None:
        return x.amount is None and y.amount is None
    ax, ay = float(x.amount), float(y.amount)
    return abs(ax - ay) / max(ax, ay, EPSILON) <= mode.delta


def activity_key(activity: Activity, mode: MatchMode = MatchMode()) -> ActivityKey:
    """
    Hashable projection of an activity under the match mode.

    With amounts, the amount is bucketed on a log scale of base 1 + delta, so
    equal keys imply ``activity_match``.
    """
    if mode.kind == TYPE_ONLY:
        return (activity.activity_type,)
    if activity.amount is None:
        return (activity.activity_type, None)
    amount = float(activity.amount)
    if amount <= 0 or mode.delta == 0:
        return (activity.activity_type, ("exact", str(activity.amount.normalize())))
    return (activity.activity_type, math.floor(math.log(amount) / math.log1p(mode.delta)))


def pair_set(seq: ActivitySequence, mode: MatchMode = MatchMode()) -> PairSet:
    """All temporally ordered activity pairs (i < j) of a sequence, deduplicated."""
    keys = [activity_key(item, mode) for item in seq.items]
    return frozenset(
        (keys[i], keys[j])
        for i in range(len(keys))
        for j in range(i + 1, len(keys))
    )


def _pair_set_similarity(
    p1: PairSet, p2: PairSet, s1: ActivitySequence, s2: ActivitySequence, mode: MatchMode,
) -> float:
    if not p1 and not p2:
        if not s1.items and not s2.items:
            return 1.0
        if len(s1.items) == 1 and len(s2.items) == 1:
            return 1.0 if activity_key(s1.items[0], mode) == activity_key(s2.items[0], mode) else 0.0
        return 0.0
    if not p1 or not p2:
        return 0.0
    return len(p1 & p2) / len(p1 | p2)


def seq_sim(s1: ActivitySequence, s2: ActivitySequence, mode: MatchMode = MatchMode()) -> float:
    """
    Jaccard similarity of the two sequences' activity pair sets.

    Degenerate cases: two sequences without pairs score 1 when both are empty
    or their single activities match, 0 otherwise; exactly one empty pair set
    scores 0.
    """
    return _pair_set_similarity(pair_set(s1, mode), pair_set(s2, mode), s1, s2, mode)


def similarity_matrix(
    sequences: Sequence[ActivitySequence],
    mode: MatchMode = MatchMode(),
) -> np.ndarray:
    """
    Pairwise seq_sim matrix, in the order of ``sequences``.

    Pair sets are computed once per sequence.
    """
    n = len(sequences)
    pairs = [pair_set(s, mode) for s in sequences]
    matrix = np.eye(n, dtype=float)
    for i in range(n):
        for j in range(i + 1, n):
            value = _pair_set_similarity(pairs[i], pairs[j], sequences[i], sequences[j], mode)
            matrix[i, j] = matrix[j, i] = value
    return matrix
