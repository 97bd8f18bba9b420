"""
Density-based clustering of activity sequences and silhouette scoring.
"""

import logging
from dataclasses import dataclass, field
from numbers import Integral
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as sparse_components
from sklearn.metrics import silhouette_score

from airdrop_sybil.ingest import Address

logger = logging.getLogger(__name__)

DistanceFn = Callable[[Address, Address], float]

# Per-chain defaults from the published parameter table; optimism and polygon
# were not tuned there and share the arbitrum value.
DEFAULT_CHAIN_EPS = {
    "arbitrum": 0.405,
    "gnosis": 0.550,
    "ethereum": 0.285,
    "optimism": 0.405,
    "polygon": 0.405,
}
DEFAULT_MIN_PTS = 3


@dataclass(frozen=True)
class ClusterParams:
    eps: float
    min_pts: int = DEFAULT_MIN_PTS

    def __post_init__(self):
        if not 0 <= self.eps <= 1:
            raise ValueError(f"eps must be within [0, 1], got {self.eps}")
        if isinstance(self.min_pts, bool) or not isinstance(self.min_pts, Integral) or self.min_pts < 1:
            raise ValueError(f"min_pts must be a positive integer, got {self.min_pts}")


@dataclass(frozen=True)
class Clustering:
    """
    DBSCAN output. Clusters are listed in the order of their first core point
    (by sorted address); members are frozensets.
    """
    clusters: Tuple[FrozenSet[Address], ...]
    noise: FrozenSet[Address]
    params: ClusterParams
    core_points: FrozenSet[Address] = field(default_factory=frozenset)

    def labels(self, accounts: Sequence[Address]) -> np.ndarray:
        """Cluster index per account, -1 for noise."""
        index = {a: i for i, members in enumerate(self.clusters) for a in members}
        return np.array([index.get(a, -1) for a in accounts], dtype=int)


def _as_matrix(accounts: Sequence[Address], dist: Union[DistanceFn, np.ndarray]) -> np.ndarray:
    if isinstance(dist, np.ndarray):
        if dist.shape != (len(accounts), len(accounts)):
            raise ValueError("distance matrix shape does not match the accounts")
        return dist
    n = len(accounts)
    matrix = np.zeros((n, n), dtype=float)
    for i in range(n):
        for j in range(i + 1, n):
            matrix[i, j] = matrix[j, i] = dist(accounts[i], accounts[j])
    return matrix


def dbscan(
    accounts: Iterable[Address],
    dist: Union[DistanceFn, np.ndarray],
    params: ClusterParams,
) -> Clustering:
    """
    Deterministic DBSCAN over a precomputed distance.

    A point is core when at least ``min_pts`` points (itself included) lie
    within distance <= eps. Core points linked through core neighbourhoods
    form a cluster. A border point joins the cluster of its first core
    neighbour in sorted-address order.

    Args:
        accounts: The accounts to cluster (order irrelevant, duplicates ignored)
        dist: A symmetric distance callable, or a matrix already aligned to
            ``sorted(set(accounts))``
        params: eps and min_pts

    Returns:
        The clustering
    """
    ordered = sorted(set(accounts))
    if not ordered:
        return Clustering((), frozenset(), params)
    matrix = _as_matrix(ordered, dist)

    neighbours = matrix <= params.eps
    np.fill_diagonal(neighbours, True)
    is_core = neighbours.sum(axis=1) >= params.min_pts
    core_idx = np.flatnonzero(is_core)

    labels = np.full(len(ordered), -1, dtype=int)
    if core_idx.size:
        core_adj = csr_matrix(neighbours[np.ix_(core_idx, core_idx)])
        _, comp = sparse_components(core_adj, directed=False)
        # relabel components by their smallest core index
        relabel: Dict[int, int] = {}
        for c in comp:
            relabel.setdefault(int(c), len(relabel))
        labels[core_idx] = [relabel[int(c)] for c in comp]
        for i in np.flatnonzero(~is_core):
            claiming = core_idx[neighbours[i, core_idx]]
            if claiming.size:
                labels[i] = labels[claiming[0]]

    n_clusters = int(labels.max()) + 1 if labels.size else 0
    clusters = tuple(
        frozenset(ordered[i] for i in np.flatnonzero(labels == k))
        for k in range(n_clusters)
    )
    noise = frozenset(ordered[i] for i in np.flatnonzero(labels == -1))
    logger.debug(
        "DBSCAN eps=%.3f min_pts=%d: %d clusters, %d noise",
        params.eps, params.min_pts, len(clusters), len(noise),
    )
    return Clustering(
        clusters=clusters,
        noise=noise,
        params=params,
        core_points=frozenset(ordered[i] for i in core_idx),
    )


def silhouette(
    c: Clustering,
    dist: Union[DistanceFn, np.ndarray],
    accounts: Optional[Sequence[Address]] = None,
) -> float:
    """
    Mean silhouette coefficient over clustered points (noise excluded).

    Args:
        c: A clustering with at least two clusters
        dist: Distance callable, or a matrix aligned to ``accounts``
        accounts: Row order of a distance matrix (required with a matrix)

    Returns:
        The coefficient in [-1, 1]; points in singleton clusters score 0

    Raises:
        ValueError: If the clustering has fewer than two clusters
    """
    if len(c.clusters) < 2:
        raise ValueError("silhouette undefined")
    members = sorted(a for cluster in c.clusters for a in cluster)
    if isinstance(dist, np.ndarray):
        if accounts is None:
            raise ValueError("accounts are required with a distance matrix")
        position = {a: i for i, a in enumerate(accounts)}
        rows = [position[a] for a in members]
        matrix = dist[np.ix_(rows, rows)]
    else:
        matrix = _as_matrix(members, dist)
    labels = c.labels(members)
    if len(c.clusters) >= len(members):
        # every point alone in its cluster
        return 0.0
    return float(np.clip(silhouette_score(matrix, labels, metric="precomputed"), -1.0, 1.0))


def tune_params(
    accounts: Iterable[Address],
    dist: Union[DistanceFn, np.ndarray],
    eps_grid: Iterable[float],
    min_pts_grid: Iterable[int],
    scores: Optional[Dict[Tuple[float, int], Optional[float]]] = None,
) -> ClusterParams:
    """
    Grid search for the parameters with the best silhouette.

    Clusterings with fewer than two clusters are inadmissible. Ties go to the
    smaller eps, then the smaller min_pts.

    Args:
        accounts: The accounts to cluster
        dist: Distance callable, or a matrix aligned to ``sorted(set(accounts))``
        eps_grid: Candidate eps values
        min_pts_grid: Candidate min_pts values
        scores: If given, filled with the score of every grid point (None when
            inadmissible)

    Returns:
        The selected parameters

    Raises:
        ValueError: If a grid is empty or no grid point yields two clusters
    """
    eps_values = sorted(set(eps_grid))
    min_pts_values = sorted(set(min_pts_grid))
    if not eps_values or not min_pts_values:
        raise ValueError("parameter grids must be non-empty")
    ordered = sorted(set(accounts))
    matrix = _as_matrix(ordered, dist)

    best: Optional[Tuple[float, ClusterParams]] = None
    for eps in eps_values:
        for min_pts in min_pts_values:
            params = ClusterParams(eps=eps, min_pts=min_pts)
            clustering = dbscan(ordered, matrix, params)
            score = None
            if len(clustering.clusters) >= 2:
                score = silhouette(clustering, matrix, ordered)
                if best is None or score > best[0]:
                    best = (score, params)
            if scores is not None:
                scores[(eps, min_pts)] = score
    if best is None:
        raise ValueError("no admissible parameters")
    logger.info("Selected eps=%.3f min_pts=%d (silhouette %.3f)", best[1].eps, best[1].min_pts, best[0])
    return best[1]


def mean_pairwise_similarity(members: Sequence[Address], similarity: np.ndarray, accounts: Sequence[Address]) -> float:
    """
    Mean off-diagonal similarity among ``members``.

    A single-member cluster has no pairs and reports 1.0.
    """
    position = {a: i for i, a in enumerate(accounts)}
    rows = [position[a] for a in sorted(members)]
    if len(rows) < 2:
        return 1.0
    block = similarity[np.ix_(rows, rows)]
    n = len(rows)
    return float((block.sum() - np.trace(block)) / (n * (n - 1)))


def reorder_matrix(
    c: Clustering, accounts: Sequence[Address], matrix: np.ndarray,
) -> Tuple[List[Address], np.ndarray]:
    """
    Reorder a square matrix so members of one cluster are contiguous.

    Clusters come first in clustering order, noise last; within a block rows
    are address-sorted.
    """
    order: List[Address] = []
    for members in c.clusters:
        order.extend(sorted(members))
    order.extend(sorted(set(accounts) - set(order)))
    position = {a: i for i, a in enumerate(accounts)}
    rows = [position[a] for a in order]
    return order, matrix[np.ix_(rows, rows)]
