"""
Tests for DBSCAN clustering, silhouette scoring and parameter tuning.
"""

import os
import random
import sys
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

# Add the parent directory to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from airdrop_sybil.cluster import (
    ClusterParams,
    Clustering,
    dbscan,
    mean_pairwise_similarity,
    reorder_matrix,
    silhouette,
    tune_params,
)
from tests.helpers import addr


def block_matrix(groups, intra=0.1, inter=0.9):
    """Distance matrix where points of the same group are ``intra`` apart."""
    labels = [g for g, size in enumerate(groups) for _ in range(size)]
    n = len(labels)
    matrix = np.full((n, n), inter)
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                matrix[i, j] = intra
    np.fill_diagonal(matrix, 0.0)
    return [addr(i) for i in range(n)], matrix


def naive_dbscan(accounts, matrix, eps, min_pts):
    """Textbook DBSCAN over sorted ids; borders join their first core neighbour."""
    n = len(accounts)
    neighbours = [[j for j in range(n) if i == j or matrix[i][j] <= eps] for i in range(n)]
    core = [len(neighbours[i]) >= min_pts for i in range(n)]
    label = [None] * n
    clusters = []
    for i in range(n):
        if not core[i] or label[i] is not None:
            continue
        label[i] = len(clusters)
        members = {i}
        stack = [i]
        while stack:
            p = stack.pop()
            for q in neighbours[p]:
                if core[q] and label[q] is None:
                    label[q] = label[i]
                    members.add(q)
                    stack.append(q)
        clusters.append(members)
    for i in range(n):
        if core[i]:
            continue
        for j in neighbours[i]:
            if core[j]:
                clusters[label[j]].add(i)
                break
    return (
        {frozenset(accounts[i] for i in c) for c in clusters},
        frozenset(accounts[i] for i in range(n) if not any(i in c for c in clusters)),
        frozenset(accounts[i] for i in range(n) if core[i]),
    )


def jaccard_matrix(sets):
    """Jaccard distances between sets; two empty sets are 0 apart."""
    n = len(sets)
    matrix = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            union = sets[i] | sets[j]
            d = 1.0 - len(sets[i] & sets[j]) / len(union) if union else 0.0
            matrix[i, j] = matrix[j, i] = d
    return matrix


@st.composite
def metric_instances(draw, max_points=50):
    """Random small sets under the Jaccard distance, a metric in [0, 1]."""
    sets = draw(st.lists(st.frozensets(st.integers(0, 5), max_size=4), max_size=max_points))
    return [addr(i) for i in range(len(sets))], jaccard_matrix(sets)


class TestDbscan(unittest.TestCase):
    """Tests for deterministic DBSCAN."""

    def test_four_plus_outlier(self):
        """Four close points cluster; the far one is noise."""
        accounts, matrix = block_matrix([4, 1])
        c = dbscan(accounts, matrix, ClusterParams(0.2, 3))
        self.assertEqual(c.clusters, (frozenset(accounts[:4]),))
        self.assertEqual(c.noise, frozenset({accounts[4]}))

    def test_too_few_points(self):
        """Two points cannot reach min_pts=3."""
        accounts, matrix = block_matrix([2])
        c = dbscan(accounts, matrix, ClusterParams(0.2, 3))
        self.assertEqual(c.clusters, ())
        self.assertEqual(c.noise, frozenset(accounts))

    def test_identical_points(self):
        """Three points at distance zero form one cluster."""
        accounts, matrix = block_matrix([3], intra=0.0)
        c = dbscan(accounts, matrix, ClusterParams(0.0, 3))
        self.assertEqual(c.clusters, (frozenset(accounts),))

    def test_empty(self):
        """No accounts give an empty clustering."""
        c = dbscan([], np.zeros((0, 0)), ClusterParams(0.2, 3))
        self.assertEqual((c.clusters, c.noise), ((), frozenset()))

    def test_callable_distance(self):
        """A distance callable gives the same result as its matrix."""
        accounts, matrix = block_matrix([3, 3])
        index = {a: i for i, a in enumerate(accounts)}
        c = dbscan(accounts, lambda x, y: matrix[index[x], index[y]], ClusterParams(0.2, 3))
        self.assertEqual(c, dbscan(accounts, matrix, ClusterParams(0.2, 3)))

    def test_border_joins_first_core(self):
        """A border point between two clusters joins the earlier core neighbour."""
        # 0-3 and 5-8 are dense groups; 4 is close to core 3 and core 5 only
        accounts, matrix = block_matrix([4, 1, 4])
        for core in (3, 5):
            matrix[4, core] = matrix[core, 4] = 0.2
        c = dbscan(accounts, matrix, ClusterParams(0.2, 4))
        self.assertEqual(len(c.clusters), 2)
        self.assertIn(accounts[4], c.clusters[0])
        self.assertNotIn(accounts[4], c.clusters[1])
        self.assertNotIn(accounts[4], c.core_points)

    def test_shared_borders_go_to_first_core(self):
        """Two cores sharing every border point leave the later cluster a lone core."""
        # cores 0 and 1 are 0.4 apart; borders 2-4 sit 0.2 from both and 0.3 from each other
        matrix = np.full((5, 5), 0.3)
        matrix[0, 1] = matrix[1, 0] = 0.4
        for core in (0, 1):
            matrix[core, 2:] = matrix[2:, core] = 0.2
        np.fill_diagonal(matrix, 0.0)
        accounts = [addr(i) for i in range(5)]
        c = dbscan(accounts, matrix, ClusterParams(0.2, 4))
        self.assertEqual(c.clusters, (frozenset(accounts[:1] + accounts[2:]), frozenset({accounts[1]})))
        self.assertEqual(c.core_points, frozenset(accounts[:2]))
        self.assertEqual(c.noise, frozenset())
        self.assertEqual(
            set(c.clusters),
            naive_dbscan(accounts, matrix, 0.2, 4)[0],
        )

    def test_invalid_params(self):
        """Parameters outside their ranges are rejected."""
        with self.assertRaises(ValueError):
            ClusterParams(1.5, 3)
        with self.assertRaises(ValueError):
            ClusterParams(0.2, 0)

    @settings(max_examples=200, deadline=None)
    @given(metric_instances(), st.sampled_from([0.0, 0.2, 0.25, 0.34, 0.5, 0.67]), st.integers(1, 5))
    def test_matches_naive_reference(self, instance, eps, min_pts):
        """DBSCAN agrees with a naive reference up to relabeling."""
        accounts, matrix = instance
        c = dbscan(accounts, matrix, ClusterParams(eps, min_pts))
        clusters, noise, core = naive_dbscan(accounts, matrix, eps, min_pts)
        self.assertEqual(set(c.clusters), clusters)
        self.assertEqual(c.noise, noise)
        self.assertEqual(c.core_points, core)
        position = {a: i for i, a in enumerate(accounts)}
        for members in c.clusters:
            cores = [a for a in members if a in c.core_points]
            self.assertTrue(cores)
            for a in cores:
                self.assertGreaterEqual(int((matrix[position[a]] <= eps).sum()), min_pts)

    @settings(max_examples=50, deadline=None)
    @given(metric_instances(), st.randoms(use_true_random=False))
    def test_permutation_invariant(self, instance, rnd):
        """Shuffling the input list leaves the clustering unchanged."""
        accounts, matrix = instance
        index = {a: i for i, a in enumerate(accounts)}
        dist = lambda x, y: matrix[index[x], index[y]]
        shuffled = list(accounts)
        rnd.shuffle(shuffled)
        params = ClusterParams(0.2, 3)
        self.assertEqual(dbscan(shuffled, dist, params), dbscan(accounts, dist, params))


class TestSilhouette(unittest.TestCase):
    """Tests for silhouette scoring."""

    def test_perfect_separation(self):
        """Zero intra-distance and unit inter-distance score 1."""
        accounts, matrix = block_matrix([3, 3], intra=0.0, inter=1.0)
        c = dbscan(accounts, matrix, ClusterParams(0.0, 3))
        self.assertAlmostEqual(silhouette(c, matrix, accounts), 1.0)

    def test_single_cluster_undefined(self):
        """One cluster has no silhouette."""
        accounts, matrix = block_matrix([4, 1])
        c = dbscan(accounts, matrix, ClusterParams(0.2, 3))
        with self.assertRaisesRegex(ValueError, "silhouette undefined"):
            silhouette(c, matrix, accounts)

    def test_noise_excluded(self):
        """Noise points do not influence the score."""
        accounts, matrix = block_matrix([3, 3, 1], intra=0.0, inter=1.0)
        c = dbscan(accounts, matrix, ClusterParams(0.0, 3))
        self.assertEqual(len(c.noise), 1)
        self.assertAlmostEqual(silhouette(c, matrix, accounts), 1.0)

    def test_range(self):
        """Scores stay within [-1, 1] on random metric instances."""
        rng = random.Random(7)
        for _ in range(20):
            positions = [rng.randint(0, 10) for _ in range(12)]
            matrix = np.array([[abs(a - b) / 10 for b in positions] for a in positions])
            accounts = [addr(i) for i in range(12)]
            c = dbscan(accounts, matrix, ClusterParams(0.1, 2))
            if len(c.clusters) >= 2:
                self.assertTrue(-1.0 <= silhouette(c, matrix, accounts) <= 1.0)


class TestTuneParams(unittest.TestCase):
    """Tests for the parameter grid search."""

    def test_single_candidate(self):
        """A one-point grid yielding two clusters is returned as is."""
        accounts, matrix = block_matrix([3, 3, 1])
        self.assertEqual(tune_params(accounts, matrix, [0.2], [3]), ClusterParams(0.2, 3))

    def test_all_noise_candidate_loses(self):
        """eps=0.05 leaves everything noise, so 0.2 wins."""
        accounts, matrix = block_matrix([3, 3, 1])
        scores = {}
        self.assertEqual(tune_params(accounts, matrix, [0.05, 0.2], [3], scores), ClusterParams(0.2, 3))
        self.assertIsNone(scores[(0.05, 3)])
        self.assertIsNotNone(scores[(0.2, 3)])

    def test_no_admissible(self):
        """A grid that never yields two clusters is an error."""
        accounts, matrix = block_matrix([4, 1])
        with self.assertRaisesRegex(ValueError, "no admissible parameters"):
            tune_params(accounts, matrix, [0.2, 0.3], [3])

    def test_empty_grid(self):
        """Empty grids are rejected."""
        accounts, matrix = block_matrix([3, 3])
        with self.assertRaises(ValueError):
            tune_params(accounts, matrix, [], [3])


class TestMatrixHelpers(unittest.TestCase):
    """Tests for the cluster matrix helpers."""

    def test_mean_pairwise_similarity(self):
        """Off-diagonal similarity is averaged; singletons report 1."""
        accounts, distance = block_matrix([3, 1], intra=0.25)
        similarity = 1.0 - distance
        self.assertAlmostEqual(mean_pairwise_similarity(accounts[:3], similarity, accounts), 0.75)
        self.assertEqual(mean_pairwise_similarity(accounts[3:], similarity, accounts), 1.0)

    def test_reorder_groups_clusters(self):
        """Reordering puts cluster members together and noise last."""
        accounts = [addr(i) for i in range(4)]
        c = Clustering(
            clusters=(frozenset({accounts[1], accounts[3]}),),
            noise=frozenset({accounts[0], accounts[2]}),
            params=ClusterParams(0.2, 2),
        )
        matrix = np.arange(16, dtype=float).reshape(4, 4)
        order, reordered = reorder_matrix(c, accounts, matrix)
        self.assertEqual(order, [accounts[1], accounts[3], accounts[0], accounts[2]])
        self.assertEqual(reordered[0, 1], matrix[1, 3])


if __name__ == '__main__':
    unittest.main()
