"""
Tests for the synthetic snapshot generator.
"""

import os
import sys
import tempfile
import unittest
from collections import Counter, defaultdict
from itertools import combinations

import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

# Add the parent directory to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from airdrop_sybil.activity import build_activity_sequences, seq_sim
from airdrop_sybil.config import Config, ConfigError
from airdrop_sybil.file_handler import FileHandler
from airdrop_sybil.patterns import COMPLEX, RADIAL, SEQUENTIAL
from airdrop_sybil.pipeline import GroundTruth
from airdrop_sybil.synthgen import CONFIG_FILE, TRUTH_FILE, ScenarioConfig, generate, write_bundle


def only(pattern, n_accounts=8, **extra):
    """A scenario with a single bot of one pattern and nothing else."""
    counts = {"n_radial_bots": 0, "n_sequential_bots": 0, "n_complex_bots": 0}
    counts[f"n_{pattern}_bots"] = 1
    return ScenarioConfig(
        chains=("arbitrum",),
        accounts_per_bot={pattern: n_accounts},
        n_ordinary_users=0,
        **counts,
        **extra,
    )


def funding_edges(snapshot, truth):
    """Transfers among one bot's treasury and accounts, excluding the return transfer."""
    (bot,) = truth.bots.values()
    members = bot.accounts | {bot.treasury}
    return [
        (t.sender, t.receiver) for t in snapshot.transactions
        if t.sender in members and t.receiver in members and t.receiver != bot.treasury
    ], bot


class TestGenerate(unittest.TestCase):
    """Tests for scenario generation."""

    def test_deterministic(self):
        """Equal configs give equal snapshots and truth."""
        cfg = ScenarioConfig(seed=9, n_ordinary_users=10)
        first_snapshot, first_truth = generate(cfg)
        second_snapshot, second_truth = generate(cfg)
        self.assertEqual(first_snapshot.transactions, second_snapshot.transactions)
        self.assertEqual(first_snapshot.events, second_snapshot.events)
        self.assertEqual(first_truth.to_dict(), second_truth.to_dict())

    def test_seed_changes_output(self):
        """Different seeds give different snapshots."""
        a, _ = generate(ScenarioConfig(seed=1, n_ordinary_users=5))
        b, _ = generate(ScenarioConfig(seed=2, n_ordinary_users=5))
        self.assertNotEqual(a.snapshot_id, b.snapshot_id)

    def test_radial_exact_transfers(self):
        """One radial bot with three accounts gets exactly three treasury transfers."""
        snapshot, truth = generate(only(RADIAL, 3, return_probability=0.0))
        edges, bot = funding_edges(snapshot, truth)
        self.assertEqual(len(edges), 3)
        self.assertEqual({s for s, _ in edges}, {bot.treasury})
        self.assertEqual({r for _, r in edges}, set(bot.accounts))

    def test_sequential_chain(self):
        """A sequential bot funds its accounts one after the other."""
        snapshot, truth = generate(only(SEQUENTIAL, 5, return_probability=0.0))
        edges, bot = funding_edges(snapshot, truth)
        self.assertEqual(len(edges), 5)
        out_degree = Counter(s for s, _ in edges)
        in_degree = Counter(r for _, r in edges)
        self.assertTrue(all(d == 1 for d in out_degree.values()))
        self.assertTrue(all(d == 1 for d in in_degree.values()))
        self.assertEqual(out_degree[bot.treasury], 1)

    def test_complex_two_levels(self):
        """A complex bot has hub accounts that fan out to leaves."""
        snapshot, truth = generate(only(COMPLEX, 8, return_probability=0.0))
        edges, bot = funding_edges(snapshot, truth)
        self.assertEqual(len(edges), 8)
        fan_out = Counter(s for s, _ in edges if s != bot.treasury)
        self.assertGreaterEqual(len(fan_out), 2)
        self.assertTrue(any(d >= 2 for d in fan_out.values()))

    def test_noise_free_templates(self):
        """Without noise every account of a bot has the same activity types."""
        snapshot, truth = generate(only(RADIAL, 6, noise_probability=0.0))
        types = defaultdict(list)
        for e in sorted(snapshot.events, key=lambda e: (e.timestamp, e.tx_hash)):
            types[e.account].append(e.activity_type)
        (bot,) = truth.bots.values()
        sequences = {tuple(types[a]) for a in bot.accounts}
        self.assertEqual(len(sequences), 1)
        self.assertTrue(next(iter(sequences)))

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(0, 10_000),
        st.sampled_from([0.0, 0.05, 0.1, 0.15, 0.2]),
        st.integers(4, 8),
    )
    def test_bots_more_similar_within_than_across(self, seed, noise, min_length):
        """Accounts of one bot resemble each other more than accounts of other bots."""
        cfg = ScenarioConfig(
            seed=seed,
            chains=("arbitrum",),
            n_radial_bots=3,
            n_sequential_bots=0,
            n_complex_bots=0,
            accounts_per_bot={RADIAL: 5},
            n_ordinary_users=0,
            noise_probability=noise,
            template_length=(min_length, min_length + 4),
        )
        snapshot, truth = generate(cfg)
        sequences, _ = build_activity_sequences(snapshot.events)
        owner = {a: bot_id for bot_id, bot in truth.bots.items() for a in bot.accounts}
        intra, inter = [], []
        for a, b in combinations(sorted(owner), 2):
            (intra if owner[a] == owner[b] else inter).append(seq_sim(sequences[a], sequences[b]))
        self.assertGreater(sum(intra) / len(intra), sum(inter) / len(inter))

    def test_truth_matches_snapshot(self):
        """Ground truth carries the snapshot id and covers every bot."""
        cfg = ScenarioConfig(seed=4, n_ordinary_users=5)
        snapshot, truth = generate(cfg)
        self.assertEqual(truth.snapshot_id, snapshot.snapshot_id)
        self.assertEqual(sorted(truth.bots), ["complex-000", "radial-000", "radial-001", "sequential-000", "sequential-001"])
        self.assertEqual(len(truth.bot_accounts), 5 * 8)
        self.assertEqual({b.chain for b in truth.bots.values()}, {"arbitrum", "optimism"})

    def test_exchanges_and_contracts_listed(self):
        """Filter lists name the exchange and contract accounts on every chain."""
        snapshot, _ = generate(ScenarioConfig(seed=4, n_ordinary_users=5))
        self.assertEqual(len(snapshot.filters.exchange_addresses), 2 * 2)
        self.assertEqual(len(snapshot.filters.contract_addresses), 3 * 2)


class TestScenarioConfig(unittest.TestCase):
    """Tests for scenario validation."""

    def test_negative_count(self):
        """Negative counts are rejected."""
        with self.assertRaises(ConfigError):
            ScenarioConfig(n_radial_bots=-1)

    def test_probability_range(self):
        """Probabilities must lie in [0, 1]."""
        with self.assertRaises(ConfigError):
            ScenarioConfig(noise_probability=1.5)

    def test_from_dict(self):
        """An integer accounts_per_bot applies to every pattern."""
        cfg = ScenarioConfig.from_dict({"seed": 3, "accounts_per_bot": 5, "chains": ["gnosis"]})
        self.assertEqual(cfg.bot_size(SEQUENTIAL), 5)
        self.assertEqual(cfg.chains, ("gnosis",))

    def test_integer_accounts_per_bot(self):
        """An integer accounts_per_bot applies to every pattern when passed directly."""
        cfg = ScenarioConfig(accounts_per_bot=5)
        self.assertEqual([cfg.bot_size(p) for p in (RADIAL, SEQUENTIAL, COMPLEX)], [5, 5, 5])
        with self.assertRaises(ConfigError):
            ScenarioConfig(accounts_per_bot="five")
        with self.assertRaises(ConfigError):
            ScenarioConfig(accounts_per_bot=-2)

    def test_unknown_key(self):
        """Unknown scenario keys are rejected."""
        with self.assertRaises(ConfigError):
            ScenarioConfig.from_dict({"n_whales": 3})

    def test_load_yaml(self):
        """Scenarios load from YAML files."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "scenario.yaml")
            with open(path, "w") as f:
                yaml.safe_dump({"seed": 8, "n_ordinary_users": 3, "template_length": [2, 4]}, f)
            cfg = ScenarioConfig.load(path)
        self.assertEqual((cfg.seed, cfg.n_ordinary_users, cfg.template_length), (8, 3, (2, 4)))


class TestWriteBundle(unittest.TestCase):
    """Tests for bundle output."""

    def test_bundle_reloads(self):
        """A written bundle reloads to the same snapshot id and a usable config."""
        cfg = ScenarioConfig(seed=6, n_ordinary_users=8)
        snapshot, truth = generate(cfg)
        with tempfile.TemporaryDirectory() as temp_dir:
            write_bundle(temp_dir, snapshot, truth, cfg)
            run_config = Config(os.path.join(temp_dir, CONFIG_FILE)).build()
            loaded = FileHandler().load_snapshot(run_config.snapshot)
            reloaded_truth = GroundTruth.load(os.path.join(temp_dir, TRUTH_FILE))
        self.assertEqual(loaded.snapshot_id, snapshot.snapshot_id)
        self.assertEqual(loaded.filters, snapshot.filters)
        self.assertEqual(reloaded_truth.bots, truth.bots)
        self.assertTrue(all(not d for d in loaded.diagnostics.values()))


if __name__ == '__main__':
    unittest.main()
