"""
Seeded generator of labelled synthetic snapshots.

Bots fund their accounts from a treasury in radial, sequential or two-stage
topologies and replay one activity template per bot. Ordinary users are funded
from fresh per-user sources, draw templates from a shared pool and spend into
a few shared sink accounts, so they form large components without any
transfer pattern among them.
"""

import logging
import os
from dataclasses import dataclass, field, fields
from decimal import Decimal
from typing import Any, Dict, List, Mapping, Optional, Set, Tuple

import numpy as np
import yaml

from airdrop_sybil.config import DEFAULT_CONFIG, ConfigError
from airdrop_sybil.file_handler import (
    CONTRACTS_FILE,
    EVENTS_FILE,
    EXCHANGES_FILE,
    TRANSACTIONS_FILE,
    WHITELIST_FILE,
    FileHandler,
)
from airdrop_sybil.ingest import Address, DappEvent, FilterConfig, Transaction
from airdrop_sybil.patterns import COMPLEX, RADIAL, SEQUENTIAL
from airdrop_sybil.pipeline import BotTruth, GroundTruth, Snapshot

logger = logging.getLogger(__name__)

ACTIVITY_TYPES = (
    "send", "convert", "add_liquidity", "remove_liquidity", "stake",
    "unstake", "swap", "claim", "approve",
)
UNPRICED_TYPES = ("claim", "approve")
ROUTE_TAGS = ("E", "O", "P", "A", "G")
# bridge transfers are typed by their route, e.g. "P->O"
BRIDGE_ROUTES = tuple(f"{a}->{b}" for a in ROUTE_TAGS for b in ROUTE_TAGS if a != b)
STEP_TYPES = ACTIVITY_TYPES + BRIDGE_ROUTES
TOKENS = ("ETH", "USDC", "USDT", "DAI")

GENESIS_TIME = 1_650_000_000
TRUTH_FILE = "truth.json"
CONFIG_FILE = "config.yaml"


@dataclass(frozen=True)
class TemplateStep:
    activity_type: str
    amount: Optional[Decimal]
    route_from: Optional[str] = None
    route_to: Optional[str] = None


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Parameters of one synthetic scenario.
    """
    seed: int = 0
    chains: Tuple[str, ...] = ("arbitrum", "optimism")
    n_radial_bots: int = 2
    n_sequential_bots: int = 2
    n_complex_bots: int = 1
    accounts_per_bot: Mapping[str, int] = field(
        default_factory=lambda: {RADIAL: 8, SEQUENTIAL: 8, COMPLEX: 8}
    )
    n_ordinary_users: int = 50
    template_length: Tuple[int, int] = (6, 12)
    noise_probability: float = 0.1
    amount_jitter: float = 0.02
    template_pool_size: int = 20
    return_probability: float = 0.5
    n_shared_sinks: int = 10
    n_exchanges: int = 2
    n_contracts: int = 3

    def __post_init__(self):
        per_bot = self.accounts_per_bot
        if isinstance(per_bot, int) and not isinstance(per_bot, bool):
            object.__setattr__(self, "accounts_per_bot", {RADIAL: per_bot, SEQUENTIAL: per_bot, COMPLEX: per_bot})
        elif not isinstance(per_bot, Mapping):
            raise ConfigError("accounts_per_bot must be an integer or a mapping")
        counts = {
            "seed": self.seed,
            "n_radial_bots": self.n_radial_bots,
            "n_sequential_bots": self.n_sequential_bots,
            "n_complex_bots": self.n_complex_bots,
            "n_ordinary_users": self.n_ordinary_users,
            "template_pool_size": self.template_pool_size,
            "n_shared_sinks": self.n_shared_sinks,
            "n_exchanges": self.n_exchanges,
            "n_contracts": self.n_contracts,
        }
        counts.update({f"accounts_per_bot.{k}": v for k, v in self.accounts_per_bot.items()})
        for name, value in counts.items():
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer")
            if value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value}")
        unknown = set(self.accounts_per_bot) - {RADIAL, SEQUENTIAL, COMPLEX}
        if unknown:
            raise ConfigError(f"unknown bot pattern(s): {', '.join(sorted(unknown))}")
        for name in ("noise_probability", "amount_jitter", "return_probability"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ConfigError(f"{name} must be within [0, 1], got {value}")
        low, high = self.template_length
        if not 1 <= low <= high:
            raise ConfigError(f"template_length must satisfy 1 <= min <= max, got {self.template_length}")
        if not self.chains:
            raise ConfigError("at least one chain is required")
        if self.n_ordinary_users and not self.template_pool_size:
            raise ConfigError("template_pool_size must be positive when ordinary users are generated")

    def bot_size(self, pattern: str) -> int:
        return self.accounts_per_bot.get(pattern, 8)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        """
        Build a scenario from a parsed file.

        ``accounts_per_bot`` may be a single integer for every bot type.

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario key(s): {', '.join(sorted(unknown))}")
        values = dict(data)
        per_bot = values.get("accounts_per_bot")
        if isinstance(per_bot, Mapping):
            values["accounts_per_bot"] = {RADIAL: 8, SEQUENTIAL: 8, COMPLEX: 8, **per_bot}
        if "chains" in values:
            if not isinstance(values["chains"], (list, tuple)):
                raise ConfigError("chains must be a list")
            values["chains"] = tuple(values["chains"])
        if "template_length" in values:
            try:
                low, high = values["template_length"]
            except (TypeError, ValueError):
                raise ConfigError("template_length must be a [min, max] pair") from None
            values["template_length"] = (low, high)
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"invalid scenario: {e}") from e

    @classmethod
    def load(cls, file_path: str) -> "ScenarioConfig":
        """Read a YAML (or JSON, which YAML accepts) scenario file."""
        with open(file_path, "r", encoding="utf-8") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError(f"cannot parse {file_path}: {e}") from e
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{file_path}: top level must be a mapping")
        return cls.from_dict(data)


class _Builder:
    """Accumulates snapshot records from one seeded random stream."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.transactions: List[Transaction] = []
        self.events: List[DappEvent] = []
        self._values: Set[str] = set()
        self._hashes: Set[str] = set()

    def new_value(self) -> str:
        while True:
            value = "0x" + self.rng.bytes(20).hex()
            if value not in self._values:
                self._values.add(value)
                return value

    def new_address(self, chain: str) -> Address:
        return Address(chain, self.new_value())

    def new_hash(self) -> str:
        while True:
            tx_hash = "0x" + self.rng.bytes(32).hex()
            if tx_hash not in self._hashes:
                self._hashes.add(tx_hash)
                return tx_hash

    def amount(self, low: float, high: float) -> Decimal:
        return Decimal(f"{self.rng.uniform(low, high):.6f}")

    def transfer(self, chain: str, timestamp: int, sender: Address, receiver: Address,
                 amount: Decimal, to_is_contract: bool = False) -> None:
        self.transactions.append(Transaction(
            tx_hash=self.new_hash(),
            chain=chain,
            timestamp=timestamp,
            sender=sender,
            receiver=receiver,
            token=TOKENS[int(self.rng.integers(len(TOKENS)))],
            amount=amount,
            from_is_contract=False,
            to_is_contract=to_is_contract,
        ))

    def template(self) -> List[TemplateStep]:
        low, high = self.cfg.template_length
        length = int(self.rng.integers(low, high + 1))
        return [self.step() for _ in range(length)]

    def step(self) -> TemplateStep:
        activity_type = STEP_TYPES[int(self.rng.integers(len(STEP_TYPES)))]
        amount = None if activity_type in UNPRICED_TYPES else self.amount(10, 2000)
        route_from = route_to = None
        if activity_type in BRIDGE_ROUTES:
            route_from, route_to = activity_type.split("->")
        return TemplateStep(activity_type, amount, route_from, route_to)

    def replay(self, chain: str, account: Address, template: List[TemplateStep], start: int) -> int:
        """
        Emit the template's events for one account with noise and jitter.

        Noise repeats a step of the same template at a random position, the
        way a script re-sends an approval or retries a swap.
        """
        jitter = self.cfg.amount_jitter
        timestamp = start
        for step in template:
            if self.rng.random() < self.cfg.noise_probability:
                timestamp += int(self.rng.integers(60, 600))
                self._event(chain, account, timestamp, template[int(self.rng.integers(len(template)))])
            amount = step.amount
            if amount is not None and jitter:
                factor = Decimal(f"{1 + self.rng.uniform(-jitter, jitter):.6f}")
                amount = (amount * factor).quantize(Decimal("0.000001"))
            timestamp += int(self.rng.integers(60, 600))
            self._event(chain, account, timestamp, TemplateStep(step.activity_type, amount, step.route_from, step.route_to))
        return timestamp

    def _event(self, chain: str, account: Address, timestamp: int, step: TemplateStep) -> None:
        self.events.append(DappEvent(
            tx_hash=self.new_hash(),
            chain=chain,
            timestamp=timestamp,
            account=account,
            activity_type=step.activity_type,
            amount=step.amount,
            route_from=step.route_from,
            route_to=step.route_to,
        ))


def _bot_topology(pattern: str, variant: int, treasury: Address, accounts: List[Address]) -> List[Tuple[Address, Address]]:
    """
    Funding edges of one bot, in emission order.

    Complex bots alternate between a star of chains (treasury to a few first
    hop accounts, each fanning out) and a chain whose members each fan out.
    """
    if pattern == RADIAL:
        return [(treasury, a) for a in accounts]
    if pattern == SEQUENTIAL:
        hops = [treasury] + accounts
        return list(zip(hops, hops[1:]))

    n = len(accounts)
    if variant % 2 == 0:
        k = min(n, max(2, n // 4))
        hubs, leaves = accounts[:k], accounts[k:]
        edges = [(treasury, h) for h in hubs]
    else:
        k = min(n, max(2, n // 3))
        hubs, leaves = accounts[:k], accounts[k:]
        chain = [treasury] + hubs
        edges = list(zip(chain, chain[1:]))
    for i, leaf in enumerate(leaves):
        edges.append((hubs[i % len(hubs)], leaf))
    return edges


def generate(cfg: ScenarioConfig) -> Tuple[Snapshot, GroundTruth]:
    """
    Generate a labelled snapshot.

    Args:
        cfg: The scenario

    Returns:
        The snapshot and its ground truth; equal configs give equal output
    """
    b = _Builder(cfg)
    chains = list(cfg.chains)

    sinks = [b.new_value() for _ in range(cfg.n_shared_sinks)]
    exchanges = [b.new_value() for _ in range(cfg.n_exchanges)]
    contracts = [b.new_value() for _ in range(cfg.n_contracts)]

    def on_chain(values: List[str], chain: str) -> List[Address]:
        return [Address(chain, v) for v in values]

    bots: Dict[str, BotTruth] = {}
    clock = GENESIS_TIME
    plan = (
        [(RADIAL, i) for i in range(cfg.n_radial_bots)]
        + [(SEQUENTIAL, i) for i in range(cfg.n_sequential_bots)]
        + [(COMPLEX, i) for i in range(cfg.n_complex_bots)]
    )
    for serial, (pattern, index) in enumerate(plan):
        chain = chains[serial % len(chains)]
        treasury = b.new_address(chain)
        accounts = [b.new_address(chain) for _ in range(cfg.bot_size(pattern))]
        template = b.template()

        if exchanges:
            source = Address(chain, exchanges[int(b.rng.integers(len(exchanges)))])
            b.transfer(chain, clock, source, treasury, b.amount(1000, 5000))
        for sender, receiver in _bot_topology(pattern, index, treasury, accounts):
            clock += int(b.rng.integers(30, 300))
            b.transfer(chain, clock, sender, receiver, b.amount(10, 200))

        for account in accounts:
            clock = b.replay(chain, account, template, clock)
            if sinks and b.rng.random() < 0.3:
                clock += 60
                sink = Address(chain, sinks[int(b.rng.integers(len(sinks)))])
                b.transfer(chain, clock, account, sink, b.amount(1, 50))

        if accounts and b.rng.random() < cfg.return_probability:
            clock += 600
            b.transfer(chain, clock, accounts[-1], treasury, b.amount(1, 50))

        bot_id = f"{pattern}-{index:03d}"
        bots[bot_id] = BotTruth(pattern=pattern, chain=chain, treasury=treasury, accounts=frozenset(accounts))
        logger.debug("Generated %s on %s with %d accounts", bot_id, chain, len(accounts))

    pool = [b.template() for _ in range(cfg.template_pool_size if cfg.n_ordinary_users else 0)]
    for n in range(cfg.n_ordinary_users):
        chain = chains[n % len(chains)]
        user = b.new_address(chain)
        source = b.new_address(chain)
        clock += int(b.rng.integers(30, 300))
        b.transfer(chain, clock, source, user, b.amount(10, 500))
        clock = b.replay(chain, user, pool[int(b.rng.integers(len(pool)))], clock)

        for _ in range(int(b.rng.integers(1, 3)) if sinks else 0):
            clock += 60
            sink = Address(chain, sinks[int(b.rng.integers(len(sinks)))])
            b.transfer(chain, clock, user, sink, b.amount(1, 100))
        if exchanges and b.rng.random() < 0.3:
            clock += 60
            b.transfer(chain, clock, user, Address(chain, exchanges[int(b.rng.integers(len(exchanges)))]), b.amount(1, 100))
        if contracts and b.rng.random() < 0.5:
            clock += 60
            target = Address(chain, contracts[int(b.rng.integers(len(contracts)))])
            b.transfer(chain, clock, user, target, b.amount(1, 100), to_is_contract=True)

    snapshot = Snapshot(
        transactions=b.transactions,
        events=b.events,
        filters=FilterConfig(
            contract_addresses=frozenset(a for c in chains for a in on_chain(contracts, c)),
            exchange_addresses=frozenset(a for c in chains for a in on_chain(exchanges, c)),
        ),
    )
    logger.info(
        "Generated %d transactions, %d events, %d bots",
        len(snapshot.transactions), len(snapshot.events), len(bots),
    )
    return snapshot, GroundTruth(snapshot_id=snapshot.snapshot_id, bots=bots)


def run_config_for(cfg: ScenarioConfig) -> Dict[str, Any]:
    """A detection config over the files write_bundle produces."""
    default_chains = DEFAULT_CONFIG["chains"]
    return {
        "snapshot": {
            "transactions": [TRANSACTIONS_FILE],
            "events": [EVENTS_FILE],
            "contracts": CONTRACTS_FILE,
            "exchanges": EXCHANGES_FILE,
            "whitelist": WHITELIST_FILE,
        },
        "chains": {
            c: dict(default_chains.get(c, {"eps": 0.405, "min_pts": 3})) for c in sorted(set(cfg.chains))
        },
        "output": {"report": "report.json"},
    }


def write_bundle(out_dir: str, snapshot: Snapshot, truth: GroundTruth, cfg: ScenarioConfig) -> None:
    """
    Write snapshot files, ground truth and a ready-to-run config.yaml.

    Args:
        out_dir: Destination directory (created if missing)
        snapshot: The generated snapshot
        truth: Its ground truth
        cfg: The scenario it came from
    """
    handler = FileHandler()
    handler.save_snapshot(snapshot, out_dir)
    truth.save(os.path.join(out_dir, TRUTH_FILE))
    handler.write_text(
        os.path.join(out_dir, CONFIG_FILE),
        yaml.safe_dump(run_config_for(cfg), default_flow_style=False, sort_keys=True),
    )
