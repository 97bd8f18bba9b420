"""
Configuration management for detection runs.
"""

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

import yaml
from dotenv import load_dotenv

from airdrop_sybil.activity import MATCH_MODES, MatchMode
from airdrop_sybil.cluster import DEFAULT_CHAIN_EPS, DEFAULT_MIN_PTS, ClusterParams
from airdrop_sybil.patterns import COMPLEX_ORDERS
from airdrop_sybil.txgraph import SubgraphCaps


class ConfigError(ValueError):
    """Raised when a configuration or scenario file is invalid."""


DEFAULT_CONFIG: Dict[str, Any] = {
    "snapshot": {
        "transactions": [],
        "events": [],
        "contracts": None,
        "exchanges": None,
        "whitelist": None,
    },
    "chains": {
        chain: {"eps": eps, "min_pts": DEFAULT_MIN_PTS}
        for chain, eps in DEFAULT_CHAIN_EPS.items()
    },
    "activity": {"match_mode": "type_only", "delta": 0.05},
    "subgraph": {"max_vertices": 5000, "hub_degree_threshold": 1000},
    "pipeline": {
        "min_component_size": 4,
        "chains": None,
        "jobs": 1,
        "eligibility": {"min_volume": "0", "min_events": 0},
    },
    "patterns": {"sequential": True, "radial": True, "complex": list(COMPLEX_ORDERS)},
    "output": {"report": "report.json", "dot_dir": None},
}

# Environment variable -> (section, key)
ENV_OVERRIDES = {
    "SYBIL_JOBS": ("pipeline", "jobs"),
    "SYBIL_MATCH_MODE": ("activity", "match_mode"),
    "SYBIL_MIN_COMPONENT_SIZE": ("pipeline", "min_component_size"),
}


@dataclass(frozen=True)
class SnapshotPaths:
    transactions: Tuple[str, ...] = ()
    events: Tuple[str, ...] = ()
    contracts: Optional[str] = None
    exchanges: Optional[str] = None
    whitelist: Optional[str] = None


@dataclass(frozen=True)
class Eligibility:
    """Airdrop eligibility prerequisite; the defaults admit every account."""
    min_volume: Decimal = Decimal(0)
    min_events: int = 0

    @property
    def enabled(self) -> bool:
        return self.min_volume > 0 or self.min_events > 0


@dataclass(frozen=True)
class PatternToggles:
    sequential: bool = True
    radial: bool = True
    complex: Tuple[str, ...] = COMPLEX_ORDERS


@dataclass(frozen=True)
class RunConfig:
    """
    Validated settings of one detection run.
    """
    chain_params: Mapping[str, ClusterParams] = field(
        default_factory=lambda: {c: ClusterParams(e, DEFAULT_MIN_PTS) for c, e in DEFAULT_CHAIN_EPS.items()}
    )
    match_mode: MatchMode = MatchMode()
    caps: SubgraphCaps = SubgraphCaps()
    min_component_size: int = 4
    chains: Optional[Tuple[str, ...]] = None
    jobs: int = 1
    eligibility: Eligibility = Eligibility()
    patterns: PatternToggles = PatternToggles()
    snapshot: SnapshotPaths = SnapshotPaths()
    report_path: str = "report.json"
    dot_dir: Optional[str] = None

    def params_for(self, chain: str) -> ClusterParams:
        """
        Clustering parameters of a chain.

        Raises:
            ConfigError: If the chain has no parameters
        """
        try:
            return self.chain_params[chain]
        except KeyError:
            raise ConfigError(f"no clustering parameters for chain '{chain}'") from None

    def config_hash(self) -> str:
        """SHA-256 over the settings that influence detection results."""
        settings = {
            "chains": {c: [p.eps, p.min_pts] for c, p in sorted(self.chain_params.items())},
            "match_mode": [self.match_mode.kind, self.match_mode.delta],
            "subgraph": [self.caps.max_vertices, self.caps.hub_degree_threshold],
            "min_component_size": self.min_component_size,
            "restrict": list(self.chains) if self.chains is not None else None,
            "eligibility": [str(self.eligibility.min_volume), self.eligibility.min_events],
            "patterns": [self.patterns.sequential, self.patterns.radial, list(self.patterns.complex)],
        }
        canonical = json.dumps(settings, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _deep_merge(base: Dict[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


def _as_int(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be an integer")
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if isinstance(value, float) and value != number:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if number < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {number}")
    return number


def _as_paths(value: Any, name: str) -> Tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,)
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return tuple(value)
    raise ConfigError(f"{name} must be a path or a list of paths")


class Config:
    """
    Configuration manager for detection runs.

    Settings are layered: built-in defaults, then the config file, then
    environment variables, then explicit overrides.
    """

    def __init__(self, config_path: Optional[str] = None, env_file: Optional[str] = None):
        """
        Initialize the configuration manager.

        Args:
            config_path: Path to a YAML or JSON config file (optional)
            env_file: Path to the .env file (optional)

        Raises:
            FileNotFoundError: If the config file does not exist
            ConfigError: If the config file cannot be parsed
        """
        if env_file and os.path.exists(env_file):
            load_dotenv(env_file)
        elif os.path.exists(".env"):
            load_dotenv(".env")

        self.config_path = config_path
        self.base_dir = os.path.dirname(os.path.abspath(config_path)) if config_path else os.getcwd()
        self.config = self._load_config()
        self._update_from_env()

    def _load_config(self) -> Dict[str, Any]:
        """
        Load the configuration file over the defaults.

        Returns:
            The merged configuration dictionary
        """
        config = copy.deepcopy(DEFAULT_CONFIG)
        if self.config_path is None:
            return config

        with open(self.config_path, "r", encoding="utf-8") as f:
            try:
                if self.config_path.endswith((".yaml", ".yml")):
                    data = yaml.safe_load(f)
                else:
                    data = json.load(f)
            except (yaml.YAMLError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot parse {self.config_path}: {e}") from e

        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{self.config_path}: top level must be a mapping")
        return _deep_merge(config, data)

    def _update_from_env(self) -> None:
        """
        Update the configuration with environment variables.
        """
        for variable, (section, key) in ENV_OVERRIDES.items():
            value = os.environ.get(variable)
            if value:
                self.config.setdefault(section, {})[key] = value

    def apply_overrides(
        self,
        jobs: Optional[int] = None,
        chains: Iterable[str] = (),
        eps: Optional[float] = None,
        min_pts: Optional[int] = None,
        match_mode: Optional[str] = None,
        report: Optional[str] = None,
    ) -> None:
        """
        Apply command-line overrides, which win over file and environment.

        ``eps`` and ``min_pts`` apply to the selected chains, or to every
        configured chain when no chain is selected.
        """
        chains = list(chains)
        if chains:
            self.config["pipeline"]["chains"] = chains
        if jobs is not None:
            self.config["pipeline"]["jobs"] = jobs
        if match_mode is not None:
            self.config["activity"]["match_mode"] = match_mode
        if report is not None:
            self.config["output"]["report"] = report
        if eps is not None or min_pts is not None:
            targets = chains or list(self.config["chains"])
            for chain in targets:
                entry = self.config["chains"].setdefault(chain, {"min_pts": DEFAULT_MIN_PTS})
                if eps is not None:
                    entry["eps"] = eps
                if min_pts is not None:
                    entry["min_pts"] = min_pts

    def resolve_path(self, path: Optional[str]) -> Optional[str]:
        """Resolve a path relative to the config file's directory."""
        if path is None:
            return None
        path = os.path.expanduser(path)
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def build(self) -> RunConfig:
        """
        Validate the layered configuration.

        Returns:
            The typed run configuration

        Raises:
            ConfigError: On any invalid setting
        """
        cfg = self.config
        try:
            chain_params = {}
            for chain, entry in sorted((cfg.get("chains") or {}).items()):
                if not isinstance(entry, Mapping) or "eps" not in entry:
                    raise ConfigError(f"chains.{chain} needs an eps value")
                chain_params[chain] = ClusterParams(
                    eps=float(entry["eps"]),
                    min_pts=_as_int(entry.get("min_pts", DEFAULT_MIN_PTS), f"chains.{chain}.min_pts", 1),
                )

            activity = cfg["activity"]
            kind = activity.get("match_mode", "type_only")
            if kind not in MATCH_MODES:
                raise ConfigError(f"unknown match mode '{kind}'")
            match_mode = MatchMode(kind=kind, delta=float(activity.get("delta", 0.05)))

            subgraph = cfg["subgraph"]
            caps = SubgraphCaps(
                max_vertices=_as_int(subgraph["max_vertices"], "subgraph.max_vertices", 1),
                hub_degree_threshold=_as_int(subgraph["hub_degree_threshold"], "subgraph.hub_degree_threshold", 1),
            )

            pipeline = cfg["pipeline"]
            restrict = pipeline.get("chains")
            if restrict is not None:
                restrict = tuple(sorted(set(restrict)))
                unknown = [c for c in restrict if c not in chain_params]
                if unknown:
                    raise ConfigError(f"unknown chain(s): {', '.join(unknown)}")

            rules = pipeline.get("eligibility") or {}
            try:
                min_volume = Decimal(str(rules.get("min_volume", 0)))
            except InvalidOperation:
                raise ConfigError("pipeline.eligibility.min_volume must be a decimal") from None
            if min_volume < 0:
                raise ConfigError("pipeline.eligibility.min_volume must be >= 0")
            eligibility = Eligibility(
                min_volume=min_volume,
                min_events=_as_int(rules.get("min_events", 0), "pipeline.eligibility.min_events", 0),
            )

            patterns = cfg["patterns"]
            orders = patterns.get("complex") or []
            if isinstance(orders, str):
                orders = [orders]
            bad = [o for o in orders if o not in COMPLEX_ORDERS]
            if bad:
                raise ConfigError(f"unknown composition order(s): {', '.join(bad)}")
            toggles = PatternToggles(
                sequential=bool(patterns.get("sequential", True)),
                radial=bool(patterns.get("radial", True)),
                complex=tuple(dict.fromkeys(orders)),
            )

            snapshot = cfg["snapshot"]
            paths = SnapshotPaths(
                transactions=tuple(self.resolve_path(p) for p in _as_paths(snapshot.get("transactions"), "snapshot.transactions")),
                events=tuple(self.resolve_path(p) for p in _as_paths(snapshot.get("events"), "snapshot.events")),
                contracts=self.resolve_path(snapshot.get("contracts")),
                exchanges=self.resolve_path(snapshot.get("exchanges")),
                whitelist=self.resolve_path(snapshot.get("whitelist")),
            )

            output = cfg["output"]
            return RunConfig(
                chain_params=chain_params,
                match_mode=match_mode,
                caps=caps,
                min_component_size=_as_int(pipeline["min_component_size"], "pipeline.min_component_size", 1),
                chains=restrict,
                jobs=_as_int(pipeline["jobs"], "pipeline.jobs", 1),
                eligibility=eligibility,
                patterns=toggles,
                snapshot=paths,
                report_path=self.resolve_path(output.get("report") or "report.json"),
                dot_dir=self.resolve_path(output.get("dot_dir")),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid configuration: {e}") from e
