"""
airdrop_sybil - Airdrop Sybil detection from DApp activity and token transfers.
"""

__version__ = "0.1.0"

from airdrop_sybil.config import Config, ConfigError, RunConfig
from airdrop_sybil.file_handler import FileHandler
from airdrop_sybil.ingest import Address, DappEvent, FilterConfig, SnapshotError, Transaction
from airdrop_sybil.pipeline import GroundTruth, Metrics, Snapshot, detect, evaluate
from airdrop_sybil.report import DetectionReport, ReportError, load_report, save_report
from airdrop_sybil.synthgen import ScenarioConfig, generate

__all__ = [
    "Address",
    "Config",
    "ConfigError",
    "DappEvent",
    "DetectionReport",
    "FileHandler",
    "FilterConfig",
    "GroundTruth",
    "Metrics",
    "ReportError",
    "RunConfig",
    "ScenarioConfig",
    "Snapshot",
    "SnapshotError",
    "Transaction",
    "detect",
    "evaluate",
    "generate",
    "load_report",
    "save_report",
]
