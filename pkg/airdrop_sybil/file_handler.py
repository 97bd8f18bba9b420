"""
File handling utilities for snapshot bundles.
"""

import logging
import os
from typing import Dict, Iterable, List, Optional, Tuple

from airdrop_sybil.config import SnapshotPaths
from airdrop_sybil.ingest import (
    DappEvent,
    FilterConfig,
    ParseDiagnostic,
    Transaction,
    load_address_list,
    parse_activity_events,
    parse_transactions,
    serialize_events,
    serialize_transactions,
)
from airdrop_sybil.pipeline import Snapshot

logger = logging.getLogger(__name__)

TRANSACTIONS_FILE = "transactions.jsonl"
EVENTS_FILE = "events.jsonl"
CONTRACTS_FILE = "contracts.txt"
EXCHANGES_FILE = "exchanges.txt"
WHITELIST_FILE = "whitelist.txt"


class FileHandler:
    """
    File handler for reading and writing snapshot files.

    Snapshot files are read in binary mode and decoded by the parsers, so a
    corrupt file surfaces as a SnapshotError rather than a crash mid-run.
    """

    def _check(self, file_path: str) -> None:
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"File not found: {file_path}")

    def read_transactions(self, file_path: str) -> Tuple[List[Transaction], List[ParseDiagnostic]]:
        """
        Read one transactions file.

        Raises:
            FileNotFoundError: If the file doesn't exist
            SnapshotError: If the file cannot be decoded
        """
        self._check(file_path)
        with open(file_path, "rb") as f:
            return parse_transactions(f)

    def read_events(self, file_path: str) -> Tuple[List[DappEvent], List[ParseDiagnostic]]:
        self._check(file_path)
        with open(file_path, "rb") as f:
            return parse_activity_events(f)

    def read_address_list(self, file_path: Optional[str], chains: Iterable[str]):
        """
        Read an optional filter list.

        Returns:
            The addresses (empty when no path is configured) and diagnostics
        """
        if not file_path:
            return frozenset(), []
        self._check(file_path)
        with open(file_path, "rb") as f:
            return load_address_list(f, chains)

    def load_snapshot(self, paths: SnapshotPaths) -> Snapshot:
        """
        Load every file of a snapshot bundle.

        Args:
            paths: Resolved snapshot paths

        Returns:
            The snapshot, with diagnostics keyed by file path
        """
        if not paths.transactions:
            raise FileNotFoundError("no transactions file configured")

        diagnostics: Dict[str, List[ParseDiagnostic]] = {}
        transactions: List[Transaction] = []
        for path in paths.transactions:
            txs, diags = self.read_transactions(path)
            transactions.extend(txs)
            diagnostics[path] = diags

        events: List[DappEvent] = []
        for path in paths.events:
            found, diags = self.read_events(path)
            events.extend(found)
            diagnostics[path] = diags

        chains = {tx.chain for tx in transactions} | {e.chain for e in events}
        lists = {}
        for role, path in (
            ("contracts", paths.contracts),
            ("exchanges", paths.exchanges),
            ("whitelist", paths.whitelist),
        ):
            lists[role], diags = self.read_address_list(path, chains)
            if path:
                diagnostics[path] = diags
                if diags:
                    logger.warning("Skipped %d malformed lines in %s", len(diags), path)

        logger.info(
            "Loaded snapshot: %d transactions, %d events over %d chain(s)",
            len(transactions), len(events), len(chains),
        )
        return Snapshot(
            transactions=transactions,
            events=events,
            filters=FilterConfig(
                contract_addresses=lists["contracts"],
                exchange_addresses=lists["exchanges"],
                whitelist=lists["whitelist"],
            ),
            diagnostics=diagnostics,
        )

    def save_snapshot(self, snapshot: Snapshot, out_dir: str) -> SnapshotPaths:
        """
        Write a snapshot bundle in the formats load_snapshot reads.

        Filter lists are written with explicit ``chain:`` prefixes.

        Returns:
            The paths written
        """
        os.makedirs(out_dir, exist_ok=True)
        paths = SnapshotPaths(
            transactions=(os.path.join(out_dir, TRANSACTIONS_FILE),),
            events=(os.path.join(out_dir, EVENTS_FILE),),
            contracts=os.path.join(out_dir, CONTRACTS_FILE),
            exchanges=os.path.join(out_dir, EXCHANGES_FILE),
            whitelist=os.path.join(out_dir, WHITELIST_FILE),
        )
        self.write_text(paths.transactions[0], serialize_transactions(snapshot.transactions))
        self.write_text(paths.events[0], serialize_events(snapshot.events))
        for path, addresses in (
            (paths.contracts, snapshot.filters.contract_addresses),
            (paths.exchanges, snapshot.filters.exchange_addresses),
            (paths.whitelist, snapshot.filters.whitelist),
        ):
            self.write_text(path, "".join(f"{a}\n" for a in sorted(addresses)))
        return paths

    def write_text(self, file_path: str, text: str) -> None:
        with open(file_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)

