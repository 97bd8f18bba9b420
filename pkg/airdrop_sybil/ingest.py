"""
Snapshot ingestion: parse transfer and DApp event records, apply address filters.
"""

import json
import logging
import re
from dataclasses import dataclass, field
from decimal import Context, Decimal, InvalidOperation
from typing import IO, Any, Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

logger = logging.getLogger(__name__)

# 26 to 40 alphanumeric characters after the optional 0x prefix
_ADDRESS_RE = re.compile(r"^(?:0x)?([0-9a-z]{26,40})$")

AMOUNT_PLACES = 18
_QUANTUM = Decimal(1).scaleb(-AMOUNT_PLACES)
# wide enough for 2^256 wei at full fractional precision
_AMOUNT_CONTEXT = Context(prec=100)

TX_FIELDS = (
    "chain", "tx_hash", "block_time", "from", "to", "token", "amount",
    "from_is_contract", "to_is_contract",
)
EVENT_FIELDS = ("chain", "tx_hash", "block_time", "account", "activity_type")


class SnapshotError(OSError):
    """Raised when a snapshot stream cannot be read at all."""


@dataclass(frozen=True, order=True)
class Address:
    """
    A chain-scoped account address.

    The value is always ``0x`` followed by the lowercase body, so equality is
    stable regardless of checksum casing in the source file.
    """
    chain: str
    value: str

    @classmethod
    def parse(cls, chain: str, raw: str) -> "Address":
        """
        Normalize a raw address string.

        Args:
            chain: Chain identifier the address belongs to
            raw: Address text as found in a snapshot

        Returns:
            The normalized address

        Raises:
            ValueError: If the text is not a 26-40 character alphanumeric address
        """
        if not isinstance(raw, str):
            raise ValueError(f"address must be a string, got {type(raw).__name__}")
        match = _ADDRESS_RE.match(raw.strip().lower())
        if not match:
            raise ValueError(f"malformed address {raw!r}")
        if not chain:
            raise ValueError("empty chain identifier")
        return cls(chain=chain, value="0x" + match.group(1))

    @classmethod
    def from_string(cls, text: str) -> "Address":
        """Inverse of ``str(address)`` (``chain:0x...``)."""
        chain, sep, raw = text.rpartition(":")
        if not sep:
            raise ValueError(f"address {text!r} lacks a chain prefix")
        return cls.parse(chain, raw)

    def on(self, chain: str) -> "Address":
        """Return the same account value scoped to another chain."""
        return Address(chain=chain, value=self.value)

    @property
    def short(self) -> str:
        """Truncated form used in tables and graph labels (0x + 8 hex chars)."""
        return self.value[:10]

    def __str__(self) -> str:
        return f"{self.chain}:{self.value}"


@dataclass(frozen=True)
class Transaction:
    """
    One token-transfer record from a chain snapshot.
    """
    tx_hash: str
    chain: str
    timestamp: int
    sender: Address
    receiver: Address
    token: str
    amount: Decimal
    from_is_contract: bool = False
    to_is_contract: bool = False


@dataclass(frozen=True)
class DappEvent:
    """
    A pre-decoded DApp interaction of one account.
    """
    tx_hash: str
    chain: str
    timestamp: int
    account: Address
    activity_type: str
    amount: Optional[Decimal] = None
    route_from: Optional[str] = None
    route_to: Optional[str] = None


@dataclass(frozen=True)
class ParseDiagnostic:
    """A skipped input record: 1-based line number and the reason."""
    line: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.reason}"


@dataclass(frozen=True)
class FilterConfig:
    """
    Address sets removed during preprocessing.

    Membership tests are exact on normalized addresses.
    """
    contract_addresses: FrozenSet[Address] = field(default_factory=frozenset)
    exchange_addresses: FrozenSet[Address] = field(default_factory=frozenset)
    whitelist: FrozenSet[Address] = field(default_factory=frozenset)

    def excludes(self, address: Address) -> bool:
        return (
            address in self.contract_addresses
            or address in self.exchange_addresses
            or address in self.whitelist
        )

    @property
    def excluded(self) -> FrozenSet[Address]:
        return self.contract_addresses | self.exchange_addresses | self.whitelist


def parse_amount(raw: Any) -> Decimal:
    """
    Parse an exact decimal amount string.

    Args:
        raw: The amount as found in the record (string or integer)

    Returns:
        The amount quantized to 18 fractional digits

    Raises:
        ValueError: If the value is not a finite non-negative decimal
    """
    if isinstance(raw, bool) or not isinstance(raw, (str, int)):
        raise ValueError("amount must be a decimal string")
    try:
        value = Decimal(str(raw).strip())
    except InvalidOperation:
        raise ValueError(f"malformed amount {raw!r}")
    if not value.is_finite():
        raise ValueError(f"malformed amount {raw!r}")
    if value < 0:
        raise ValueError("negative amount")
    if value.as_tuple().exponent < -AMOUNT_PLACES:
        raise ValueError(f"amount has more than {AMOUNT_PLACES} fractional digits")
    return value.quantize(_QUANTUM, context=_AMOUNT_CONTEXT)


def format_amount(value: Decimal) -> str:
    """Render an amount without exponent and without trailing zeros."""
    text = format(value.normalize(context=_AMOUNT_CONTEXT), "f")
    return text if text != "-0" else "0"


def _parse_timestamp(raw: Any) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ValueError("block_time must be an integer")
    if raw < 0:
        raise ValueError("negative block_time")
    return raw


def _parse_flag(record: Dict[str, Any], key: str) -> bool:
    value = record.get(key, False)
    if not isinstance(value, bool):
        raise ValueError(f"{key} must be a boolean")
    return value


def _require_text(record: Dict[str, Any], key: str) -> str:
    value = record.get(key)
    if not isinstance(value, str) or not value:
        raise ValueError(f"missing {key}")
    return value


def _read_lines(stream: Union[IO[bytes], IO[str], Iterable]) -> List[str]:
    try:
        data = stream.read()
    except (OSError, ValueError) as e:
        raise SnapshotError(f"unreadable stream: {e}") from e
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SnapshotError(f"stream is not UTF-8: {e}") from e
    return data.splitlines()


def _iter_records(lines: List[str], diagnostics: List[ParseDiagnostic]):
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            diagnostics.append(ParseDiagnostic(number, f"invalid JSON: {e.msg}"))
            continue
        if not isinstance(record, dict):
            diagnostics.append(ParseDiagnostic(number, "record is not an object"))
            continue
        yield number, record


def parse_transactions(
    stream: Union[IO[bytes], IO[str]],
    chain: Optional[str] = None,
) -> Tuple[List[Transaction], List[ParseDiagnostic]]:
    """
    Parse a newline-delimited JSON transactions stream.

    Well-formed records become transactions in input order; every malformed
    record is skipped with a diagnostic.

    Args:
        stream: Binary or text stream of JSONL records
        chain: If given, records naming another chain are rejected

    Returns:
        The parsed transactions and the diagnostics

    Raises:
        SnapshotError: If the stream cannot be read
    """
    transactions: List[Transaction] = []
    diagnostics: List[ParseDiagnostic] = []
    seen_hashes = set()

    for number, record in _iter_records(_read_lines(stream), diagnostics):
        try:
            tx_chain = _require_text(record, "chain")
            if chain is not None and tx_chain != chain:
                raise ValueError(f"chain mismatch: expected {chain}, got {tx_chain}")
            tx_hash = _require_text(record, "tx_hash")
            if tx_hash in seen_hashes:
                raise ValueError(f"duplicate tx_hash {tx_hash}")
            tx = Transaction(
                tx_hash=tx_hash,
                chain=tx_chain,
                timestamp=_parse_timestamp(record.get("block_time")),
                sender=Address.parse(tx_chain, record.get("from")),
                receiver=Address.parse(tx_chain, record.get("to")),
                token=_require_text(record, "token"),
                amount=parse_amount(record.get("amount")),
                from_is_contract=_parse_flag(record, "from_is_contract"),
                to_is_contract=_parse_flag(record, "to_is_contract"),
            )
        except ValueError as e:
            diagnostics.append(ParseDiagnostic(number, str(e)))
            continue
        seen_hashes.add(tx_hash)
        transactions.append(tx)

    if diagnostics:
        logger.warning("Skipped %d malformed transaction records", len(diagnostics))
        for diagnostic in diagnostics:
            logger.debug("transactions %s", diagnostic)
    return transactions, diagnostics


def parse_activity_events(
    stream: Union[IO[bytes], IO[str]],
) -> Tuple[List[DappEvent], List[ParseDiagnostic]]:
    """
    Parse a newline-delimited JSON activity-events stream.

    An empty ``activity_type`` is passed through; the activity module decides
    what to do with it.
    """
    events: List[DappEvent] = []
    diagnostics: List[ParseDiagnostic] = []

    for number, record in _iter_records(_read_lines(stream), diagnostics):
        try:
            event_chain = _require_text(record, "chain")
            activity_type = record.get("activity_type", "")
            if not isinstance(activity_type, str):
                raise ValueError("activity_type must be a string")
            amount = record.get("amount")
            route_from = record.get("route_from")
            route_to = record.get("route_to")
            for key, value in (("route_from", route_from), ("route_to", route_to)):
                if value is not None and not isinstance(value, str):
                    raise ValueError(f"{key} must be a string")
            events.append(DappEvent(
                tx_hash=_require_text(record, "tx_hash"),
                chain=event_chain,
                timestamp=_parse_timestamp(record.get("block_time")),
                account=Address.parse(event_chain, record.get("account")),
                activity_type=activity_type,
                amount=parse_amount(amount) if amount is not None else None,
                route_from=route_from,
                route_to=route_to,
            ))
        except ValueError as e:
            diagnostics.append(ParseDiagnostic(number, str(e)))

    if diagnostics:
        logger.warning("Skipped %d malformed activity records", len(diagnostics))
        for diagnostic in diagnostics:
            logger.debug("events %s", diagnostic)
    return events, diagnostics


def transaction_to_record(tx: Transaction) -> Dict[str, Any]:
    return {
        "chain": tx.chain,
        "tx_hash": tx.tx_hash,
        "block_time": tx.timestamp,
        "from": tx.sender.value,
        "to": tx.receiver.value,
        "token": tx.token,
        "amount": format_amount(tx.amount),
        "from_is_contract": tx.from_is_contract,
        "to_is_contract": tx.to_is_contract,
    }


def event_to_record(event: DappEvent) -> Dict[str, Any]:
    record: Dict[str, Any] = {
        "chain": event.chain,
        "tx_hash": event.tx_hash,
        "block_time": event.timestamp,
        "account": event.account.value,
        "activity_type": event.activity_type,
    }
    if event.amount is not None:
        record["amount"] = format_amount(event.amount)
    if event.route_from is not None:
        record["route_from"] = event.route_from
    if event.route_to is not None:
        record["route_to"] = event.route_to
    return record


def _dump_jsonl(records: Iterable[Dict[str, Any]]) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)


def serialize_transactions(txs: Iterable[Transaction]) -> str:
    """Canonical JSONL rendering; parse_transactions reads it back unchanged."""
    return _dump_jsonl(transaction_to_record(tx) for tx in txs)


def serialize_events(events: Iterable[DappEvent]) -> str:
    return _dump_jsonl(event_to_record(e) for e in events)


def load_address_list(
    stream: Union[IO[bytes], IO[str]],
    chains: Iterable[str],
) -> Tuple[FrozenSet[Address], List[ParseDiagnostic]]:
    """
    Read a plain-text address list (one per line, ``#`` comments allowed).

    A line may carry an explicit ``chain:0x...`` prefix. Unprefixed lines
    apply to every chain in ``chains``, since one EOA key controls the same
    address on all EVM chains.
    """
    chains = sorted(set(chains))
    addresses = set()
    diagnostics: List[ParseDiagnostic] = []
    for number, line in enumerate(_read_lines(stream), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        line_chain, _, raw = text.rpartition(":")
        try:
            for chain in ([line_chain] if line_chain else chains):
                addresses.add(Address.parse(chain, raw))
        except ValueError as e:
            diagnostics.append(ParseDiagnostic(number, str(e)))
    return frozenset(addresses), diagnostics


def apply_filters(txs: List[Transaction], cfg: FilterConfig) -> List[Transaction]:
    """
    Drop transfers touching contracts, exchange wallets or whitelisted accounts.

    Args:
        txs: Parsed transactions
        cfg: The address sets to exclude

    Returns:
        The retained transactions, in their original order
    """
    kept = [
        tx for tx in txs
        if not (
            tx.from_is_contract
            or tx.to_is_contract
            or cfg.excludes(tx.sender)
            or cfg.excludes(tx.receiver)
        )
    ]
    logger.debug("Filters kept %d of %d transactions", len(kept), len(txs))
    return kept
