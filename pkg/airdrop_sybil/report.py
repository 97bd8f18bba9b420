"""
Detection report model and its JSON form (schema ``sybil-report/1``).
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional

from airdrop_sybil.activity import ActivitySequence
from airdrop_sybil.ingest import Address, format_amount
from airdrop_sybil.patterns import (
    ComplexPattern,
    Pattern,
    RadialPattern,
    SequentialPattern,
    COMPLEX,
    RADIAL,
    SEQUENTIAL,
)

SCHEMA_VERSION = "sybil-report/1"


class ReportError(ValueError):
    """Raised on schema violations in reports or ground-truth files."""


@dataclass
class RunMetadata:
    """
    Provenance of a detection run.

    Only ``started_at`` and ``finished_at`` depend on the wall clock.
    """
    config_hash: str
    snapshot_id: str
    version: str
    started_at: str = ""
    finished_at: str = ""
    schema: str = SCHEMA_VERSION


@dataclass
class ClusterResult:
    cluster_id: str
    accounts: List[Address]
    mean_similarity: float
    sequential: List[SequentialPattern] = field(default_factory=list)
    radial: List[RadialPattern] = field(default_factory=list)
    complex: List[ComplexPattern] = field(default_factory=list)
    flagged: bool = False

    @property
    def patterns(self) -> List[Pattern]:
        return [*self.sequential, *self.radial, *self.complex]


@dataclass
class ComponentResult:
    """Clustering and pattern results of one connected component on one chain."""
    component_id: str
    chain: str
    size: int
    accounts: int
    clusters: List[ClusterResult] = field(default_factory=list)
    noise: List[Address] = field(default_factory=list)
    silhouette: Optional[float] = None


@dataclass
class DetectionReport:
    metadata: RunMetadata
    components: List[ComponentResult] = field(default_factory=list)
    flagged_accounts: List[Address] = field(default_factory=list)
    skipped_records: Dict[str, int] = field(default_factory=dict)

    @property
    def snapshot_id(self) -> str:
        return self.metadata.snapshot_id

    def clusters(self) -> Iterable[ClusterResult]:
        for component in self.components:
            yield from component.clusters

    def to_dict(self, include_timestamps: bool = True) -> Dict[str, Any]:
        metadata = asdict(self.metadata)
        if not include_timestamps:
            metadata.pop("started_at")
            metadata.pop("finished_at")
        return {
            "schema": SCHEMA_VERSION,
            "metadata": metadata,
            "skipped_records": dict(sorted(self.skipped_records.items())),
            "flagged_accounts": [str(a) for a in self.flagged_accounts],
            "components": [_component_to_dict(c) for c in self.components],
        }

    def to_json(self, include_timestamps: bool = True) -> str:
        return json.dumps(self.to_dict(include_timestamps), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DetectionReport":
        if data.get("schema") != SCHEMA_VERSION:
            raise ReportError(f"unsupported report schema {data.get('schema')!r}")
        try:
            meta = dict(data["metadata"])
            meta.pop("schema", None)
            return cls(
                metadata=RunMetadata(**meta),
                components=[_component_from_dict(c) for c in data["components"]],
                flagged_accounts=[Address.from_string(a) for a in data["flagged_accounts"]],
                skipped_records=dict(data.get("skipped_records", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ReportError(f"malformed report: {e}") from e


def save_report(report: DetectionReport, file_path: str) -> None:
    """
    Save a report to a JSON file.

    Args:
        report: The report to save
        file_path: Destination path
    """
    with open(file_path, "w", encoding="utf-8") as f:
        f.write(report.to_json())


def load_report(file_path: str) -> DetectionReport:
    """
    Load a report from a JSON file.

    Raises:
        ReportError: If the file is not a valid report
    """
    with open(file_path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ReportError(f"report is not JSON: {e}") from e
    if not isinstance(data, dict):
        raise ReportError("report root must be an object")
    return DetectionReport.from_dict(data)


def pattern_to_dict(pattern: Pattern) -> Dict[str, Any]:
    if isinstance(pattern, SequentialPattern):
        return {
            "kind": SEQUENTIAL,
            "path": [v.value for v in pattern.path_vertices],
            "covered": sorted(v.value for v in pattern.covered_seed),
        }
    if isinstance(pattern, RadialPattern):
        return {
            "kind": RADIAL,
            "center": pattern.center.value,
            "spokes": sorted(v.value for v in pattern.spokes),
        }
    return {
        "kind": COMPLEX,
        "order": pattern.order,
        "first_stage": [pattern_to_dict(p) for p in pattern.first_stage],
        "second_stage": [pattern_to_dict(p) for p in pattern.second_stage],
    }


def pattern_from_dict(data: Mapping[str, Any], chain: str) -> Pattern:
    kind = data.get("kind")

    def addr(value: str) -> Address:
        return Address.parse(chain, value)

    if kind == SEQUENTIAL:
        return SequentialPattern(
            path_vertices=tuple(addr(v) for v in data["path"]),
            covered_seed=frozenset(addr(v) for v in data["covered"]),
        )
    if kind == RADIAL:
        return RadialPattern(center=addr(data["center"]), spokes=frozenset(addr(v) for v in data["spokes"]))
    if kind == COMPLEX:
        return ComplexPattern(
            order=data["order"],
            first_stage=tuple(pattern_from_dict(p, chain) for p in data["first_stage"]),
            second_stage=tuple(pattern_from_dict(p, chain) for p in data["second_stage"]),
        )
    raise ReportError(f"unknown pattern kind {kind!r}")


def _cluster_to_dict(cluster: ClusterResult) -> Dict[str, Any]:
    return {
        "cluster_id": cluster.cluster_id,
        "accounts": [a.value for a in cluster.accounts],
        "mean_similarity": cluster.mean_similarity,
        "flagged": cluster.flagged,
        "patterns": {
            SEQUENTIAL: [pattern_to_dict(p) for p in cluster.sequential],
            RADIAL: [pattern_to_dict(p) for p in cluster.radial],
            COMPLEX: [pattern_to_dict(p) for p in cluster.complex],
        },
    }


def _cluster_from_dict(data: Mapping[str, Any], chain: str) -> ClusterResult:
    patterns = data.get("patterns", {})
    return ClusterResult(
        cluster_id=data["cluster_id"],
        accounts=[Address.parse(chain, v) for v in data["accounts"]],
        mean_similarity=float(data["mean_similarity"]),
        sequential=[pattern_from_dict(p, chain) for p in patterns.get(SEQUENTIAL, [])],
        radial=[pattern_from_dict(p, chain) for p in patterns.get(RADIAL, [])],
        complex=[pattern_from_dict(p, chain) for p in patterns.get(COMPLEX, [])],
        flagged=bool(data["flagged"]),
    )


def _component_to_dict(component: ComponentResult) -> Dict[str, Any]:
    return {
        "component_id": component.component_id,
        "chain": component.chain,
        "size": component.size,
        "accounts": component.accounts,
        "silhouette": component.silhouette,
        "noise": [a.value for a in component.noise],
        "clusters": [_cluster_to_dict(c) for c in component.clusters],
    }


def _component_from_dict(data: Mapping[str, Any]) -> ComponentResult:
    chain = data["chain"]
    silhouette = data.get("silhouette")
    return ComponentResult(
        component_id=data["component_id"],
        chain=chain,
        size=int(data["size"]),
        accounts=int(data["accounts"]),
        clusters=[_cluster_from_dict(c, chain) for c in data["clusters"]],
        noise=[Address.parse(chain, v) for v in data.get("noise", [])],
        silhouette=float(silhouette) if silhouette is not None else None,
    )


def interaction_table(
    sequences: Mapping[Address, ActivitySequence],
    accounts: Iterable[Address],
) -> List[List[str]]:
    """
    One row per account: truncated address, then ``type amount`` per activity.

    Rows are padded to the longest sequence.
    """
    rows = []
    for account in sorted(accounts):
        cells = [account.short]
        sequence = sequences.get(account)
        for item in (sequence.items if sequence else ()):
            text = item.activity_type
            if item.amount is not None:
                text += f" {format_amount(item.amount)}"
            cells.append(text)
        rows.append(cells)
    width = max((len(r) for r in rows), default=0)
    return [r + [""] * (width - len(r)) for r in rows]
