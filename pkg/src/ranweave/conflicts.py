"""Coordination-conflict detection between rApp pipelines.

Four conflict classes are modeled as deterministic predicates:

* actuator contention - two pipelines configure the same xApp with
  different directives (identical directives are legal sharing),
* parameter coupling - distinct xApps write the same network parameter,
* objective interference - opposing pressure on a shared KPI,
* vendor interoperability - incompatible control dialects in contact.

Detectors are pure and symmetric; a fixed canonical ordering of the
resulting records makes every derived artifact byte-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .model import DeploymentState, Intent, Pipeline, Registry, has_directed_path

PIPELINE_LEVEL = "*"


class ConflictKind(str, Enum):
    ACTUATOR_CONTENTION = "actuator_contention"
    PARAMETER_COUPLING = "parameter_coupling"
    OBJECTIVE_INTERFERENCE = "objective_interference"
    VENDOR_INTEROP = "vendor_interop"


_KIND_ORDER = {kind: index for index, kind in enumerate(ConflictKind)}

# Grouping keys used by the shared JSON conflict-report schema.
REPORT_GROUPS = {
    ConflictKind.ACTUATOR_CONTENTION: "actuator",
    ConflictKind.PARAMETER_COUPLING: "parameter",
    ConflictKind.OBJECTIVE_INTERFERENCE: "objective",
    ConflictKind.VENDOR_INTEROP: "vendor",
}


@dataclass(frozen=True, slots=True)
class ConflictRecord:
    """One detected conflict, with the pipelines and xApps implicated.

    Participants are (pipeline-ref, xapp_id) pairs; the pipeline-level
    marker "*" stands in when a whole intent, not a specific xApp, is the
    implicated party (intent-vs-intent objective opposition).
    """

    kind: ConflictKind
    participants: frozenset[tuple[str, str]]
    subject: str
    explanation: str

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.subject, tuple(sorted(self.participants)))

    def refs(self) -> set[str]:
        return {ref for ref, _ in self.participants}

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": self.kind.value,
            "participants": [list(p) for p in sorted(self.participants)],
            "subject": self.subject,
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "ConflictRecord":
        return cls(
            kind=ConflictKind(str(data["kind"])),
            participants=frozenset((str(r), str(x)) for r, x in data["participants"]),
            subject=str(data["subject"]),
            explanation=str(data["explanation"]),
        )


def canonical_sort(records: Iterable[ConflictRecord]) -> list[ConflictRecord]:
    return sorted(records, key=ConflictRecord.sort_key)


@dataclass(frozen=True)
class VendorCompatibilityMatrix:
    """Unordered dialect pairs that cannot execute reliably together."""

    incompatible: frozenset[frozenset[str]]

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "VendorCompatibilityMatrix":
        for a, b in pairs:
            if a == b:
                raise ValueError(f"dialect {a!r} cannot be incompatible with itself")
        return cls(frozenset(frozenset(pair) for pair in pairs))

    def clashes(self, dialect_a: str, dialect_b: str) -> bool:
        return frozenset((dialect_a, dialect_b)) in self.incompatible

    def to_dict(self) -> dict[str, object]:
        return {"incompatible": sorted(sorted(pair) for pair in self.incompatible)}

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "VendorCompatibilityMatrix":
        return cls.of(*[(str(a), str(b)) for a, b in data["incompatible"]])


def detect_actuator_contention(
    a: Pipeline,
    b: Pipeline,
    *,
    a_ref: str | None = None,
    b_ref: str | None = None,
) -> list[ConflictRecord]:
    """Same xApp in both pipelines with differing directives.

    Reusing one xApp with an identical directive is allowed: identical
    instructions cannot contend at the actuator.
    """
    ra, rb = a_ref or a.ref, b_ref or b.ref
    records = []
    directives_b = {node.xapp_id: node.directive for node in b.nodes}
    for node in a.nodes:
        other = directives_b.get(node.xapp_id)
        if other is not None and other != node.directive:
            records.append(
                ConflictRecord(
                    kind=ConflictKind.ACTUATOR_CONTENTION,
                    participants=frozenset({(ra, node.xapp_id), (rb, node.xapp_id)}),
                    subject=node.xapp_id,
                    explanation=(
                        f"pipelines {ra} and {rb} push different directives to xApp {node.xapp_id}"
                    ),
                )
            )
    return canonical_sort(records)


def detect_parameter_coupling(
    a: Pipeline,
    b: Pipeline,
    registry: Registry,
    *,
    a_ref: str | None = None,
    b_ref: str | None = None,
) -> list[ConflictRecord]:
    """Distinct xApps across pipelines writing the same network parameter.

    Overlap through the very same xApp is actuator contention's business
    and is not reported here.
    """
    ra, rb = a_ref or a.ref, b_ref or b.ref
    writers_a = _param_writers(a, registry)
    writers_b = _param_writers(b, registry)
    records = []
    for param in sorted(set(writers_a) & set(writers_b)):
        xa, xb = writers_a[param], writers_b[param]
        if not any(w1 != w2 for w1 in xa for w2 in xb):
            continue
        participants = {(ra, x) for x in xa} | {(rb, x) for x in xb}
        records.append(
            ConflictRecord(
                kind=ConflictKind.PARAMETER_COUPLING,
                participants=frozenset(participants),
                subject=param,
                explanation=f"parameter {param} is written from both pipeline {ra} and pipeline {rb}",
            )
        )
    return canonical_sort(records)


def detect_internal_coupling(pipeline: Pipeline, registry: Registry, *, ref: str | None = None) -> list[ConflictRecord]:
    """Two xApps of one pipeline writing the same parameter without ordering.

    A directed path between the writers means the DAG sequences their
    actuation, which is exactly what edges are for; only unordered pairs
    are conflicts.
    """
    r = ref or pipeline.ref
    writers = _param_writers(pipeline, registry)
    records = []
    for param, xapps in sorted(writers.items()):
        ordered = sorted(xapps)
        for i, x1 in enumerate(ordered):
            for x2 in ordered[i + 1 :]:
                if has_directed_path(pipeline, x1, x2) or has_directed_path(pipeline, x2, x1):
                    continue
                records.append(
                    ConflictRecord(
                        kind=ConflictKind.PARAMETER_COUPLING,
                        participants=frozenset({(r, x1), (r, x2)}),
                        subject=param,
                        explanation=(
                            f"xApps {x1} and {x2} both write {param} inside pipeline {r} "
                            "with no ordering between them"
                        ),
                    )
                )
    return canonical_sort(records)


def _param_writers(pipeline: Pipeline, registry: Registry) -> dict[str, list[str]]:
    writers: dict[str, list[str]] = {}
    for node in pipeline.nodes:
        profile = registry.get(node.xapp_id)
        if profile is None:
            continue
        for param in profile.controlled_params:
            writers.setdefault(param, []).append(node.xapp_id)
    return writers


def detect_objective_interference(
    a: Pipeline,
    intent_a: Intent,
    b: Pipeline,
    intent_b: Intent,
    registry: Registry,
    *,
    a_ref: str | None = None,
    b_ref: str | None = None,
) -> list[ConflictRecord]:
    """Opposing pressure on a shared KPI.

    Fires when the two intents demand opposite directions on a KPI, or when
    an xApp on one side strictly pushes a KPI against the other intent's
    target. Neutral (zero) effects never interfere.
    """
    ra, rb = a_ref or a.ref, b_ref or b.ref
    targets_a, targets_b = intent_a.targets, intent_b.targets
    records = []
    for kpi in sorted(set(targets_a) | set(targets_b)):
        dir_a, dir_b = targets_a.get(kpi), targets_b.get(kpi)
        opposed_intents = dir_a is not None and dir_b is not None and dir_a == -dir_b
        against_a = _opposing_nodes(b, registry, kpi, dir_a)
        against_b = _opposing_nodes(a, registry, kpi, dir_b)
        if not (opposed_intents or against_a or against_b):
            continue
        participants = {(rb, x) for x in against_a} | {(ra, x) for x in against_b}
        if opposed_intents or not any(r == ra for r, _ in participants):
            participants.add((ra, PIPELINE_LEVEL))
        if opposed_intents or not any(r == rb for r, _ in participants):
            participants.add((rb, PIPELINE_LEVEL))
        records.append(
            ConflictRecord(
                kind=ConflictKind.OBJECTIVE_INTERFERENCE,
                participants=frozenset(participants),
                subject=kpi,
                explanation=f"pipelines {ra} and {rb} exert opposing pressure on KPI {kpi}",
            )
        )
    return canonical_sort(records)


def _opposing_nodes(pipeline: Pipeline, registry: Registry, kpi: str, wanted: int | None) -> list[str]:
    if wanted is None:
        return []
    out = []
    for node in pipeline.nodes:
        profile = registry.get(node.xapp_id)
        if profile is not None and profile.effect_on(kpi) == -wanted:
            out.append(node.xapp_id)
    return out


def detect_vendor_conflicts(
    a: Pipeline,
    b: Pipeline,
    matrix: VendorCompatibilityMatrix,
    registry: Registry,
    *,
    a_ref: str | None = None,
    b_ref: str | None = None,
) -> list[ConflictRecord]:
    """Incompatible dialects that actually touch.

    Cross-pipeline, incompatibility only matters on contact: the two xApps
    must share a controlled parameter or a (nonzero) KPI effect.
    """
    ra, rb = a_ref or a.ref, b_ref or b.ref
    records = []
    for node_a in a.nodes:
        pa = registry.get(node_a.xapp_id)
        if pa is None:
            continue
        for node_b in b.nodes:
            pb = registry.get(node_b.xapp_id)
            if pb is None or not matrix.clashes(pa.dialect, pb.dialect):
                continue
            shared_params = pa.controlled_params & pb.controlled_params
            shared_kpis = _touched_kpis(pa) & _touched_kpis(pb)
            if not shared_params and not shared_kpis:
                continue
            records.append(
                ConflictRecord(
                    kind=ConflictKind.VENDOR_INTEROP,
                    participants=frozenset({(ra, node_a.xapp_id), (rb, node_b.xapp_id)}),
                    subject=_dialect_pair(pa.dialect, pb.dialect),
                    explanation=(
                        f"xApps {node_a.xapp_id} and {node_b.xapp_id} use incompatible "
                        f"dialects and act on shared resources"
                    ),
                )
            )
    return canonical_sort(records)


def detect_internal_vendor(
    pipeline: Pipeline,
    matrix: VendorCompatibilityMatrix,
    registry: Registry,
    *,
    ref: str | None = None,
) -> list[ConflictRecord]:
    """Adjacent pipeline nodes whose dialects cannot interoperate."""
    r = ref or pipeline.ref
    records = []
    for a, b in sorted(pipeline.edges):
        pa, pb = registry.get(a), registry.get(b)
        if pa is None or pb is None or not matrix.clashes(pa.dialect, pb.dialect):
            continue
        records.append(
            ConflictRecord(
                kind=ConflictKind.VENDOR_INTEROP,
                participants=frozenset({(r, a), (r, b)}),
                subject=_dialect_pair(pa.dialect, pb.dialect),
                explanation=f"edge ({a}, {b}) inside pipeline {r} crosses incompatible dialects",
            )
        )
    return canonical_sort(records)


def _touched_kpis(profile) -> set[str]:
    return {kpi for kpi, direction in profile.kpi_effects if direction != 0}


def _dialect_pair(d1: str, d2: str) -> str:
    return "|".join(sorted((d1, d2)))


def pairwise_conflicts(
    a: Pipeline,
    b: Pipeline,
    intents: Mapping[int | str, Intent],
    matrix: VendorCompatibilityMatrix,
    registry: Registry,
    *,
    a_ref: str | None = None,
    b_ref: str | None = None,
) -> list[ConflictRecord]:
    """All four detectors over one unordered pipeline pair."""
    records = detect_actuator_contention(a, b, a_ref=a_ref, b_ref=b_ref)
    records += detect_parameter_coupling(a, b, registry, a_ref=a_ref, b_ref=b_ref)
    records += detect_objective_interference(
        a, intents[a.intent_id], b, intents[b.intent_id], registry, a_ref=a_ref, b_ref=b_ref
    )
    records += detect_vendor_conflicts(a, b, matrix, registry, a_ref=a_ref, b_ref=b_ref)
    return canonical_sort(records)


def internal_conflicts(
    pipeline: Pipeline,
    matrix: VendorCompatibilityMatrix,
    registry: Registry,
    *,
    ref: str | None = None,
) -> list[ConflictRecord]:
    records = detect_internal_coupling(pipeline, registry, ref=ref)
    records += detect_internal_vendor(pipeline, matrix, registry, ref=ref)
    return canonical_sort(records)


def validity(
    pipeline: Pipeline,
    others: Iterable[Pipeline],
    intents: Mapping[int | str, Intent],
    matrix: VendorCompatibilityMatrix,
    registry: Registry,
    *,
    ref: str | None = None,
    other_refs: Mapping[int | str, str] | None = None,
) -> tuple[bool, list[ConflictRecord]]:
    """Can this pipeline deploy safely alongside the given active set?

    Returns the verdict together with every conflict record found; the
    record list is exactly the concatenation of the four detectors plus the
    pipeline's own internal checks, canonically ordered.
    """
    records = internal_conflicts(pipeline, matrix, registry, ref=ref)
    for other in sorted(others, key=lambda p: str(p.intent_id)):
        o_ref = (other_refs or {}).get(other.intent_id)
        records += pairwise_conflicts(
            pipeline, other, intents, matrix, registry, a_ref=ref, b_ref=o_ref
        )
    records = canonical_sort(records)
    return (not records, records)


@dataclass(frozen=True)
class ConflictGraph:
    """Pipelines as vertices, detected conflicts as labeled edges."""

    vertices: tuple[str, ...]
    edges: tuple[tuple[tuple[str, str], tuple[ConflictRecord, ...]], ...]

    def edge_map(self) -> dict[tuple[str, str], tuple[ConflictRecord, ...]]:
        return dict(self.edges)

    def all_records(self) -> list[ConflictRecord]:
        return canonical_sort(r for _, records in self.edges for r in records)

    def neighbors(self, ref: str) -> set[str]:
        out = set()
        for (u, v), _ in self.edges:
            if u == ref:
                out.add(v)
            elif v == ref:
                out.add(u)
        return out


PRE_DEPLOYED_PREFIX = "pre:"


def build_conflict_graph(
    candidates: Mapping[int | str, Pipeline],
    pre: DeploymentState,
    intents: Mapping[int | str, Intent],
    matrix: VendorCompatibilityMatrix,
    registry: Registry,
) -> ConflictGraph:
    """Run all four detectors over every unordered pipeline pair.

    Pre-deployed pipelines take a "pre:" tag so candidate and active
    occurrences of the same intent never collide.
    """
    labeled: list[tuple[str, Pipeline]] = [
        (str(intent_id), candidates[intent_id]) for intent_id in sorted(candidates, key=str)
    ]
    labeled += [(f"{PRE_DEPLOYED_PREFIX}{p.intent_id}", p) for p in pre]
    labeled.sort(key=lambda item: item[0])

    edges = []
    for i, (ref_a, pipe_a) in enumerate(labeled):
        for ref_b, pipe_b in labeled[i + 1 :]:
            records = pairwise_conflicts(
                pipe_a, pipe_b, intents, matrix, registry, a_ref=ref_a, b_ref=ref_b
            )
            if records:
                edges.append(((ref_a, ref_b), tuple(records)))
    return ConflictGraph(
        vertices=tuple(ref for ref, _ in labeled),
        edges=tuple(sorted(edges, key=lambda e: e[0])),
    )


def conflict_report(records: Iterable[ConflictRecord], notes: str = "") -> dict[str, object]:
    """Serialize records into the shared JSON conflict-report shape."""
    groups: dict[str, list[dict[str, object]]] = {name: [] for name in REPORT_GROUPS.values()}
    for record in canonical_sort(records):
        groups[REPORT_GROUPS[record.kind]].append(record.to_dict())
    return {"conflicts": groups, "notes": notes}
