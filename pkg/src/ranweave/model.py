"""Core Open RAN entities: xApp profiles, intents, pipelines, deployment state.

All types are immutable value objects; every operation in this module is a
pure function. Structural problems in a pipeline are reported as data
(Violation records), never as exceptions, so validation is total.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator, Mapping


class Stage(IntEnum):
    """Pipeline stage class. Edges must not run against this order."""

    SENSE = 0
    DECIDE = 1
    ACT = 2

    @classmethod
    def parse(cls, value: str) -> "Stage":
        try:
            return cls[value.upper()]
        except KeyError:
            raise ValueError(f"unknown stage {value!r}; expected sense, decide or act") from None

    @property
    def label(self) -> str:
        return self.name.lower()


Directive = tuple[tuple[str, str], ...]

Conditions = tuple[tuple[str, object], ...]


def normalize_directive(directive: Mapping[str, str] | Directive) -> Directive:
    """Canonical form of a directive: sorted (param, setting) pairs."""
    if isinstance(directive, tuple):
        items = list(directive)
    else:
        items = list(directive.items())
    for param, setting in items:
        if not isinstance(param, str) or not isinstance(setting, str):
            raise ValueError(f"directive entries must be string pairs, got ({param!r}, {setting!r})")
    return tuple(sorted(items))


_SCALAR_TYPES = (str, int, float, bool)


def validate_deployment_conditions(conditions: object) -> list[str]:
    """Schema check for a deployment-conditions record.

    The record is a flat mapping from condition name to a scalar or a list
    of scalars. Its meaning is never interpreted, only its shape.
    """
    problems: list[str] = []
    if not isinstance(conditions, (dict, tuple)):
        return [f"deployment_conditions must be an object, got {type(conditions).__name__}"]
    items = conditions if isinstance(conditions, tuple) else tuple(conditions.items())
    for entry in items:
        if not isinstance(entry, tuple) or len(entry) != 2:
            problems.append(f"malformed condition entry {entry!r}")
            continue
        key, value = entry
        if not isinstance(key, str) or not key:
            problems.append(f"condition keys must be nonempty strings, got {key!r}")
        if isinstance(value, _SCALAR_TYPES):
            continue
        if isinstance(value, (list, tuple)) and all(isinstance(v, _SCALAR_TYPES) for v in value):
            continue
        problems.append(f"condition {key!r} must map to a scalar or list of scalars")
    return problems


def normalize_conditions(conditions: Mapping[str, object] | Conditions) -> Conditions:
    items = conditions if isinstance(conditions, tuple) else tuple(conditions.items())
    out = []
    for key, value in sorted(items):
        if isinstance(value, list):
            value = tuple(value)
        out.append((key, value))
    return tuple(out)


def conditions_to_dict(conditions: Conditions) -> dict[str, object]:
    return {key: list(value) if isinstance(value, tuple) else value for key, value in conditions}


@dataclass(frozen=True, slots=True)
class XAppProfile:
    """Registry entry for one near-real-time control function."""

    id: str
    name: str
    vendor: str
    dialect: str
    capabilities: frozenset[str]
    controlled_params: frozenset[str]
    kpi_effects: tuple[tuple[str, int], ...]
    stage: Stage
    interfaces: frozenset[str]

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("xApp id must be nonempty")
        if not self.capabilities:
            raise ValueError(f"xApp {self.id!r} declares no capabilities")
        for kpi, direction in self.kpi_effects:
            if direction not in (-1, 0, 1):
                raise ValueError(f"xApp {self.id!r}: effect on {kpi!r} must be -1, 0 or +1")

    @classmethod
    def build(
        cls,
        id: str,
        *,
        name: str = "",
        vendor: str = "generic",
        dialect: str = "generic-std",
        capabilities: Iterable[str] = (),
        controlled_params: Iterable[str] = (),
        kpi_effects: Mapping[str, int] | None = None,
        stage: Stage | str = Stage.ACT,
        interfaces: Iterable[str] = ("nearrt-api",),
    ) -> "XAppProfile":
        return cls(
            id=id,
            name=name or id,
            vendor=vendor,
            dialect=dialect,
            capabilities=frozenset(capabilities),
            controlled_params=frozenset(controlled_params),
            kpi_effects=tuple(sorted((kpi_effects or {}).items())),
            stage=stage if isinstance(stage, Stage) else Stage.parse(stage),
            interfaces=frozenset(interfaces),
        )

    @property
    def effects(self) -> dict[str, int]:
        return dict(self.kpi_effects)

    def effect_on(self, kpi: str) -> int:
        return self.effects.get(kpi, 0)

    def to_dict(self) -> dict[str, object]:
        return {
            "id": self.id,
            "name": self.name,
            "vendor": self.vendor,
            "dialect": self.dialect,
            "capabilities": sorted(self.capabilities),
            "controlled_params": sorted(self.controlled_params),
            "kpi_effects": dict(self.kpi_effects),
            "stage": self.stage.label,
            "interfaces": sorted(self.interfaces),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "XAppProfile":
        return cls.build(
            str(data["id"]),
            name=str(data.get("name", data["id"])),
            vendor=str(data["vendor"]),
            dialect=str(data["dialect"]),
            capabilities=[str(c) for c in data["capabilities"]],
            controlled_params=[str(p) for p in data["controlled_params"]],
            kpi_effects={str(k): int(v) for k, v in data["kpi_effects"].items()},
            stage=str(data["stage"]),
            interfaces=[str(i) for i in data["interfaces"]],
        )


class Registry:
    """Immutable xApp catalog with id lookup and a KPI catalog.

    The KPI catalog defaults to every KPI any profile declares an effect on;
    a wider catalog may be supplied when intents reference extra KPIs.
    """

    def __init__(self, profiles: Iterable[XAppProfile], kpi_catalog: Iterable[str] = ()):
        by_id: dict[str, XAppProfile] = {}
        for profile in profiles:
            if profile.id in by_id:
                raise ValueError(f"duplicate xApp id {profile.id!r} in registry")
            by_id[profile.id] = profile
        self._by_id = dict(sorted(by_id.items()))
        declared = {kpi for p in self._by_id.values() for kpi, _ in p.kpi_effects}
        self.kpi_catalog = frozenset(kpi_catalog) | declared
        for profile in self._by_id.values():
            unknown = {kpi for kpi, _ in profile.kpi_effects} - self.kpi_catalog
            if unknown:
                raise ValueError(f"xApp {profile.id!r} affects unknown KPIs {sorted(unknown)}")

    def __contains__(self, xapp_id: str) -> bool:
        return xapp_id in self._by_id

    def __getitem__(self, xapp_id: str) -> XAppProfile:
        return self._by_id[xapp_id]

    def __iter__(self) -> Iterator[XAppProfile]:
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def get(self, xapp_id: str) -> XAppProfile | None:
        return self._by_id.get(xapp_id)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._by_id)


@dataclass(frozen=True, slots=True)
class Intent:
    """A high-level service objective submitted for orchestration."""

    id: int | str
    text: str
    target_kpis: tuple[tuple[str, int], ...]
    required_capabilities: frozenset[str]
    required_xapps: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.target_kpis:
            raise ValueError(f"intent {self.id!r} targets no KPIs")
        if not self.required_capabilities:
            raise ValueError(f"intent {self.id!r} requires no capabilities")
        for kpi, direction in self.target_kpis:
            if direction not in (-1, 1):
                raise ValueError(f"intent {self.id!r}: target direction on {kpi!r} must be -1 or +1")

    @classmethod
    def build(
        cls,
        id: int | str,
        text: str,
        *,
        target_kpis: Mapping[str, int],
        required_capabilities: Iterable[str],
        required_xapps: Iterable[str] = (),
    ) -> "Intent":
        return cls(
            id=id,
            text=text,
            target_kpis=tuple(sorted(target_kpis.items())),
            required_capabilities=frozenset(required_capabilities),
            required_xapps=frozenset(required_xapps),
        )

    @property
    def targets(self) -> dict[str, int]:
        return dict(self.target_kpis)

    def to_dict(self) -> dict[str, object]:
        return {
            "id": self.id,
            "text": self.text,
            "target_kpis": dict(self.target_kpis),
            "required_capabilities": sorted(self.required_capabilities),
            "required_xapps": sorted(self.required_xapps),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "Intent":
        raw_id = data["id"]
        return cls.build(
            raw_id if isinstance(raw_id, int) else str(raw_id),
            str(data["text"]),
            target_kpis={str(k): int(v) for k, v in data["target_kpis"].items()},
            required_capabilities=[str(c) for c in data["required_capabilities"]],
            required_xapps=[str(x) for x in data.get("required_xapps", [])],
        )


@dataclass(frozen=True, slots=True)
class PipelineNode:
    xapp_id: str
    directive: Directive

    @property
    def directive_map(self) -> dict[str, str]:
        return dict(self.directive)


@dataclass(frozen=True, slots=True)
class Pipeline:
    """An rApp policy: a DAG of configured xApps plus deployment conditions."""

    intent_id: int | str
    nodes: tuple[PipelineNode, ...]
    edges: frozenset[tuple[str, str]]
    deployment_conditions: Conditions = ()

    @classmethod
    def build(
        cls,
        intent_id: int | str,
        nodes: Iterable[tuple[str, Mapping[str, str]]],
        edges: Iterable[tuple[str, str]] = (),
        conditions: Mapping[str, object] | None = None,
    ) -> "Pipeline":
        return cls(
            intent_id=intent_id,
            nodes=tuple(PipelineNode(x, normalize_directive(d)) for x, d in nodes),
            edges=frozenset((str(a), str(b)) for a, b in edges),
            deployment_conditions=normalize_conditions(conditions or {}),
        )

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(node.xapp_id for node in self.nodes)

    def directive_of(self, xapp_id: str) -> Directive | None:
        for node in self.nodes:
            if node.xapp_id == xapp_id:
                return node.directive
        return None

    @property
    def ref(self) -> str:
        """Default pipeline reference label: the owning intent id."""
        return str(self.intent_id)

    def size(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True, slots=True)
class DeploymentState:
    """The set of currently active rApp pipelines."""

    active: tuple[Pipeline, ...] = ()

    def with_pipeline(self, pipeline: Pipeline) -> "DeploymentState":
        return DeploymentState(self.active + (pipeline,))

    def __len__(self) -> int:
        return len(self.active)

    def __iter__(self) -> Iterator[Pipeline]:
        return iter(self.active)


@dataclass(frozen=True, slots=True)
class Violation:
    """One structural defect found in a pipeline."""

    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


@dataclass(frozen=True, slots=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


class PipelineStructureError(ValueError):
    """Raised when an operation requires a structurally valid pipeline."""

    def __init__(self, violations: Iterable[Violation]):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in self.violations) or "invalid pipeline")


def validate_pipeline_structure(pipeline: Pipeline, registry: Registry) -> ValidationResult:
    """Full structural check. Returns every violation found, crash-free."""
    violations: list[Violation] = []

    if not pipeline.nodes:
        violations.append(Violation("empty_pipeline", "pipeline has no nodes"))

    seen: set[str] = set()
    for node in pipeline.nodes:
        if node.xapp_id in seen:
            violations.append(Violation("duplicate_node", f"xApp {node.xapp_id!r} appears more than once"))
        seen.add(node.xapp_id)
        if node.xapp_id not in registry:
            violations.append(Violation("unknown_xapp", f"xApp {node.xapp_id!r} is not registered"))

    node_ids = set(pipeline.node_ids)
    usable_edges: list[tuple[str, str]] = []
    for a, b in sorted(pipeline.edges):
        if a not in node_ids or b not in node_ids:
            violations.append(Violation("dangling_edge", f"edge ({a!r}, {b!r}) references a missing node"))
            continue
        usable_edges.append((a, b))
        profile_a, profile_b = registry.get(a), registry.get(b)
        if profile_a is not None and profile_b is not None and profile_a.stage > profile_b.stage:
            violations.append(
                Violation(
                    "stage_order",
                    f"edge ({a!r}, {b!r}) runs {profile_a.stage.label} -> {profile_b.stage.label}",
                )
            )

    cycle_nodes = _nodes_on_cycles(node_ids, usable_edges)
    if cycle_nodes:
        violations.append(Violation("cycle", f"cycle through {sorted(cycle_nodes)}"))

    for problem in validate_deployment_conditions(pipeline.deployment_conditions):
        violations.append(Violation("bad_conditions", problem))

    return ValidationResult(tuple(violations))


def _nodes_on_cycles(node_ids: set[str], edges: list[tuple[str, str]]) -> set[str]:
    """Kahn-style peel; whatever cannot be peeled sits on a cycle."""
    indegree = {n: 0 for n in node_ids}
    successors: dict[str, list[str]] = {n: [] for n in node_ids}
    for a, b in edges:
        indegree[b] += 1
        successors[a].append(b)
    queue = [n for n, d in indegree.items() if d == 0]
    remaining = set(node_ids)
    while queue:
        node = queue.pop()
        remaining.discard(node)
        for nxt in successors[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    return remaining


def topological_order(pipeline: Pipeline, registry: Registry) -> list[str]:
    """Deterministic topological order; ties broken by ascending xApp id."""
    result = validate_pipeline_structure(pipeline, registry)
    if not result.ok:
        raise PipelineStructureError(result.violations)

    indegree = {n: 0 for n in pipeline.node_ids}
    successors: dict[str, list[str]] = {n: [] for n in pipeline.node_ids}
    for a, b in pipeline.edges:
        indegree[b] += 1
        successors[a].append(b)

    ready = [n for n, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for nxt in sorted(successors[node]):
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, nxt)
    return order


def pipelines_equal(p: Pipeline, q: Pipeline) -> bool:
    """Ground-truth equality: nodes with directives and the edge set.

    Deployment conditions are deliberately excluded; they only need to exist
    and be schema-valid, there is no reference value to compare against.
    """
    p_nodes = {node.xapp_id: node.directive for node in p.nodes}
    q_nodes = {node.xapp_id: node.directive for node in q.nodes}
    return p_nodes == q_nodes and p.edges == q.edges


def has_directed_path(pipeline: Pipeline, source: str, target: str) -> bool:
    """True when target is reachable from source along pipeline edges."""
    if source == target:
        return True
    successors: dict[str, list[str]] = {}
    for a, b in pipeline.edges:
        successors.setdefault(a, []).append(b)
    stack = [source]
    visited: set[str] = set()
    while stack:
        node = stack.pop()
        if node == target:
            return True
        if node in visited:
            continue
        visited.add(node)
        stack.extend(successors.get(node, ()))
    return False
