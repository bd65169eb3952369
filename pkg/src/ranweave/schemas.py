"""JSON document schemas shared by the agents and the conflict engine.

Three wire documents exist: the perception conflict report, the reasoning
policy document, and the refinement document. Parsing is strict - unknown
keys are rejected and every violation is reported with its path so a
malformed response can be re-prompted with concrete errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .conflicts import REPORT_GROUPS, ConflictKind, ConflictRecord, canonical_sort
from .model import (
    Pipeline,
    PipelineNode,
    Registry,
    conditions_to_dict,
    normalize_conditions,
    normalize_directive,
    validate_deployment_conditions,
)


class SchemaValidationError(ValueError):
    def __init__(self, doc_name: str, errors: list[str]):
        self.doc_name = doc_name
        self.errors = list(errors)
        super().__init__(f"{doc_name}: " + "; ".join(errors))


class EditKind(str, Enum):
    REMOVE_DUPLICATE = "remove_duplicate"
    DROP_SUPERFLUOUS = "drop_superfluous"
    REORDER_STAGE = "reorder_stage"
    REPLACE_XAPP = "replace_xapp"
    ADJUST_CONDITIONS = "adjust_conditions"


@dataclass(frozen=True)
class PerceptionDoc:
    records: tuple[ConflictRecord, ...]
    notes: str = ""

    def to_dict(self) -> dict[str, object]:
        from .conflicts import conflict_report

        return conflict_report(self.records, self.notes)


@dataclass(frozen=True)
class PolicyDoc:
    pipeline: Pipeline

    def to_dict(self) -> dict[str, object]:
        return pipeline_to_policy_doc(self.pipeline)


@dataclass(frozen=True)
class RefinementDoc:
    revised: Pipeline
    edits: tuple[tuple[EditKind, str], ...]

    def to_dict(self) -> dict[str, object]:
        return {
            "revised_policy": pipeline_to_policy_doc(self.revised),
            "edits": [[kind.value, rationale] for kind, rationale in self.edits],
        }


def pipeline_to_policy_doc(pipeline: Pipeline) -> dict[str, object]:
    """Lossless JSON form of a pipeline (node order preserved)."""
    return {
        "intent_id": pipeline.intent_id,
        "selected_xapps": [[node.xapp_id, node.directive_map] for node in pipeline.nodes],
        "edges": sorted([a, b] for a, b in pipeline.edges),
        "deployment_conditions": conditions_to_dict(pipeline.deployment_conditions),
    }


def policy_doc_to_pipeline(data: Mapping[str, object]) -> Pipeline:
    errors = _policy_doc_errors(data)
    if errors:
        raise SchemaValidationError("policy document", errors)
    return Pipeline(
        intent_id=data["intent_id"],
        nodes=tuple(
            PipelineNode(str(x), normalize_directive(dict(d)))
            for x, d in data["selected_xapps"]
        ),
        edges=frozenset((str(a), str(b)) for a, b in data["edges"]),
        deployment_conditions=normalize_conditions(data["deployment_conditions"]),
    )


_POLICY_KEYS = {"intent_id", "selected_xapps", "edges", "deployment_conditions"}


def _policy_doc_errors(data: object) -> list[str]:
    if not isinstance(data, Mapping):
        return [f"expected a JSON object, got {type(data).__name__}"]
    errors = []
    unknown = sorted(set(data) - _POLICY_KEYS)
    if unknown:
        errors.append(f"unknown keys {unknown}")
    missing = sorted(_POLICY_KEYS - set(data))
    if missing:
        errors.append(f"missing keys {missing}")
        return errors

    if not isinstance(data["intent_id"], (int, str)):
        errors.append("intent_id must be an integer or string")

    xapps = data["selected_xapps"]
    if not isinstance(xapps, list):
        errors.append("selected_xapps must be a list")
    else:
        for index, item in enumerate(xapps):
            if not (isinstance(item, (list, tuple)) and len(item) == 2):
                errors.append(f"selected_xapps[{index}] must be an [xapp_id, directive] pair")
                continue
            xapp_id, directive = item
            if not isinstance(xapp_id, str):
                errors.append(f"selected_xapps[{index}] xapp id must be a string")
            if not isinstance(directive, Mapping) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in directive.items()
            ):
                errors.append(f"selected_xapps[{index}] directive must map strings to strings")

    edges = data["edges"]
    if not isinstance(edges, list) or not all(
        isinstance(e, (list, tuple)) and len(e) == 2 and all(isinstance(x, str) for x in e)
        for e in edges
    ):
        errors.append("edges must be a list of [from, to] id pairs")

    conditions = data["deployment_conditions"]
    if not isinstance(conditions, Mapping):
        errors.append("deployment_conditions must be an object")
    else:
        errors.extend(validate_deployment_conditions(dict(conditions)))
    return errors


def parse_policy_doc(text: str, registry: Registry | None = None) -> PolicyDoc:
    """Parse and validate a reasoning response.

    Registry membership of the selected xApps is part of the schema check;
    structural validity of the pipeline itself is deliberately not, those
    violations are surfaced to refinement instead of being rejected here.
    """
    data = _load_json(text, "policy document")
    pipeline = policy_doc_to_pipeline(data)
    if registry is not None:
        unknown = sorted({n.xapp_id for n in pipeline.nodes} - set(registry.ids))
        if unknown:
            raise SchemaValidationError("policy document", [f"unregistered xApp ids {unknown}"])
    return PolicyDoc(pipeline)


def parse_perception_doc(text: str) -> PerceptionDoc:
    data = _load_json(text, "conflict report")
    errors: list[str] = []
    if not isinstance(data, Mapping):
        raise SchemaValidationError("conflict report", ["expected a JSON object"])
    allowed = {"conflicts", "notes"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        errors.append(f"unknown keys {unknown}")
    conflicts = data.get("conflicts")
    if not isinstance(conflicts, Mapping):
        errors.append("conflicts must be an object grouping records by class")
        raise SchemaValidationError("conflict report", errors)

    group_names = set(REPORT_GROUPS.values())
    unknown_groups = sorted(set(conflicts) - group_names)
    if unknown_groups:
        errors.append(f"unknown conflict groups {unknown_groups}")
    kind_by_group = {group: kind for kind, group in REPORT_GROUPS.items()}

    records: list[ConflictRecord] = []
    for group in sorted(set(conflicts) & group_names):
        items = conflicts[group]
        if not isinstance(items, list):
            errors.append(f"conflicts.{group} must be a list")
            continue
        for index, item in enumerate(items):
            record, item_errors = _parse_record(item, f"conflicts.{group}[{index}]")
            if item_errors:
                errors.extend(item_errors)
                continue
            assert record is not None
            if record.kind != kind_by_group[group]:
                errors.append(
                    f"conflicts.{group}[{index}] kind {record.kind.value!r} does not match its group"
                )
                continue
            records.append(record)

    notes = data.get("notes", "")
    if not isinstance(notes, str):
        errors.append("notes must be a string")
    if errors:
        raise SchemaValidationError("conflict report", errors)
    return PerceptionDoc(records=tuple(canonical_sort(records)), notes=notes)


_RECORD_KEYS = {"kind", "participants", "subject", "explanation"}


def _parse_record(item: object, path: str) -> tuple[ConflictRecord | None, list[str]]:
    if not isinstance(item, Mapping):
        return None, [f"{path} must be an object"]
    errors = []
    unknown = sorted(set(item) - _RECORD_KEYS)
    if unknown:
        errors.append(f"{path} has unknown keys {unknown}")
    missing = sorted(_RECORD_KEYS - set(item))
    if missing:
        errors.append(f"{path} is missing keys {missing}")
        return None, errors
    try:
        kind = ConflictKind(str(item["kind"]))
    except ValueError:
        return None, errors + [f"{path} has unknown kind {item['kind']!r}"]
    participants = item["participants"]
    if not isinstance(participants, list) or not all(
        isinstance(p, (list, tuple)) and len(p) == 2 and all(isinstance(x, str) for x in p)
        for p in participants
    ):
        return None, errors + [f"{path} participants must be [pipeline_ref, xapp_id] pairs"]
    if len(participants) < 2:
        errors.append(f"{path} needs at least 2 participants")
    if not isinstance(item["subject"], str) or not isinstance(item["explanation"], str):
        errors.append(f"{path} subject and explanation must be strings")
    if errors:
        return None, errors
    return (
        ConflictRecord(
            kind=kind,
            participants=frozenset((str(r), str(x)) for r, x in participants),
            subject=str(item["subject"]),
            explanation=str(item["explanation"]),
        ),
        [],
    )


def parse_refinement_doc(text: str, original: Pipeline) -> RefinementDoc:
    data = _load_json(text, "refinement document")
    if not isinstance(data, Mapping):
        raise SchemaValidationError("refinement document", ["expected a JSON object"])
    errors = []
    allowed = {"revised_policy", "edits"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        errors.append(f"unknown keys {unknown}")
    missing = sorted(allowed - set(data))
    if missing:
        raise SchemaValidationError("refinement document", errors + [f"missing keys {missing}"])

    revised = policy_doc_to_pipeline(data["revised_policy"])

    edits_raw = data["edits"]
    edits: list[tuple[EditKind, str]] = []
    if not isinstance(edits_raw, list):
        errors.append("edits must be a list")
    else:
        for index, item in enumerate(edits_raw):
            if not (isinstance(item, (list, tuple)) and len(item) == 2):
                errors.append(f"edits[{index}] must be an [edit_kind, rationale] pair")
                continue
            kind_raw, rationale = item
            try:
                kind = EditKind(str(kind_raw))
            except ValueError:
                errors.append(f"edits[{index}] has unknown edit kind {kind_raw!r}")
                continue
            if not isinstance(rationale, str):
                errors.append(f"edits[{index}] rationale must be a string")
                continue
            edits.append((kind, rationale))

    changed = pipeline_to_policy_doc(revised) != pipeline_to_policy_doc(original)
    if changed and not edits:
        errors.append("revised policy differs from the input but edits is empty")
    if not changed and edits:
        errors.append("edits listed but the revised policy is unchanged")
    if errors:
        raise SchemaValidationError("refinement document", errors)
    return RefinementDoc(revised=revised, edits=tuple(edits))


def _load_json(text: str, doc_name: str) -> object:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaValidationError(doc_name, [f"response is not valid JSON: {exc}"]) from exc


def dump_doc(data: Mapping[str, object]) -> str:
    """Canonical serialization used by every mock backend."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))
