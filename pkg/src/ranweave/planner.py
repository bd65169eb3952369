"""Exact reference algorithms for pipeline synthesis and deployment.

Everything here is exhaustive and deterministic: ground-truth pipelines are
minimum-size capability covers over the registry, and the deployable set is
found by full subset enumeration (the candidate count stays small enough
that exactness is cheap). These outputs are the yardstick the iterative
agents are measured against.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

from .conflicts import (
    VendorCompatibilityMatrix,
    internal_conflicts,
    pairwise_conflicts,
)
from .model import (
    DeploymentState,
    Intent,
    Pipeline,
    Registry,
    pipelines_equal,
)

MAX_SUBSET_CANDIDATES = 12

DEFAULT_DIRECTIVE_SETTING = "auto"


class InfeasibleIntentError(ValueError):
    """No xApp subset in the registry can cover the intent."""


@dataclass(frozen=True, slots=True, order=True)
class SolutionScore:
    """Lexicographic quality of a proposed batch solution.

    Field order is comparison order: correctly deployed pipelines first,
    then deployment count, then fewer conflicts, then smaller pipelines.
    """

    correct_deployed: int
    deployed: int
    neg_conflicts: int
    neg_total_nodes: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.correct_deployed, self.deployed, self.neg_conflicts, self.neg_total_nodes)


@dataclass(frozen=True)
class OracleResult:
    """Reference answer for one intent batch."""

    per_intent_truth: dict[int | str, Pipeline]
    max_subset: frozenset[int | str]
    objective_value: int

    def to_dict(self) -> dict[str, object]:
        from .schemas import pipeline_to_policy_doc

        return {
            "per_intent_truth": {
                str(intent_id): pipeline_to_policy_doc(p)
                for intent_id, p in sorted(self.per_intent_truth.items(), key=lambda kv: str(kv[0]))
            },
            "max_subset": sorted(self.max_subset, key=intent_sort_key),
            "objective_value": self.objective_value,
        }


def default_directive(profile) -> dict[str, str]:
    """Reference setting for every parameter an xApp controls.

    Settings are symbolic; the reference policy always requests the managed
    default, so two intents reusing one xApp agree byte-for-byte.
    """
    return {param: DEFAULT_DIRECTIVE_SETTING for param in sorted(profile.controlled_params)}


def synthesize_ground_truth(
    intent: Intent,
    registry: Registry,
    matrix: VendorCompatibilityMatrix,
    max_len: int = 5,
) -> Pipeline:
    """Minimum-size, internally conflict-free pipeline fulfilling an intent.

    Exhaustively enumerates xApp subsets up to max_len, keeps those that
    contain the intent's mandatory xApps and cover its required
    capabilities, wires each as a stage-sorted chain, and returns the
    smallest survivor (ties by ascending node-id sequence).
    """
    if max_len < 1 or max_len > 5:
        raise ValueError("max_len must be between 1 and 5")
    pool = registry.ids
    missing = intent.required_xapps - set(pool)
    if missing:
        raise InfeasibleIntentError(
            f"intent {intent.id!r} mandates unregistered xApps {sorted(missing)}"
        )

    for size in range(max(1, len(intent.required_xapps)), max_len + 1):
        feasible: list[tuple[tuple[str, ...], Pipeline]] = []
        for combo in combinations(pool, size):
            chosen = set(combo)
            if not intent.required_xapps <= chosen:
                continue
            covered = set()
            for xapp_id in combo:
                covered |= registry[xapp_id].capabilities
            if not intent.required_capabilities <= covered:
                continue
            pipeline = _chain_pipeline(intent.id, combo, registry)
            if internal_conflicts(pipeline, matrix, registry):
                continue
            feasible.append((tuple(sorted(combo)), pipeline))
        if feasible:
            feasible.sort(key=lambda item: item[0])
            return feasible[0][1]

    raise InfeasibleIntentError(
        f"no xApp subset of size <= {max_len} covers capabilities "
        f"{sorted(intent.required_capabilities)} for intent {intent.id!r}"
    )


def _chain_pipeline(intent_id: int | str, xapp_ids: Iterable[str], registry: Registry) -> Pipeline:
    ordered = sorted(xapp_ids, key=lambda x: (registry[x].stage, x))
    nodes = [(x, default_directive(registry[x])) for x in ordered]
    edges = [(ordered[i], ordered[i + 1]) for i in range(len(ordered) - 1)]
    return Pipeline.build(intent_id, nodes, edges)


def intent_sort_key(intent_id: int | str) -> tuple[int, str]:
    """Stable ordering for mixed int/str intent ids (ints first, numerically)."""
    return (0, f"{intent_id:012d}") if isinstance(intent_id, int) else (1, str(intent_id))




def max_conflict_free_subset(
    candidates: Mapping[int | str, Pipeline],
    pre: DeploymentState,
    intents: Mapping[int | str, Intent],
    matrix: VendorCompatibilityMatrix,
    registry: Registry,
    truths: Mapping[int | str, Pipeline] | None = None,
) -> OracleResult:
    """Largest candidate subset deployable together with the active set.

    Exhaustive over all 2^n subsets. Ties go first to the subset with more
    pipelines matching their reference truth, then to the lexicographically
    smallest sorted intent-id sequence. The empty subset is always feasible.
    """
    ids = sorted(candidates, key=intent_sort_key)
    if len(ids) > MAX_SUBSET_CANDIDATES:
        raise ValueError(f"subset enumeration is bounded at {MAX_SUBSET_CANDIDATES} candidates")

    usable = {
        intent_id
        for intent_id in ids
        if not internal_conflicts(candidates[intent_id], matrix, registry)
        and not _conflicts_with_pre(candidates[intent_id], pre, intents, matrix, registry)
    }
    clash: dict[int | str, set[int | str]] = {intent_id: set() for intent_id in ids}
    ordered_usable = [i for i in ids if i in usable]
    for a, b in combinations(ordered_usable, 2):
        if pairwise_conflicts(candidates[a], candidates[b], intents, matrix, registry):
            clash[a].add(b)
            clash[b].add(a)

    def correct_count(subset: tuple[int | str, ...]) -> int:
        if truths is None:
            return len(subset)
        return sum(
            1
            for intent_id in subset
            if intent_id in truths and pipelines_equal(candidates[intent_id], truths[intent_id])
        )

    best: tuple[int, int, tuple, frozenset] | None = None
    for size in range(len(ordered_usable), -1, -1):
        for combo in combinations(ordered_usable, size):
            chosen = set(combo)
            if any(clash[i] & chosen for i in combo):
                continue
            key_seq = tuple(intent_sort_key(i) for i in combo)
            entry = (size, correct_count(combo), key_seq, frozenset(combo))
            if best is None or (entry[0], entry[1]) > (best[0], best[1]) or (
                (entry[0], entry[1]) == (best[0], best[1]) and entry[2] < best[2]
            ):
                best = entry
        if best is not None and best[0] == size:
            # No smaller subset can beat a found one on the size field.
            break

    subset = best[3] if best is not None else frozenset()
    return OracleResult(
        per_intent_truth=dict(candidates),
        max_subset=subset,
        objective_value=len(subset),
    )


def _conflicts_with_pre(
    pipeline: Pipeline,
    pre: DeploymentState,
    intents: Mapping[int | str, Intent],
    matrix: VendorCompatibilityMatrix,
    registry: Registry,
) -> bool:
    for deployed in pre:
        if pairwise_conflicts(pipeline, deployed, intents, matrix, registry):
            return True
    return False


def score_solution(
    proposed: Mapping[int | str, Pipeline],
    deployed: Iterable[int | str],
    truths: Mapping[int | str, Pipeline],
    conflict_total: int,
) -> SolutionScore:
    """Score a batch proposal for the monotonic-improvement ratchet."""
    deployed_set = set(deployed)
    unknown = deployed_set - set(proposed)
    if unknown:
        raise ValueError(f"deployed intents {sorted(unknown, key=intent_sort_key)} are not in the proposal")
    correct_deployed = sum(
        1
        for intent_id in deployed_set
        if intent_id in truths and pipelines_equal(proposed[intent_id], truths[intent_id])
    )
    return SolutionScore(
        correct_deployed=correct_deployed,
        deployed=len(deployed_set),
        neg_conflicts=-conflict_total,
        neg_total_nodes=-sum(p.size() for p in proposed.values()),
    )
