"""The three-role agent loop that turns an intent batch into deployments.

Each iteration runs perception (conflict analysis), reasoning (pipeline
synthesis per intent) and refinement (structural review), then picks the
deployable subset mechanically and scores the whole proposal. A harness-
enforced ratchet keeps the best solution seen so far, so the reported
score never regresses regardless of what the agents emit.

Baseline modes drop individual roles: SA is a single combined prompt, NR
skips refinement, NP skips perception, and FCFS keeps the full synthesis
but deploys greedily in intent order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from itertools import combinations
from typing import Callable, Mapping

from .conflicts import (
    ConflictRecord,
    VendorCompatibilityMatrix,
    build_conflict_graph,
    canonical_sort,
    internal_conflicts,
    pairwise_conflicts,
)
from .memory import MemoryBuffer, OutcomeRecord
from .model import (
    DeploymentState,
    Intent,
    Pipeline,
    Registry,
    pipelines_equal,
    validate_pipeline_structure,
)
from .planner import OracleResult, SolutionScore, intent_sort_key, score_solution
from .retrieval import VectorStore
from .schemas import (
    PerceptionDoc,
    PolicyDoc,
    RefinementDoc,
    SchemaValidationError,
    parse_perception_doc,
    parse_policy_doc,
    parse_refinement_doc,
    pipeline_to_policy_doc,
)
from .transport import (
    PERCEPTION,
    REASONING,
    REFINEMENT,
    AgentRequest,
    ChatTransport,
    TransportError,
)

MAX_ITERATIONS = 50
DEFAULT_ANALOGUES = 3


class Mode(str, Enum):
    F5 = "f5"
    SA = "sa"
    NR = "nr"
    NP = "np"
    FCFS = "fcfs"

    @property
    def uses_perception(self) -> bool:
        return self in (Mode.F5, Mode.NR, Mode.FCFS)

    @property
    def uses_refinement(self) -> bool:
        return self in (Mode.F5, Mode.NP, Mode.FCFS)


class AgentCallError(RuntimeError):
    """An agent call failed even after its single repair re-prompt."""


@dataclass
class RunContext:
    mode: Mode
    intents: tuple[Intent, ...]
    pre: DeploymentState
    registry: Registry
    matrix: VendorCompatibilityMatrix
    intent_catalog: Mapping[int | str, Intent]
    seed: int = 0
    max_iterations: int = MAX_ITERATIONS
    analogue_count: int = DEFAULT_ANALOGUES
    scenario_id: int | str | None = None
    iteration: int = 0


@dataclass(frozen=True)
class Solution:
    """One scored batch proposal, the unit the ratchet compares."""

    candidates: dict[int | str, Pipeline]
    deployed: frozenset[int | str]
    score: SolutionScore


@dataclass
class BatchOutcome:
    best: Solution
    score_history: list[SolutionScore] = field(default_factory=list)
    iterations_to_synthesis: int | None = None
    iterations_to_deployment: int | None = None
    iterations_run: int = 0
    converged: bool = False


def _template(name: str) -> str:
    return resources.files("ranweave").joinpath("prompts", name).read_text(encoding="utf-8")


def _render_profiles(registry: Registry) -> str:
    return json.dumps([p.to_dict() for p in registry], indent=2, sort_keys=True)


def _render_policies(pipelines: Mapping[str, Pipeline]) -> str:
    if not pipelines:
        return "(none)"
    return json.dumps(
        {ref: pipeline_to_policy_doc(p) for ref, p in sorted(pipelines.items())},
        indent=2,
        sort_keys=True,
    )


def _render_chunks(chunks) -> str:
    if not chunks:
        return "(no retrieved context)"
    return "\n".join(f"[{c.doc_id}:{c.start}-{c.end}] {c.text}" for c in chunks)


def _active_policies(ctx: RunContext, candidates: Mapping[int | str, Pipeline]) -> dict[str, Pipeline]:
    active = {f"pre:{p.intent_id}": p for p in ctx.pre}
    active.update({str(intent_id): p for intent_id, p in candidates.items()})
    return active


def assemble_perception_request(
    ctx: RunContext, candidates: Mapping[int | str, Pipeline], chunks
) -> AgentRequest:
    intent_texts = "\n".join(f"- intent {i.id}: {i.text}" for i in ctx.intents)
    user = (
        f"## Service intents\n{intent_texts}\n\n"
        f"## Registered xApps\n{_render_profiles(ctx.registry)}\n\n"
        f"## Active policies\n{_render_policies(_active_policies(ctx, candidates))}\n\n"
        f"## Retrieved context\n{_render_chunks(chunks)}\n"
    )
    return AgentRequest(
        role=PERCEPTION,
        messages=(
            {"role": "system", "content": _template("perception.txt")},
            {"role": "user", "content": user},
        ),
        payload={"candidates": dict(candidates), "pre": ctx.pre, "intents": ctx.intents},
    )


def assemble_reasoning_request(
    ctx: RunContext,
    intent: Intent,
    perception: PerceptionDoc | None,
    analogues,
    candidates: Mapping[int | str, Pipeline],
    chunks,
) -> AgentRequest:
    single_agent = ctx.mode is Mode.SA
    template = _template("single_agent.txt" if single_agent else "reasoning.txt")
    conflict_section = (
        json.dumps(perception.to_dict(), indent=2, sort_keys=True)
        if perception is not None
        else "(no conflict report available)"
    )
    analogue_section = (
        "\n".join(
            f"- intent {past.id} ({past.text}) -> "
            f"{json.dumps(pipeline_to_policy_doc(pipe), sort_keys=True)}"
            for past, pipe in analogues
        )
        or "(no prior successes)"
    )
    others = {ref: p for ref, p in _active_policies(ctx, candidates).items() if ref != str(intent.id)}
    user = (
        f"## Current intent\nintent {intent.id}: {intent.text}\n"
        f"Target KPIs: {json.dumps(intent.targets, sort_keys=True)}\n"
        f"Required capabilities: {sorted(intent.required_capabilities)}\n"
        f"Mandatory xApps: {sorted(intent.required_xapps) or '(none)'}\n\n"
        f"## Registered xApps\n{_render_profiles(ctx.registry)}\n\n"
        f"## Active policies\n{_render_policies(others)}\n\n"
        f"## Conflict report\n{conflict_section}\n\n"
        f"## Past successes for similar intents\n{analogue_section}\n\n"
        f"## Retrieved context\n{_render_chunks(chunks)}\n"
    )
    return AgentRequest(
        role=REASONING,
        messages=(
            {"role": "system", "content": template},
            {"role": "user", "content": user},
        ),
        payload={
            "intent": intent,
            "analogues": tuple(analogues),
            "perception_present": perception is not None,
            "candidates": dict(candidates),
            "pre": ctx.pre,
        },
    )


def assemble_refinement_request(
    ctx: RunContext, intent: Intent, candidate: Pipeline, summary: str,
    candidates: Mapping[int | str, Pipeline],
) -> AgentRequest:
    violations = validate_pipeline_structure(candidate, ctx.registry).violations
    violation_text = "\n".join(f"- {v}" for v in violations) or "(none found)"
    user = (
        f"## Candidate pipeline for intent {intent.id}\n"
        f"{json.dumps(pipeline_to_policy_doc(candidate), indent=2, sort_keys=True)}\n\n"
        f"## Structural violations detected\n{violation_text}\n\n"
        f"## Recurrent failure patterns\n{summary}\n\n"
        f"## Deployment context\n{_render_policies(_active_policies(ctx, candidates))}\n"
    )
    return AgentRequest(
        role=REFINEMENT,
        messages=(
            {"role": "system", "content": _template("refinement.txt")},
            {"role": "user", "content": user},
        ),
        payload={"intent": intent, "candidate": candidate, "summary": summary},
    )


def _call_with_repair(
    transport: ChatTransport, request: AgentRequest, parser: Callable[[str], object]
) -> object:
    """One agent call with at most one schema-repair re-prompt."""
    text = transport.complete(request)
    try:
        return parser(text)
    except SchemaValidationError as first:
        repair = replace(
            request,
            messages=request.messages
            + (
                {"role": "assistant", "content": text},
                {
                    "role": "user",
                    "content": (
                        "The previous response failed schema validation:\n"
                        + "\n".join(f"- {e}" for e in first.errors)
                        + "\nRespond again with only the corrected JSON document."
                    ),
                },
            ),
        )
        text = transport.complete(repair)
        try:
            return parser(text)
        except SchemaValidationError as second:
            raise AgentCallError(
                f"{request.role} response failed validation twice: {'; '.join(second.errors)}"
            ) from second


def run_perception(
    ctx: RunContext,
    transport: ChatTransport,
    candidates: Mapping[int | str, Pipeline],
    chunks=(),
) -> PerceptionDoc:
    if ctx.mode in (Mode.NP, Mode.SA):
        raise ValueError(f"mode {ctx.mode.value} does not run the perception role")
    request = assemble_perception_request(ctx, candidates, chunks)
    return _call_with_repair(transport, request, parse_perception_doc)


def run_reasoning(
    ctx: RunContext,
    intent: Intent,
    transport: ChatTransport,
    perception: PerceptionDoc | None,
    analogues,
    candidates: Mapping[int | str, Pipeline],
    chunks=(),
) -> PolicyDoc:
    request = assemble_reasoning_request(ctx, intent, perception, analogues, candidates, chunks)
    return _call_with_repair(
        transport, request, lambda text: parse_policy_doc(text, ctx.registry)
    )


def run_refinement(
    ctx: RunContext,
    intent: Intent,
    candidate: Pipeline,
    summary: str,
    transport: ChatTransport,
    candidates: Mapping[int | str, Pipeline],
) -> RefinementDoc:
    if not ctx.mode.uses_refinement:
        raise ValueError(f"mode {ctx.mode.value} does not run the refinement role")
    request = assemble_refinement_request(ctx, intent, candidate, summary, candidates)
    return _call_with_repair(
        transport, request, lambda text: parse_refinement_doc(text, candidate)
    )


def is_correct_candidate(pipeline: Pipeline, truth: Pipeline, registry: Registry) -> bool:
    """Structural validity plus reference equality.

    Equality alone is not enough: a duplicated node collapses to the same
    node set as the reference, so only structurally valid candidates may
    count as correct.
    """
    return validate_pipeline_structure(pipeline, registry).ok and pipelines_equal(pipeline, truth)


def enforce_monotonicity(previous_best: Solution | None, candidate: Solution) -> Solution:
    """Keep the candidate only when it is at least as good as the best so far.

    Applied mechanically by the harness; equal scores admit the candidate so
    lateral moves of equal quality stay possible.
    """
    if previous_best is None or candidate.score >= previous_best.score:
        return candidate
    return previous_best


def _select_deployment(
    ctx: RunContext,
    eligible: dict[int | str, Pipeline],
    truths: Mapping[int | str, Pipeline],
) -> frozenset[int | str]:
    """Pick the deployed subset for this iteration's candidates.

    Pairwise compatibility is evaluated once; the subset search itself then
    runs over precomputed clash sets.
    """
    ids = sorted(eligible, key=intent_sort_key)
    deployable = [
        intent_id
        for intent_id in ids
        if not internal_conflicts(eligible[intent_id], ctx.matrix, ctx.registry)
        and not any(
            pairwise_conflicts(eligible[intent_id], p, ctx.intent_catalog, ctx.matrix, ctx.registry)
            for p in ctx.pre
        )
    ]
    clash: dict[int | str, set[int | str]] = {i: set() for i in deployable}
    for a, b in combinations(deployable, 2):
        if pairwise_conflicts(eligible[a], eligible[b], ctx.intent_catalog, ctx.matrix, ctx.registry):
            clash[a].add(b)
            clash[b].add(a)

    if ctx.mode is Mode.FCFS:
        deployed: list[int | str] = []
        for intent_id in deployable:
            if not clash[intent_id] & set(deployed):
                deployed.append(intent_id)
        return frozenset(deployed)

    def correct_count(subset: tuple) -> int:
        return sum(
            1
            for i in subset
            if i in truths and pipelines_equal(eligible[i], truths[i])
        )

    best: tuple[int, int, tuple, frozenset] | None = None
    for size in range(len(deployable), -1, -1):
        for combo in combinations(deployable, size):
            chosen = set(combo)
            if any(clash[i] & chosen for i in combo):
                continue
            entry = (correct_count(combo), size, tuple(str(i) for i in combo), frozenset(combo))
            if (
                best is None
                or (entry[0], entry[1]) > (best[0], best[1])
                or ((entry[0], entry[1]) == (best[0], best[1]) and entry[2] < best[2])
            ):
                best = entry
    return best[3] if best is not None else frozenset()


def _conflict_records_for_iteration(
    ctx: RunContext, candidates: Mapping[int | str, Pipeline]
) -> list[ConflictRecord]:
    structurally_valid = {
        i: p
        for i, p in candidates.items()
        if validate_pipeline_structure(p, ctx.registry).ok
    }
    graph = build_conflict_graph(
        structurally_valid, ctx.pre, ctx.intent_catalog, ctx.matrix, ctx.registry
    )
    records = graph.all_records()
    for intent_id in sorted(structurally_valid, key=intent_sort_key):
        records += internal_conflicts(
            structurally_valid[intent_id], ctx.matrix, ctx.registry, ref=str(intent_id)
        )
    return canonical_sort(records)


def orchestrate_batch(
    ctx: RunContext,
    transport: ChatTransport,
    memory: MemoryBuffer,
    store: VectorStore | None,
    oracle: OracleResult,
) -> BatchOutcome:
    """Run the bounded iteration loop for one intent batch.

    Per-intent agent calls are issued sequentially in ascending intent-id
    order (the merge order required for determinism); callers may override
    the transport with a thread-safe one and parallelize externally if
    desired, the merge point stays sequential.
    """
    memory.clear()
    truths = oracle.per_intent_truth
    objective = oracle.objective_value
    candidates: dict[int | str, Pipeline] = {}
    best: Solution | None = None
    outcome = BatchOutcome(best=Solution({}, frozenset(), SolutionScore(0, 0, 0, 0)))

    query_text = " ".join(i.text for i in ctx.intents) + " " + " ".join(ctx.registry.ids)

    for iteration in range(1, ctx.max_iterations + 1):
        ctx.iteration = iteration
        chunks = store.query(query_text, iteration) if store is not None and len(store) else ()

        perception_doc: PerceptionDoc | None = None
        iteration_aborted = False
        if ctx.mode.uses_perception:
            try:
                perception_doc = run_perception(ctx, transport, candidates, chunks)
            except (AgentCallError, TransportError):
                iteration_aborted = True

        attempted: dict[int | str, Pipeline] = {}
        if not iteration_aborted:
            for intent in sorted(ctx.intents, key=lambda i: intent_sort_key(i.id)):
                analogues = memory.retrieve_analogues(intent, ctx.analogue_count)
                try:
                    policy = run_reasoning(
                        ctx, intent, transport, perception_doc, analogues, candidates, chunks
                    )
                except (AgentCallError, TransportError):
                    continue
                candidate = policy.pipeline
                if ctx.mode.uses_refinement:
                    summary = memory.failure_summary(intent)
                    try:
                        refined = run_refinement(
                            ctx, intent, candidate, summary, transport, candidates
                        )
                        candidate = refined.revised
                    except (AgentCallError, TransportError):
                        pass
                attempted[intent.id] = candidate
                candidates[intent.id] = candidate

        eligible = {
            i: p
            for i, p in candidates.items()
            if validate_pipeline_structure(p, ctx.registry).ok
        }
        deployed = _select_deployment(ctx, eligible, truths)
        records = _conflict_records_for_iteration(ctx, candidates)
        score = score_solution(candidates, deployed, truths, len(records))
        current = Solution(candidates=dict(candidates), deployed=deployed, score=score)
        best = enforce_monotonicity(best, current)
        outcome.score_history.append(best.score)

        for intent in sorted(ctx.intents, key=lambda i: intent_sort_key(i.id)):
            if intent.id not in attempted:
                continue
            pipeline = attempted[intent.id]
            own = [r for r in records if str(intent.id) in r.refs()]
            memory.add(
                intent,
                pipeline,
                OutcomeRecord(
                    deployed=intent.id in deployed,
                    correct=intent.id in truths
                    and is_correct_candidate(pipeline, truths[intent.id], ctx.registry),
                    conflicts=tuple(own),
                    iteration=iteration,
                    score=score,
                ),
            )

        all_correct = len(candidates) == len(ctx.intents) and all(
            is_correct_candidate(candidates[i.id], truths[i.id], ctx.registry)
            for i in ctx.intents
        )
        if all_correct and outcome.iterations_to_synthesis is None:
            outcome.iterations_to_synthesis = iteration
        if score.correct_deployed >= objective and outcome.iterations_to_deployment is None:
            outcome.iterations_to_deployment = iteration

        outcome.iterations_run = iteration
        if all_correct and score.correct_deployed >= objective:
            outcome.converged = True
            break

    outcome.best = best if best is not None else outcome.best
    return outcome
