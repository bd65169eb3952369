"""Scenario fixtures, baseline execution and metric reporting.

The bundled fixture catalog describes 14 registered xApps, 7 service
intents and 4 orchestration scenarios of increasing complexity. Each run
seeds the deployment state with the reference pipelines of the scenario's
pre-deployed intents, clears the memory buffer and drives the iteration
loop, producing a RunReport whose metrics are normalized against the
exact planner.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .agents import (
    DEFAULT_ANALOGUES,
    MAX_ITERATIONS,
    BatchOutcome,
    Mode,
    RunContext,
    orchestrate_batch,
)
from .conflicts import VendorCompatibilityMatrix
from .memory import MemoryBuffer
from .model import DeploymentState, Intent, Pipeline, Registry
from .planner import OracleResult, max_conflict_free_subset, synthesize_ground_truth
from .retrieval import VectorStore
from .transport import ChatTransport, HttpChatTransport, MockBundle, NoisyTransport, OracleTransport

EXPECTED_XAPPS = 14
EXPECTED_INTENTS = 7
EXPECTED_SCENARIOS = 4

# Scenario compositions are part of the fixture contract.
SCENARIO_LAYOUT = {
    1: ((3, 4), (2,)),
    2: ((1, 2, 7), (5,)),
    3: ((2, 4, 5, 6), (3, 7)),
    4: ((1, 2, 3, 4, 5, 6, 7), ()),
}


class FixtureError(ValueError):
    def __init__(self, source: str, message: str):
        super().__init__(f"{source}: {message}")
        self.source = source


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    new_intents: tuple[int, ...]
    pre_deployed_intents: tuple[int, ...]

    def __post_init__(self) -> None:
        overlap = set(self.new_intents) & set(self.pre_deployed_intents)
        if overlap:
            raise FixtureError(
                "scenarios", f"scenario {self.id}: intents {sorted(overlap)} are both new and pre-deployed"
            )
        bad = [i for i in self.new_intents + self.pre_deployed_intents if not 1 <= i <= 7]
        if bad:
            raise FixtureError("scenarios", f"scenario {self.id}: intent ids {bad} out of range 1..7")


@dataclass(frozen=True)
class FixtureBundle:
    registry: Registry
    intents: dict[int, Intent]
    scenarios: dict[int, ScenarioSpec]
    matrix: VendorCompatibilityMatrix
    knowledge_dir: Path


@dataclass
class RunReport:
    scenario_id: int
    mode: str
    generation_accuracy: float
    deployment_success: float
    iterations_to_synthesis: int
    iterations_to_deployment: int
    converged: bool
    seed: int
    transport: str
    score_history: list[tuple[int, int, int, int]] = field(default_factory=list)

    CSV_FIELDS = (
        "scenario_id",
        "mode",
        "generation_accuracy",
        "deployment_success",
        "iterations_to_synthesis",
        "iterations_to_deployment",
        "converged",
        "seed",
        "transport",
    )

    def to_dict(self) -> dict[str, object]:
        data: dict[str, object] = {name: getattr(self, name) for name in self.CSV_FIELDS}
        data["score_history"] = [list(s) for s in self.score_history]
        return data


def _fixture_root(path: str | Path | None) -> Path:
    if path is not None:
        return Path(path)
    return Path(str(resources.files("ranweave"))) / "fixtures"


def load_fixtures(path: str | Path | None = None) -> FixtureBundle:
    """Load and cross-validate the fixture catalog.

    Violations surface as FixtureError naming the offending file and field.
    """
    root = _fixture_root(path)

    profiles = [_load_profile(entry) for entry in _read_json(root, "xapps.json")]
    if len(profiles) != EXPECTED_XAPPS:
        raise FixtureError("xapps.json", f"expected {EXPECTED_XAPPS} profiles, found {len(profiles)}")

    intents_raw = _read_json(root, "intents.json")
    intents: dict[int, Intent] = {}
    for entry in intents_raw:
        intent = _load_intent(entry)
        if intent.id in intents:
            raise FixtureError("intents.json", f"duplicate intent id {intent.id}")
        intents[int(intent.id)] = intent
    if len(intents) != EXPECTED_INTENTS or set(intents) != set(range(1, 8)):
        raise FixtureError("intents.json", f"expected intent ids 1..7, found {sorted(intents)}")

    kpi_catalog = {kpi for intent in intents.values() for kpi in intent.targets}
    registry = Registry(profiles, kpi_catalog)

    matrix_raw = _read_json(root, "vendor_matrix.json")
    try:
        matrix = VendorCompatibilityMatrix.from_dict(matrix_raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError("vendor_matrix.json", str(exc)) from exc

    scenarios: dict[int, ScenarioSpec] = {}
    for entry in _read_json(root, "scenarios.json"):
        spec = ScenarioSpec(
            id=int(entry["id"]),
            new_intents=tuple(int(i) for i in entry["new_intents"]),
            pre_deployed_intents=tuple(int(i) for i in entry["pre_deployed_intents"]),
        )
        scenarios[spec.id] = spec
    if len(scenarios) != EXPECTED_SCENARIOS:
        raise FixtureError("scenarios.json", f"expected {EXPECTED_SCENARIOS} scenarios, found {len(scenarios)}")
    for scenario_id, (new, pre) in SCENARIO_LAYOUT.items():
        spec = scenarios.get(scenario_id)
        if spec is None:
            raise FixtureError("scenarios.json", f"scenario {scenario_id} missing")
        if tuple(sorted(spec.new_intents)) != new or tuple(sorted(spec.pre_deployed_intents)) != pre:
            raise FixtureError(
                "scenarios.json",
                f"scenario {scenario_id} must arrive as new={list(new)} pre={list(pre)}",
            )

    for intent in intents.values():
        unknown = {c for c in intent.required_capabilities} - {
            cap for p in registry for cap in p.capabilities
        }
        if unknown:
            raise FixtureError(
                "intents.json", f"intent {intent.id} requires unknown capabilities {sorted(unknown)}"
            )
        missing = intent.required_xapps - set(registry.ids)
        if missing:
            raise FixtureError(
                "intents.json", f"intent {intent.id} mandates unregistered xApps {sorted(missing)}"
            )

    return FixtureBundle(
        registry=registry,
        intents=intents,
        scenarios=scenarios,
        matrix=matrix,
        knowledge_dir=root / "knowledge",
    )


def _read_json(root: Path, name: str):
    file = root / name
    if not file.exists():
        raise FixtureError(name, "fixture file missing")
    try:
        return json.loads(file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FixtureError(name, f"invalid JSON: {exc}") from exc


def _load_profile(entry: Mapping[str, object]):
    from .model import XAppProfile

    try:
        return XAppProfile.from_dict(entry)
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError("xapps.json", f"profile {entry.get('id', '?')!r}: {exc}") from exc


def _load_intent(entry: Mapping[str, object]) -> Intent:
    try:
        return Intent.from_dict(entry)
    except (KeyError, TypeError, ValueError) as exc:
        raise FixtureError("intents.json", f"intent {entry.get('id', '?')!r}: {exc}") from exc


def ground_truths(bundle: FixtureBundle) -> dict[int, Pipeline]:
    return {
        intent_id: synthesize_ground_truth(intent, bundle.registry, bundle.matrix)
        for intent_id, intent in sorted(bundle.intents.items())
    }


def scenario_oracle(bundle: FixtureBundle, scenario: ScenarioSpec) -> OracleResult:
    """Reference answer for one scenario: truths plus the deployable maximum."""
    truths = ground_truths(bundle)
    pre = DeploymentState(tuple(truths[i] for i in scenario.pre_deployed_intents))
    candidates = {i: truths[i] for i in scenario.new_intents}
    return max_conflict_free_subset(
        candidates, pre, bundle.intents, bundle.matrix, bundle.registry, truths=candidates
    )


def validate_fixture_soundness(bundle: FixtureBundle) -> list[str]:
    """Authoring gate: every scenario must admit a conflict-free reference deployment."""
    problems = []
    truths = ground_truths(bundle)
    for scenario in bundle.scenarios.values():
        result = scenario_oracle(bundle, scenario)
        expected = set(scenario.new_intents)
        if set(result.max_subset) != expected:
            problems.append(
                f"scenario {scenario.id}: reference objective covers {sorted(result.max_subset)} "
                f"instead of all of {sorted(expected)}"
            )
        member_ids = list(scenario.new_intents) + list(scenario.pre_deployed_intents)
        from .conflicts import pairwise_conflicts

        for index, a in enumerate(member_ids):
            for b in member_ids[index + 1 :]:
                records = pairwise_conflicts(
                    truths[a], truths[b], bundle.intents, bundle.matrix, bundle.registry
                )
                if records:
                    problems.append(
                        f"scenario {scenario.id}: reference pipelines {a} and {b} conflict: "
                        + "; ".join(r.subject for r in records)
                    )
    return problems


def build_knowledge_store(bundle: FixtureBundle) -> VectorStore:
    store = VectorStore()
    if bundle.knowledge_dir.is_dir():
        store.add_directory(bundle.knowledge_dir)
    return store


def make_transport(kind: str, bundle: FixtureBundle, seed: int = 0) -> ChatTransport:
    if kind in ("mock-oracle", "mock_oracle"):
        return OracleTransport(_mock_bundle(bundle))
    if kind in ("mock-noisy", "mock_noisy"):
        return NoisyTransport(_mock_bundle(bundle), seed)
    if kind == "http":
        return HttpChatTransport()
    raise ValueError(f"unknown transport {kind!r}; expected http, mock-oracle or mock-noisy")


def _mock_bundle(bundle: FixtureBundle) -> MockBundle:
    return MockBundle(
        registry=bundle.registry,
        intents=bundle.intents,
        matrix=bundle.matrix,
        truths=ground_truths(bundle),
    )


def run_scenario(
    bundle: FixtureBundle,
    scenario: ScenarioSpec | int,
    mode: Mode | str,
    transport: ChatTransport | str,
    seed: int = 0,
    max_iterations: int = MAX_ITERATIONS,
    analogue_count: int = DEFAULT_ANALOGUES,
    store: VectorStore | None = None,
    memory: MemoryBuffer | None = None,
) -> RunReport:
    """Execute one (scenario, mode, transport, seed) run and report metrics."""
    spec = bundle.scenarios[scenario] if isinstance(scenario, int) else scenario
    run_mode = Mode(mode) if isinstance(mode, str) else mode
    chat = make_transport(transport, bundle, seed) if isinstance(transport, str) else transport

    truths = ground_truths(bundle)
    pre = DeploymentState(tuple(truths[i] for i in spec.pre_deployed_intents))
    oracle = scenario_oracle(bundle, spec)
    memory = memory if memory is not None else MemoryBuffer()
    store = store if store is not None else build_knowledge_store(bundle)

    ctx = RunContext(
        mode=run_mode,
        intents=tuple(bundle.intents[i] for i in spec.new_intents),
        pre=pre,
        registry=bundle.registry,
        matrix=bundle.matrix,
        intent_catalog=bundle.intents,
        seed=seed,
        max_iterations=max_iterations,
        analogue_count=analogue_count,
        scenario_id=spec.id,
    )
    outcome = orchestrate_batch(ctx, chat, memory, store, oracle)
    return _report_from_outcome(
        spec, run_mode, chat, seed, oracle, outcome, truths, max_iterations, bundle.registry
    )


def _report_from_outcome(
    spec: ScenarioSpec,
    mode: Mode,
    transport: ChatTransport,
    seed: int,
    oracle: OracleResult,
    outcome: BatchOutcome,
    truths: Mapping[int, Pipeline],
    max_iterations: int,
    registry: Registry,
) -> RunReport:
    from .agents import is_correct_candidate

    best = outcome.best
    total = len(spec.new_intents)
    correct_final = sum(
        1
        for intent_id in spec.new_intents
        if intent_id in best.candidates
        and is_correct_candidate(best.candidates[intent_id], truths[intent_id], registry)
    )
    objective = oracle.objective_value
    return RunReport(
        scenario_id=spec.id,
        mode=mode.value,
        generation_accuracy=correct_final / total if total else 1.0,
        deployment_success=(best.score.correct_deployed / objective) if objective else 1.0,
        iterations_to_synthesis=outcome.iterations_to_synthesis or max_iterations,
        iterations_to_deployment=outcome.iterations_to_deployment or max_iterations,
        converged=outcome.converged,
        seed=seed,
        transport=transport.describe(),
        score_history=[s.as_tuple() for s in outcome.score_history],
    )


def compare_modes(
    bundle: FixtureBundle,
    scenario: ScenarioSpec | int,
    modes: Sequence[Mode | str],
    transport_kind: str,
    seeds: Sequence[int],
) -> list[dict[str, object]]:
    """Per-mode mean/min/max of every metric over the given seeds."""
    if not seeds:
        raise ValueError("at least one seed is required")
    rows = []
    for mode in modes:
        reports = [
            run_scenario(bundle, scenario, mode, transport_kind, seed=seed) for seed in seeds
        ]
        row: dict[str, object] = {
            "scenario_id": reports[0].scenario_id,
            "mode": Mode(mode).value if isinstance(mode, str) else mode.value,
            "runs": len(reports),
            "converged_runs": sum(1 for r in reports if r.converged),
        }
        for metric in (
            "generation_accuracy",
            "deployment_success",
            "iterations_to_synthesis",
            "iterations_to_deployment",
        ):
            values = [getattr(r, metric) for r in reports]
            row[f"{metric}_mean"] = sum(values) / len(values)
            row[f"{metric}_min"] = min(values)
            row[f"{metric}_max"] = max(values)
        rows.append(row)
    return rows


def emit_report(reports: Iterable[RunReport], format: str, path: str | Path) -> Path:
    """Write reports as a JSON array or a fixed-header CSV."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to emit")
    target = Path(path)
    if format == "json":
        target.write_text(
            json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    elif format == "csv":
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=RunReport.CSV_FIELDS)
        writer.writeheader()
        for report in reports:
            writer.writerow({name: getattr(report, name) for name in RunReport.CSV_FIELDS})
        target.write_text(buffer.getvalue(), encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {format!r}; expected json or csv")
    return target
