"""Seeded generators and independent brute-force predicates for testing.

The brute-force functions re-state each conflict class definition directly
and naively; they share no code path with the engine they check.
"""

from __future__ import annotations

import random

from ranweave.conflicts import VendorCompatibilityMatrix
from ranweave.model import Intent, Pipeline, Registry, Stage, XAppProfile

CAP_POOL = ["steering", "sensing", "slicing", "power", "scheduling", "beam"]
PARAM_POOL = ["tx_power", "prb_quota", "weights", "beam_set", "steer_mode"]
KPI_POOL = ["latency", "throughput", "energy", "reliability"]
DIALECT_POOL = ["d-north", "d-south", "d-east", "d-west"]
SETTING_POOL = ["auto", "eco", "turbo"]


def random_registry(rng: random.Random, size: int) -> Registry:
    profiles = []
    for index in range(size):
        profiles.append(
            XAppProfile.build(
                f"x{index:02d}",
                vendor=rng.choice(["acme", "borealis"]),
                dialect=rng.choice(DIALECT_POOL),
                capabilities=rng.sample(CAP_POOL, rng.randint(1, 2)),
                controlled_params=rng.sample(PARAM_POOL, rng.randint(0, 2)),
                kpi_effects={
                    kpi: rng.choice([-1, 0, 1])
                    for kpi in rng.sample(KPI_POOL, rng.randint(0, 3))
                },
                stage=rng.choice(list(Stage)),
            )
        )
    return Registry(profiles, KPI_POOL)


def random_matrix(rng: random.Random) -> VendorCompatibilityMatrix:
    pairs = []
    for a_index in range(len(DIALECT_POOL)):
        for b_index in range(a_index + 1, len(DIALECT_POOL)):
            if rng.random() < 0.3:
                pairs.append((DIALECT_POOL[a_index], DIALECT_POOL[b_index]))
    return VendorCompatibilityMatrix.of(*pairs)


def random_intent(rng: random.Random, intent_id: int | str) -> Intent:
    return Intent.build(
        intent_id,
        f"objective {intent_id}",
        target_kpis={
            kpi: rng.choice([-1, 1]) for kpi in rng.sample(KPI_POOL, rng.randint(1, 2))
        },
        required_capabilities=[rng.choice(CAP_POOL)],
    )


def random_pipeline(
    rng: random.Random, registry: Registry, intent_id: int | str, max_nodes: int = 3
) -> Pipeline:
    """Structurally valid pipeline: unique nodes, stage-consistent forward edges."""
    count = rng.randint(1, min(max_nodes, len(registry)))
    chosen = rng.sample(list(registry.ids), count)
    chosen.sort(key=lambda x: (registry[x].stage, x))
    nodes = []
    for xapp_id in chosen:
        directive = {
            param: rng.choice(SETTING_POOL)
            for param in sorted(registry[xapp_id].controlled_params)
        }
        nodes.append((xapp_id, directive))
    edges = []
    for a_index in range(count):
        for b_index in range(a_index + 1, count):
            if rng.random() < 0.5:
                edges.append((chosen[a_index], chosen[b_index]))
    return Pipeline.build(intent_id, nodes, edges)


def brute_actuator_subjects(a: Pipeline, b: Pipeline) -> set[str]:
    out = set()
    for na in a.nodes:
        for nb in b.nodes:
            if na.xapp_id == nb.xapp_id and dict(na.directive) != dict(nb.directive):
                out.add(na.xapp_id)
    return out


def brute_coupling_subjects(a: Pipeline, b: Pipeline, registry: Registry) -> set[str]:
    out = set()
    for na in a.nodes:
        for nb in b.nodes:
            if na.xapp_id == nb.xapp_id:
                continue
            shared = registry[na.xapp_id].controlled_params & registry[nb.xapp_id].controlled_params
            out.update(shared)
    return out


def brute_interference_subjects(
    a: Pipeline, intent_a: Intent, b: Pipeline, intent_b: Intent, registry: Registry
) -> set[str]:
    out = set()
    kpis = set(intent_a.targets) | set(intent_b.targets)
    for kpi in kpis:
        da = intent_a.targets.get(kpi)
        db = intent_b.targets.get(kpi)
        if da is not None and db is not None and da == -db:
            out.add(kpi)
            continue
        if da is not None and any(
            registry[n.xapp_id].effect_on(kpi) == -da for n in b.nodes
        ):
            out.add(kpi)
            continue
        if db is not None and any(
            registry[n.xapp_id].effect_on(kpi) == -db for n in a.nodes
        ):
            out.add(kpi)
    return out


def brute_vendor_pairs(
    a: Pipeline, b: Pipeline, matrix: VendorCompatibilityMatrix, registry: Registry
) -> set[tuple[str, str]]:
    out = set()
    for na in a.nodes:
        for nb in b.nodes:
            pa, pb = registry[na.xapp_id], registry[nb.xapp_id]
            if not matrix.clashes(pa.dialect, pb.dialect):
                continue
            shared_params = pa.controlled_params & pb.controlled_params
            kpis_a = {k for k, v in pa.kpi_effects if v != 0}
            kpis_b = {k for k, v in pb.kpi_effects if v != 0}
            if shared_params or (kpis_a & kpis_b):
                out.add((na.xapp_id, nb.xapp_id))
    return out


def brute_max_independent_set(vertices: list, edges: set[frozenset]) -> int:
    """Independence number by direct enumeration of all vertex subsets."""
    best = 0
    n = len(vertices)
    for mask in range(1 << n):
        members = [vertices[i] for i in range(n) if mask >> i & 1]
        if any(
            frozenset((u, v)) in edges
            for i, u in enumerate(members)
            for v in members[i + 1 :]
        ):
            continue
        best = max(best, len(members))
    return best
