"""Multi-hop backhaul network formation as staged one-to-many matching.

Stage 1 matches the small base stations inside the macro station's range to
it; every later stage matches still-unserved SBSs to the nodes that were
connected in the previous stage. Within a stage, demanding stations (D-BSs)
propose to anchored stations (A-BSs) by deferred acceptance: a D-BS ranks
in-range A-BSs by the backhaul rate it would actually see (capped by the
A-BS's own upstream rate) minus the cross-operator price it would pay, and
an A-BS ranks applicants by achievable rate plus the revenue it would earn
from a foreign-operator child. After each stage's matching, the sub-channel
allocation for that hop fixes the realized rates that the next stage's
preferences are built on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import allocation as alloc
from .channel import ChannelModel, ChannelRealization, average_rate, expected_interference_w, subchannel_rates_for_link
from .matching import Matching, deferred_acceptance, find_blocking_pairs, matching_from_assignment
from .topology import MBS, Topology, comm_set, cross_mno_indicator, same_mno


@dataclass(frozen=True)
class PricingConfig:
    """Per-sub-channel price each node charges and the per-node weight that
    converts price into rate units when comparing against link rates."""

    unit_price: float | dict[int, float] = 1.0
    kappa: float | dict[int, float] = 0.0

    def price(self, node: int) -> float:
        if isinstance(self.unit_price, dict):
            return float(self.unit_price.get(node, 0.0))
        return float(self.unit_price)

    def weight(self, node: int) -> float:
        if isinstance(self.kappa, dict):
            return float(self.kappa.get(node, 0.0))
        return float(self.kappa)


@dataclass(frozen=True)
class Stage:
    index: int
    a_bs: tuple[int, ...]
    d_bs: tuple[int, ...]


@dataclass
class StageRecord:
    """One stage's matching plus everything needed to re-verify stability."""

    stage: Stage
    dbs_prefs: dict[int, list[int]]
    abs_prefs: dict[int, list[int]]
    dbs_utilities: dict[int, dict[int, float]]
    abs_utilities: dict[int, dict[int, float]]
    quotas: dict[int, int | None]
    matching: Matching
    messages: int


@dataclass
class FormationResult:
    stages: list[StageRecord]
    edges: list[tuple[int, int, int]]  # (parent, child, stage)
    unmatched: set[int]
    parent_of: dict[int, int] = field(default_factory=dict)
    depth: dict[int, int] = field(default_factory=dict)

    @property
    def messages_per_stage(self) -> list[int]:
        return [rec.messages for rec in self.stages]

    def children_of(self, parent: int) -> list[int]:
        return [c for p, c, _ in self.edges if p == parent]

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "edges": [
                    {"parent": p, "child": c, "stage": j} for p, c, j in self.edges
                ],
                "unmatched": sorted(self.unmatched),
                "messages_per_stage": self.messages_per_stage,
            },
            indent=2,
        )


@dataclass
class PipelineResult:
    formation: FormationResult
    allocation: alloc.AllocationResult


def initial_stage(topo: Topology) -> Stage | None:
    d1 = tuple(sorted(comm_set(topo, MBS)))
    if not d1:
        return None
    return Stage(index=1, a_bs=(MBS,), d_bs=d1)


def build_next_stage(
    prev: Stage,
    pi_prev: Matching,
    topo: Topology,
    used_abs: set[int],
    matched: set[int],
) -> Stage | None:
    """Next hop level, or None when no unserved SBS is reachable.

    The next A-BSs are the D-BSs matched in the previous stage (unmatched
    ones have no upstream rate yet, stay plain D-BS candidates, and may
    reappear in later stages). Candidate D-BSs are every in-range node that
    has neither served as an A-BS nor already been matched.
    """
    next_abs = tuple(sorted(pi_prev.assignment.keys()))
    if not next_abs:
        return None
    excluded = used_abs | set(next_abs) | matched
    d_next = sorted(
        {m for a in next_abs for m in comm_set(topo, a)} - excluded
    )
    if not d_next:
        return None
    return Stage(index=prev.index + 1, a_bs=next_abs, d_bs=tuple(d_next))


def dbs_link_utility(
    rbar_bps: float,
    upstream_bps: float,
    topo: Topology,
    dbs: int,
    a_bs: int,
    pricing: PricingConfig,
) -> float:
    """D-BS-side link value: rate capped by the A-BS's upstream, minus the
    weighted cross-operator price. Non-positive values mean the A-BS is not
    acceptable to this D-BS."""
    cost = pricing.weight(dbs) * pricing.price(a_bs) * cross_mno_indicator(topo, dbs, a_bs)
    return min(rbar_bps, upstream_bps) - cost


def abs_link_utility(
    rbar_bps: float, topo: Topology, a_bs: int, dbs: int, pricing: PricingConfig
) -> float:
    """A-BS-side link value: achievable rate plus the revenue earned when
    the child belongs to another operator."""
    revenue = pricing.weight(a_bs) * pricing.price(a_bs) * cross_mno_indicator(topo, a_bs, dbs)
    return rbar_bps + revenue


def _stage_preferences(
    model: ChannelModel,
    topo: Topology,
    real: ChannelRealization,
    stage: Stage,
    upstream: dict[int, float],
    pricing: PricingConfig,
    cooperative: bool,
    cumulative_abs: set[int],
) -> tuple[dict[int, list[int]], dict[int, list[int]], dict, dict]:
    """Both sides' strict preference lists for one stage.

    Rate estimates use the full band and the expected interference from every
    A-BS of this and earlier stages other than the intended transmitter.
    Utility ties break toward the lower node id.
    """
    dbs_utils: dict[int, dict[int, float]] = {}
    abs_utils: dict[int, dict[int, float]] = {a: {} for a in stage.a_bs}
    for d in stage.d_bs:
        in_range = comm_set(topo, d)
        contrib = {
            a: expected_interference_w(model, topo, d, [a]) for a in cumulative_abs if a != d
        }
        total = sum(contrib.values())
        dbs_utils[d] = {}
        for a in stage.a_bs:
            if a not in in_range:
                continue
            if not cooperative and a != MBS and not same_mno(topo, d, a):
                continue
            interference = total - contrib.get(a, 0.0)
            rbar = average_rate(model, topo, real, a, d, interference_w=interference)
            u = dbs_link_utility(rbar, upstream[a], topo, d, a, pricing)
            if u > 0.0:
                dbs_utils[d][a] = u
                abs_utils[a][d] = abs_link_utility(rbar, topo, a, d, pricing)
    dbs_prefs = {
        d: sorted(utils, key=lambda a: (-utils[a], a)) for d, utils in dbs_utils.items()
    }
    abs_prefs = {
        a: sorted(utils, key=lambda d: (-utils[d], d)) for a, utils in abs_utils.items()
    }
    return dbs_prefs, abs_prefs, dbs_utils, abs_utils


def _random_stage_matching(
    stage: Stage, topo: Topology, quotas: dict[int, int | None], rng: np.random.Generator
) -> Matching:
    """Uniform random in-range assignment respecting quotas."""
    room = {a: quotas.get(a) for a in stage.a_bs}
    held: dict[int, int] = {a: 0 for a in stage.a_bs}
    assignment: dict[int, int] = {}
    order = [stage.d_bs[int(i)] for i in rng.permutation(len(stage.d_bs))]
    for d in order:
        candidates = [
            a
            for a in stage.a_bs
            if a in comm_set(topo, d) and (room[a] is None or held[a] < room[a])
        ]
        if not candidates:
            continue
        a = candidates[int(rng.integers(len(candidates)))]
        assignment[d] = a
        held[a] += 1
    return matching_from_assignment(assignment, stage.a_bs, quotas)


def verify_stage_stability(rec: StageRecord) -> list[tuple[int, int]]:
    """Blocking pairs (d_bs, a_bs) of a stage matching; empty means stable."""
    return find_blocking_pairs(rec.matching, rec.dbs_prefs, rec.abs_prefs)


def form_network(
    topo: Topology,
    real: ChannelRealization,
    model: ChannelModel,
    pricing: PricingConfig,
    *,
    quota: int = 5,
    mbs_quota: int | None = None,
    cooperative: bool = True,
    r_th_bps: float = 1e6,
    formation_policy: str = "matching",
    allocation_policy: str = "matching",
    rng: np.random.Generator | None = None,
) -> PipelineResult:
    """Run the full staged pipeline: per hop, match D-BSs to A-BSs, then
    allocate that hop's sub-channels, feeding realized rates forward.

    ``formation_policy`` / ``allocation_policy`` switch each half between the
    matching algorithms ("matching") and the uniform random baseline
    ("random"); random policies require ``rng``. With ``cooperative=False``
    cross-operator pairs are mutually unacceptable (the shared MBS stays
    acceptable to everyone).

    Reported link and end-to-end rates are recomputed at the end from the
    complete allocation with the co-channel transmitters that actually ended
    up active; the in-stage tables (kept on the records) use the expected
    interference the algorithms ranked with.
    """
    if "random" in (formation_policy, allocation_policy) and rng is None:
        raise ValueError("random policies need an rng")

    upstream: dict[int, float] = {MBS: float("inf")}
    min_link: dict[int, float] = {MBS: float("inf")}
    depth: dict[int, int] = {MBS: 0}
    parent_of: dict[int, int] = {}
    used_abs: set[int] = set()
    matched_all: set[int] = set()
    cumulative_abs: set[int] = set()
    stage_records: list[StageRecord] = []
    abs_records: list[alloc.AbsAllocation] = []
    edges: list[tuple[int, int, int]] = []
    assignments: dict[int, list[int | None]] = {}

    stage = initial_stage(topo)
    while stage is not None and stage.index <= topo.n_sbs:
        used_abs |= set(stage.a_bs)
        cumulative_abs |= set(stage.a_bs)
        quotas: dict[int, int | None] = {
            a: (mbs_quota if a == MBS else quota) for a in stage.a_bs
        }

        if formation_policy == "matching":
            dbs_prefs, abs_prefs, dbs_utils, abs_utils = _stage_preferences(
                model, topo, real, stage, upstream, pricing, cooperative, cumulative_abs
            )
            matching, messages = deferred_acceptance(
                list(stage.d_bs), list(stage.a_bs), dbs_prefs, abs_prefs, quotas
            )
        else:
            dbs_prefs, abs_prefs, dbs_utils, abs_utils = {}, {}, {}, {}
            matching = _random_stage_matching(stage, topo, quotas, rng)
            messages = 0
        stage_records.append(
            StageRecord(
                stage=stage,
                dbs_prefs=dbs_prefs,
                abs_prefs=abs_prefs,
                dbs_utilities=dbs_utils,
                abs_utilities=abs_utils,
                quotas=quotas,
                matching=matching,
                messages=messages,
            )
        )

        for a in stage.a_bs:
            children = sorted(matching.held(a))
            if not children:
                continue
            bound = upstream[a] / (len(children) + 1)
            rates: dict[int, np.ndarray] = {}
            revenue: dict[int, float] = {}
            eligible: dict[int, bool] = {}
            for m in children:
                interferers = cumulative_abs - {a}
                interference = expected_interference_w(model, topo, m, interferers)
                rates[m] = subchannel_rates_for_link(
                    model, topo, real, a, m, interference_w=interference
                )
                shared = same_mno(topo, a, m)
                revenue[m] = (
                    0.0 if shared else pricing.weight(a) * pricing.price(a)
                )
                eligible[m] = shared
            if allocation_policy == "matching":
                holder, n_msgs = alloc.match_subchannels(
                    children, rates, bound, revenue, eligible
                )
            else:
                holder, n_msgs = alloc.random_subchannels(children, rates, bound, rng)
            abs_records.append(
                alloc.AbsAllocation(
                    stage=stage.index,
                    a_bs=a,
                    children=children,
                    bound_bps=bound,
                    rates=rates,
                    revenue=revenue,
                    phase2_eligible=eligible,
                    assignment=holder,
                    messages=n_msgs,
                )
            )
            assignments[a] = holder
            for m in children:
                link = float(sum(rates[m][k] for k, c in enumerate(holder) if c == m))
                depth[m] = stage.index
                parent_of[m] = a
                min_link[m] = min(min_link[a], link)
                upstream[m] = min_link[m] / depth[m]
                edges.append((a, m, stage.index))
                matched_all.add(m)

        stage = build_next_stage(stage, matching, topo, used_abs, matched_all)

    link_rate, per_k, e2e = alloc.evaluate_assignment(
        model, topo, real, parent_of, depth, assignments
    )
    violations = [m for m in sorted(parent_of) if e2e[m] < r_th_bps]
    formation = FormationResult(
        stages=stage_records,
        edges=edges,
        unmatched=set(topo.sbs_ids) - matched_all,
        parent_of=parent_of,
        depth=depth,
    )
    allocation_result = alloc.AllocationResult(
        per_abs=abs_records,
        link_rate_bps=link_rate,
        subchannel_rate_bps=per_k,
        end_to_end_bps=e2e,
        rth_violations=violations,
    )
    return PipelineResult(formation=formation, allocation=allocation_result)
