"""Reference schemes: exhaustive optimum, non-cooperative, random.

The exhaustive search is the ground-truth oracle for small instances: it
enumerates every macro-rooted forest that respects communication range,
quotas, single-parent, and directionality, and for each forest every
per-A-BS sub-channel assignment (each sub-channel serves at most one child),
scoring candidates with the same full-interference end-to-end evaluator the
simulator reports with. The fair-share headroom rule is a preference device
of the distributed algorithm, not a feasibility cut, so the oracle does not
impose it; imposing it could push the "optimum" below the heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .allocation import evaluate_assignment
from .channel import LN2, ChannelModel, ChannelRealization, realized_link_gain
from .formation import PipelineResult, PricingConfig, form_network
from .topology import MBS, Topology, comm_set


@dataclass(frozen=True)
class SearchLimits:
    max_sbs: int = 8
    max_subchannels: int = 5


class InstanceTooLargeError(ValueError):
    pass


@dataclass
class OptimalResult:
    parent_of: dict[int, int]
    depth: dict[int, int]
    assignments: dict[int, list[int | None]]
    end_to_end_bps: dict[int, float]
    sum_rate_bps: float
    n_formations: int
    n_leaves: int


def cooperative(topo, real, model, pricing, **kwargs) -> PipelineResult:
    return form_network(topo, real, model, pricing, cooperative=True, **kwargs)


def non_cooperative(topo, real, model, pricing, **kwargs) -> PipelineResult:
    """Same pipeline with inter-operator links disabled; only the shared MBS
    may serve foreign SBSs' children... (it serves everyone)."""
    return form_network(topo, real, model, pricing, cooperative=False, **kwargs)


def random_baseline(topo, real, model, pricing, seed: int, **kwargs) -> PipelineResult:
    """Random in-range parent choice and random sub-channel assignment,
    subject to the same structural constraints and headroom rule."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBA5E]))
    return form_network(
        topo,
        real,
        model,
        pricing,
        formation_policy="random",
        allocation_policy="random",
        rng=rng,
        **kwargs,
    )


def _enumerate_forests(
    topo: Topology, quota: int, mbs_quota: int | None
) -> list[tuple[dict[int, int], dict[int, int]]]:
    """All (parent_of, depth) forests rooted at the MBS.

    Generated level by level, so each forest appears exactly once: depth-L
    nodes may only parent depth-(L+1) children, which is exactly the shape
    the cycle/directionality constraints allow.
    """
    neighbors = {m: comm_set(topo, m) for m in range(topo.n_nodes)}
    results: list[tuple[dict[int, int], dict[int, int]]] = []

    def expand(level: list[int], unattached: list[int], parent_of, depth, room):
        candidates = {m: [a for a in level if a in neighbors[m]] for m in unattached}
        eligible = [m for m in unattached if candidates[m]]

        def assign(ix: int, chosen: dict[int, int]):
            if ix == len(eligible):
                if not chosen:
                    # Skip forests that could still grow at this frontier:
                    # attaching one more node never lowers the optimum (its
                    # sub-channels may simply stay unassigned), so only
                    # frontier-maximal forests need scoring.
                    extendable = any(
                        any(room[a] is None or room[a] > 0 for a in candidates[m])
                        for m in unattached
                    )
                    if not extendable:
                        results.append((dict(parent_of), dict(depth)))
                    return
                new_level = sorted(chosen)
                for m, a in chosen.items():
                    parent_of[m] = a
                    depth[m] = depth[a] + 1
                expand(
                    new_level,
                    [m for m in unattached if m not in chosen],
                    parent_of,
                    depth,
                    room,
                )
                for m in chosen:
                    del parent_of[m]
                    del depth[m]
                return
            m = eligible[ix]
            assign(ix + 1, chosen)  # m does not attach at this level
            for a in candidates[m]:
                if room[a] is None or room[a] > 0:
                    if room[a] is not None:
                        room[a] -= 1
                    chosen[m] = a
                    assign(ix + 1, chosen)
                    del chosen[m]
                    if room[a] is not None:
                        room[a] += 1

        assign(0, {})

    room: dict[int, int | None] = {MBS: mbs_quota}
    for m in topo.sbs_ids:
        room[m] = quota
    expand([MBS], list(topo.sbs_ids), {}, {MBS: 0}, room)
    return results


def _search_allocations(
    model: ChannelModel,
    topo: Topology,
    real: ChannelRealization,
    parent_of: dict[int, int],
    depth: dict[int, int],
    best_value: float,
) -> tuple[float, dict[int, list[int | None]] | None, int]:
    """Branch-and-bound over joint sub-channel assignments of one forest.

    Prunes with an optimistic bound that scores already-assigned A-BSs with
    the interference accumulated so far (a superset only lowers rates) and
    unassigned ones at their interference-free full-band rate.
    """
    n_sub = model.radio.n_subchannels
    w = model.radio.subchannel_bw_hz
    noise = model.radio.noise_w
    children: dict[int, list[int]] = {}
    for c, p in parent_of.items():
        children.setdefault(p, []).append(c)
    abs_order = sorted(children, key=lambda a: depth[a])
    all_children = sorted(parent_of)

    desired = {}
    interf = {}
    ub_edge = {}
    for a in abs_order:
        p_k = model.radio.subchannel_power_w(a)
        for m in all_children:
            if m == a:
                continue
            gain = realized_link_gain(model, topo, real, a, m)
            if parent_of[m] == a:
                desired[(a, m)] = (
                    p_k * model.antenna.intended_gain * gain * real.fading[a, m, :]
                )
                ub_edge[(a, m)] = w * float(np.log1p(desired[(a, m)] / noise).sum()) / LN2
            else:
                interf[(a, m)] = (
                    p_k * real.interference_gain[a, m] * gain * real.fading[a, m, :]
                )

    spaces = {}
    for a in abs_order:
        opts = [None] + children[a]
        vectors = list(product(opts, repeat=n_sub))
        vectors.sort(
            key=lambda v: -sum(
                desired[(a, m)][k] for k, m in enumerate(v) if m is not None
            )
        )
        spaces[a] = vectors

    acc = {m: np.zeros(n_sub) for m in all_children}
    chosen: dict[int, list[int | None]] = {}
    best = {"value": best_value, "assign": None, "leaves": 0}

    def edge_rate(a: int, m: int, vec) -> float:
        mask = [k for k, c in enumerate(vec) if c == m]
        if not mask:
            return 0.0
        sig = desired[(a, m)][mask]
        return w * float(np.log1p(sig / (acc[m][mask] + noise)).sum()) / LN2

    def optimistic() -> float:
        rates = {}
        for a in abs_order:
            for m in children[a]:
                rates[(a, m)] = edge_rate(a, m, chosen[a]) if a in chosen else ub_edge[(a, m)]
        total = 0.0
        min_link = {MBS: float("inf")}
        for m in sorted(all_children, key=lambda c: depth[c]):
            min_link[m] = min(min_link[parent_of[m]], rates[(parent_of[m], m)])
            total += min_link[m] / depth[m]
        return total

    def dfs(ix: int) -> None:
        if optimistic() <= best["value"]:
            return
        if ix == len(abs_order):
            best["leaves"] += 1
            total = 0.0
            min_link = {MBS: float("inf")}
            for m in sorted(all_children, key=lambda c: depth[c]):
                a = parent_of[m]
                min_link[m] = min(min_link[a], edge_rate(a, m, chosen[a]))
                total += min_link[m] / depth[m]
            if total > best["value"]:
                best["value"] = total
                best["assign"] = {a: list(v) for a, v in chosen.items()}
            return
        a = abs_order[ix]
        for vec in spaces[a]:
            on = [k for k, c in enumerate(vec) if c is not None]
            for m in all_children:
                if m == a or parent_of[m] == a:
                    continue
                acc[m][on] += interf[(a, m)][on]
            chosen[a] = vec
            dfs(ix + 1)
            del chosen[a]
            for m in all_children:
                if m == a or parent_of[m] == a:
                    continue
                acc[m][on] -= interf[(a, m)][on]

    dfs(0)
    return best["value"], best["assign"], best["leaves"]


def exhaustive_optimal(
    topo: Topology,
    real: ChannelRealization,
    model: ChannelModel,
    pricing: PricingConfig | None = None,
    *,
    quota: int = 5,
    mbs_quota: int | None = None,
    limits: SearchLimits | None = None,
    search_formations: bool = True,
    incumbent: PipelineResult | None = None,
) -> OptimalResult:
    """Enumerate formations and allocations; return the sum-rate maximizer.

    The search is seeded with the cooperative heuristic's own solution, so
    the returned value can never fall below it. ``search_formations=False``
    keeps the heuristic's forest fixed and searches allocations only.
    """
    limits = limits or SearchLimits()
    if topo.n_sbs > limits.max_sbs or model.radio.n_subchannels > limits.max_subchannels:
        n_cand = 1
        for m in topo.sbs_ids:
            n_cand *= 1 + len(comm_set(topo, m))
        raise InstanceTooLargeError(
            f"instance (M={topo.n_sbs}, K={model.radio.n_subchannels}) exceeds limits "
            f"(M<={limits.max_sbs}, K<={limits.max_subchannels}); roughly {n_cand} "
            f"formation candidates each with up to {(quota + 1) ** model.radio.n_subchannels} "
            "allocations per A-BS"
        )

    pricing = pricing or PricingConfig()
    if incumbent is None:
        incumbent = form_network(
            topo, real, model, pricing, quota=quota, mbs_quota=mbs_quota
        )
    heuristic_assign = {
        rec.a_bs: list(rec.assignment) for rec in incumbent.allocation.per_abs
    }
    _, _, heuristic_e2e = evaluate_assignment(
        model,
        topo,
        real,
        incumbent.formation.parent_of,
        incumbent.formation.depth,
        heuristic_assign,
    )
    best_value = float(sum(heuristic_e2e.values()))
    best = OptimalResult(
        parent_of=dict(incumbent.formation.parent_of),
        depth=dict(incumbent.formation.depth),
        assignments=heuristic_assign,
        end_to_end_bps=heuristic_e2e,
        sum_rate_bps=best_value,
        n_formations=0,
        n_leaves=0,
    )

    if search_formations:
        forests = _enumerate_forests(topo, quota, mbs_quota)
    else:
        forests = [(dict(incumbent.formation.parent_of), dict(incumbent.formation.depth))]

    n_leaves = 0
    for parent_of, depth in forests:
        value, assign, leaves = _search_allocations(
            model, topo, real, parent_of, depth, best.sum_rate_bps
        )
        n_leaves += leaves
        if assign is not None and value > best.sum_rate_bps:
            _, _, e2e = evaluate_assignment(model, topo, real, parent_of, depth, assign)
            best = OptimalResult(
                parent_of=dict(parent_of),
                depth=dict(depth),
                assignments=assign,
                end_to_end_bps=e2e,
                sum_rate_bps=float(sum(e2e.values())),
                n_formations=0,
                n_leaves=0,
            )
    best.n_formations = len(forests)
    best.n_leaves = n_leaves
    return best
