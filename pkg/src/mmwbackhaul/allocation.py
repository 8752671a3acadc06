"""Per-hop sub-channel allocation and end-to-end rate evaluation.

Each anchored base station (A-BS) runs an independent one-to-many matching
between its sub-channels and the demanding base stations (D-BSs) it serves.
A D-BS keeps accepting sub-channels only while the sum rate it already holds
stays below its fair share of the A-BS's own backhaul rate (the share splits
the upstream rate between the A-BS itself and all of its children). Because
that acceptability depends on the evolving match, plain deferred acceptance
is not stable here; the staged algorithm re-ranks each D-BS's whole proposal
pool every round (so a better sub-channel can displace a held one) and then
hands any leftover sub-channels to same-operator children that still have
headroom.

Decode-and-forward end-to-end rates follow the bottleneck rule: an SBS at
hop depth n gets 1/n times the minimum link rate along its path to the MBS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import LN2, ChannelModel, ChannelRealization, realized_link_gain
from .matching import Matching, find_blocking_pairs, matching_from_assignment
from .topology import MBS, Topology


def wants_more_subchannels(held_sum_bps: float, upstream_bps: float, fanout: int) -> bool:
    """Saturation test: the D-BS still wants sub-channels while the rate it
    holds is strictly below upstream / (fanout + 1). The +1 reserves a share
    for the A-BS's own traffic."""
    return held_sum_bps < upstream_bps / (fanout + 1)


def dbs_subchannel_utility(rate_bps: float, held_sum_bps: float, bound_bps: float) -> float:
    """Value of an unheld sub-channel to a D-BS: its rate while the D-BS has
    headroom, unacceptable (-inf) once saturated."""
    return rate_bps if held_sum_bps < bound_bps else float("-inf")


def abs_subchannel_utility(rate_bps: float, revenue: float) -> float:
    """Value of serving a D-BS on a sub-channel from the A-BS side: achievable
    rate plus the cross-operator revenue weight."""
    return rate_bps + revenue


@dataclass
class AbsAllocation:
    """Allocation outcome of one A-BS in one stage, with the rate tables the
    algorithm ranked on (kept for stability verification)."""

    stage: int
    a_bs: int
    children: list[int]
    bound_bps: float
    rates: dict[int, np.ndarray]  # child -> (K,) bits/s
    revenue: dict[int, float]  # child -> A-BS side utility bonus
    phase2_eligible: dict[int, bool]  # child -> same-MNO with the A-BS
    assignment: list[int | None]  # sub-channel -> child
    messages: int


@dataclass
class AllocationResult:
    per_abs: list[AbsAllocation]
    link_rate_bps: dict[tuple[int, int], float]  # (parent, child) -> reported rate
    subchannel_rate_bps: dict[tuple[int, int], tuple[int, float]]  # (a_bs, k) -> (child, rate)
    end_to_end_bps: dict[int, float]  # per SBS, 0 when unmatched
    rth_violations: list[int]  # matched SBSs below the rate floor

    @property
    def sum_rate_bps(self) -> float:
        return float(sum(self.end_to_end_bps.values()))

    def messages_per_abs(self) -> dict[int, int]:
        return {rec.a_bs: rec.messages for rec in self.per_abs}

    def assignment_rows(self) -> list[tuple[int, int, int, int, float]]:
        """Rows (stage, a_bs, d_bs, sub_channel, rate_bps) of the final x."""
        rows = []
        for rec in self.per_abs:
            for k, child in enumerate(rec.assignment):
                if child is None:
                    continue
                _, rate = self.subchannel_rate_bps[(rec.a_bs, k)]
                rows.append((rec.stage, rec.a_bs, child, k, rate))
        return rows


def match_subchannels(
    children: list[int],
    rates: dict[int, np.ndarray],
    bound_bps: float,
    revenue: dict[int, float],
    phase2_eligible: dict[int, bool],
) -> tuple[list[int | None], int]:
    """Match one A-BS's sub-channels to its children under peer effects.

    Phase 1: sub-channels propose down their preference lists (rate plus
    revenue, ties to the lower node id); every round each D-BS re-ranks all
    sub-channels it holds or was just offered by rate and keeps them greedily
    while its held sum stays below ``bound_bps``, rejecting the rest. Phase 2
    assigns the still-unmatched sub-channels, in ascending index, to the
    best same-operator child that still has headroom.

    Returns the per-sub-channel assignment and the number of phase-1
    proposals sent.
    """
    if not children:
        return [], 0
    n_sub = len(next(iter(rates.values())))
    prefs = [
        sorted(children, key=lambda m, kk=k: (-(rates[m][kk] + revenue[m]), m))
        for k in range(n_sub)
    ]
    next_ix = [0] * n_sub
    held: dict[int, list[int]] = {m: [] for m in children}
    holder: list[int | None] = [None] * n_sub
    messages = 0

    while True:
        batch: dict[int, list[int]] = {}
        for k in range(n_sub):
            if holder[k] is not None or next_ix[k] >= len(prefs[k]):
                continue
            target = prefs[k][next_ix[k]]
            next_ix[k] += 1
            messages += 1
            batch.setdefault(target, []).append(k)
        if not batch:
            break
        for m, newcomers in batch.items():
            pool = sorted(held[m] + newcomers, key=lambda kk: (-rates[m][kk], kk))
            kept: list[int] = []
            total = 0.0
            for kk in pool:
                if total < bound_bps:
                    kept.append(kk)
                    total += float(rates[m][kk])
                else:
                    break
            for kk in held[m]:
                if kk not in kept:
                    holder[kk] = None
            held[m] = kept
            for kk in kept:
                holder[kk] = m

    assign_leftovers(children, rates, bound_bps, phase2_eligible, holder)
    return holder, messages


def assign_leftovers(
    children: list[int],
    rates: dict[int, np.ndarray],
    bound_bps: float,
    eligible: dict[int, bool],
    holder: list[int | None],
) -> None:
    """Hand unmatched sub-channels (ascending index) to the best same-operator
    child that still has headroom, updating ``holder`` in place.

    With pool re-ranking in phase 1 a receiver only ever rejects while
    saturated, so this step is a safety net: it can only fire under
    alternative acceptance semantics.
    """
    sums = {m: 0.0 for m in children}
    for k, m in enumerate(holder):
        if m is not None:
            sums[m] += float(rates[m][k])
    for k, cur in enumerate(holder):
        if cur is not None:
            continue
        candidates = [m for m in children if eligible[m] and sums[m] < bound_bps]
        if not candidates:
            continue
        best = min(candidates, key=lambda m: (-rates[m][k], m))
        holder[k] = best
        sums[best] += float(rates[best][k])


def random_subchannels(
    children: list[int],
    rates: dict[int, np.ndarray],
    bound_bps: float,
    rng: np.random.Generator,
) -> tuple[list[int | None], int]:
    """Uniform random assignment respecting the same headroom rule: each
    sub-channel (visited in random order) goes to a uniformly chosen child
    that still has headroom, or stays unassigned when nobody has any."""
    if not children:
        return [], 0
    n_sub = len(next(iter(rates.values())))
    holder: list[int | None] = [None] * n_sub
    sums = {m: 0.0 for m in children}
    for k in rng.permutation(n_sub):
        candidates = [m for m in children if sums[m] < bound_bps]
        if not candidates:
            continue
        m = candidates[int(rng.integers(len(candidates)))]
        holder[int(k)] = m
        sums[m] += float(rates[m][int(k)])
    return holder, 0


def allocation_matching(rec: AbsAllocation) -> Matching:
    assignment = {k: m for k, m in enumerate(rec.assignment) if m is not None}
    return matching_from_assignment(assignment, rec.children, {m: None for m in rec.children})


def verify_allocation_stability(rec: AbsAllocation) -> list[tuple[int, int]]:
    """Blocking pairs (sub-channel, d_bs) of one A-BS's final allocation,
    using the rate tables the algorithm ranked on and the headroom rule as
    the state-dependent acceptability hook. Empty means two-sided stable."""
    if not rec.children:
        return []
    n_sub = len(rec.assignment)
    prefs_p = {
        k: sorted(rec.children, key=lambda m, kk=k: (-(rec.rates[m][kk] + rec.revenue[m]), m))
        for k in range(n_sub)
    }
    prefs_a = {
        m: sorted(range(n_sub), key=lambda kk: (-rec.rates[m][kk], kk)) for m in rec.children
    }
    matching = allocation_matching(rec)

    def still_wants(m: int, held: tuple[int, ...], _k: int) -> bool:
        total = float(sum(rec.rates[m][kk] for kk in held))
        return total < rec.bound_bps

    return find_blocking_pairs(matching, prefs_p, prefs_a, acceptability_hook=still_wants)


def evaluate_assignment(
    model: ChannelModel,
    topo: Topology,
    real: ChannelRealization,
    parent_of: dict[int, int],
    depth: dict[int, int],
    assignments: dict[int, list[int | None]],
) -> tuple[dict[tuple[int, int], float], dict[tuple[int, int], tuple[int, float]], dict[int, float]]:
    """Exact rates of a complete allocation with co-channel interference.

    Interference on a sub-channel comes from every other node that actually
    transmits on it anywhere in the network, received through the sampled
    per-pair antenna-gain product and the pair's realized link state. Returns
    (per-link rates, per-(a_bs, k) rates, per-SBS end-to-end rates).
    """
    n_sub = model.radio.n_subchannels
    noise = model.radio.noise_w
    w = model.radio.subchannel_bw_hz
    transmitters: list[list[int]] = [[] for _ in range(n_sub)]
    for a, vec in assignments.items():
        for k, child in enumerate(vec):
            if child is not None:
                transmitters[k].append(a)

    link_rate: dict[tuple[int, int], float] = {}
    per_k: dict[tuple[int, int], tuple[int, float]] = {}
    for a, vec in assignments.items():
        for k, child in enumerate(vec):
            if child is None:
                continue
            signal = (
                model.radio.subchannel_power_w(a)
                * model.antenna.intended_gain
                * realized_link_gain(model, topo, real, a, child)
                * real.fading[a, child, k]
            )
            interference = 0.0
            for t in transmitters[k]:
                if t in (a, child):
                    continue
                interference += (
                    model.radio.subchannel_power_w(t)
                    * real.interference_gain[t, child]
                    * realized_link_gain(model, topo, real, t, child)
                    * real.fading[t, child, k]
                )
            rate = w * float(np.log1p(signal / (interference + noise))) / LN2
            per_k[(a, k)] = (child, rate)
            link_rate[(a, child)] = link_rate.get((a, child), 0.0) + rate

    end_to_end: dict[int, float] = {}
    min_link: dict[int, float] = {MBS: float("inf")}
    for child in sorted(parent_of, key=lambda c: depth[c]):
        parent = parent_of[child]
        rate = link_rate.get((parent, child), 0.0)
        min_link[child] = min(min_link[parent], rate)
        end_to_end[child] = min_link[child] / depth[child]
    for m in topo.sbs_ids:
        end_to_end.setdefault(m, 0.0)
    return link_rate, per_k, end_to_end


def end_to_end_rates(
    model: ChannelModel,
    topo: Topology,
    real: ChannelRealization,
    parent_of: dict[int, int],
    depth: dict[int, int],
    assignments: dict[int, list[int | None]],
    r_th_bps: float = 1e6,
) -> tuple[dict[int, float], list[int]]:
    """Per-SBS end-to-end rates plus the matched SBSs below the rate floor."""
    _, _, e2e = evaluate_assignment(model, topo, real, parent_of, depth, assignments)
    violations = [m for m in sorted(parent_of) if e2e[m] < r_th_bps]
    return e2e, violations
