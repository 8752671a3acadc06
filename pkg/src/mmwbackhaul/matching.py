"""Two-sided one-to-many matching: deferred acceptance, stability, Pareto.

Preference profiles are strict ordered lists of acceptable partners; anything
missing from an agent's list is unacceptable to it. Quotas bound how many
proposers an acceptor may hold (``None`` means unbounded).

``deferred_acceptance`` runs the propose-and-reject rounds with the classical
hold-the-best rule. Passing ``accept_gate`` switches the acceptors to gated
acceptance: an acceptor takes newcomers (best first) only while the gate
allows and never revisits what it already holds. Gated acceptance models
utility functions whose acceptability depends on the current match state; it
can strand mutually-preferred pairs, which is exactly the failure mode the
staged allocation algorithm repairs.
"""

from __future__ import annotations

from collections.abc import Callable, Hashable, Iterable, Sequence
from dataclasses import dataclass, field
from itertools import product

Agent = Hashable
AcceptGate = Callable[[Agent, tuple[Agent, ...], Agent], bool]
AcceptHook = Callable[[Agent, tuple[Agent, ...], Agent], bool]


@dataclass
class Matching:
    """One-to-many matching between proposers and acceptors."""

    assignment: dict[Agent, Agent]  # proposer -> acceptor, matched only
    inverse: dict[Agent, list[Agent]]  # acceptor -> held proposers
    quotas: dict[Agent, int | None] = field(default_factory=dict)

    def quota(self, acceptor: Agent) -> int | None:
        return self.quotas.get(acceptor)

    def held(self, acceptor: Agent) -> list[Agent]:
        return self.inverse.get(acceptor, [])

    def validate(self) -> None:
        """Check mutual consistency and quota bounds."""
        for p, a in self.assignment.items():
            if p not in self.inverse.get(a, []):
                raise AssertionError(f"{p}->{a} missing from inverse")
        for a, held in self.inverse.items():
            if len(set(held)) != len(held):
                raise AssertionError(f"duplicate holdings at {a}")
            q = self.quota(a)
            if q is not None and len(held) > q:
                raise AssertionError(f"quota exceeded at {a}")
            for p in held:
                if self.assignment.get(p) != a:
                    raise AssertionError(f"{a} holds {p} but {p} assigned elsewhere")


def matching_from_assignment(
    assignment: dict[Agent, Agent], acceptors: Iterable[Agent], quotas: dict[Agent, int | None]
) -> Matching:
    inverse: dict[Agent, list[Agent]] = {a: [] for a in acceptors}
    for p, a in assignment.items():
        inverse[a].append(p)
    return Matching(assignment=dict(assignment), inverse=inverse, quotas=dict(quotas))


def _ranks(prefs: dict[Agent, Sequence[Agent]]) -> dict[Agent, dict[Agent, int]]:
    return {agent: {other: r for r, other in enumerate(lst)} for agent, lst in prefs.items()}


def deferred_acceptance(
    proposers: Sequence[Agent],
    acceptors: Sequence[Agent],
    prefs_p: dict[Agent, Sequence[Agent]],
    prefs_a: dict[Agent, Sequence[Agent]],
    quotas: dict[Agent, int | None] | None = None,
    accept_gate: AcceptGate | None = None,
) -> tuple[Matching, int]:
    """Run round-based deferred acceptance with the proposers proposing.

    Returns the matching and the total number of proposals sent (one message
    per proposal). Without ``accept_gate`` the result is the proposer-optimal
    stable matching for the given preferences and quotas.
    """
    quotas = dict(quotas or {})
    rank_a = _ranks(prefs_a)
    next_ix = {p: 0 for p in proposers}
    held: dict[Agent, list[Agent]] = {a: [] for a in acceptors}
    matched: dict[Agent, Agent] = {}
    proposals = 0

    def has_room(a: Agent) -> bool:
        q = quotas.get(a)
        return q is None or len(held[a]) < q

    while True:
        batch: dict[Agent, list[Agent]] = {}
        for p in proposers:
            lst = prefs_p.get(p, ())
            if p in matched or next_ix[p] >= len(lst):
                continue
            a = lst[next_ix[p]]
            next_ix[p] += 1
            proposals += 1
            batch.setdefault(a, []).append(p)
        if not batch:
            break
        for a, newcomers in batch.items():
            ranks = rank_a.get(a, {})
            acceptable = sorted((p for p in newcomers if p in ranks), key=ranks.__getitem__)
            if accept_gate is None:
                pool = sorted(held[a] + acceptable, key=ranks.__getitem__)
                q = quotas.get(a)
                cut = len(pool) if q is None else min(q, len(pool))
                kept, dropped = pool[:cut], pool[cut:]
                for p in dropped:
                    matched.pop(p, None)
                held[a] = kept
                for p in kept:
                    matched[p] = a
            else:
                for p in acceptable:
                    if has_room(a) and accept_gate(a, tuple(held[a]), p):
                        held[a].append(p)
                        matched[p] = a

    return Matching(assignment=matched, inverse=held, quotas=quotas), proposals


def find_blocking_pairs(
    matching: Matching,
    prefs_p: dict[Agent, Sequence[Agent]],
    prefs_a: dict[Agent, Sequence[Agent]],
    acceptability_hook: AcceptHook | None = None,
) -> list[tuple[Agent, Agent]]:
    """All (proposer, acceptor) pairs that would jointly deviate.

    A pair blocks when the proposer strictly prefers the acceptor to its
    current match and the acceptor either strictly prefers the proposer to
    one of its current holdings, or has unfilled quota, finds the proposer
    acceptable, and the state-dependent ``acceptability_hook`` (when given)
    says it still wants more partners.
    """
    rank_p = _ranks(prefs_p)
    rank_a = _ranks(prefs_a)
    pairs: list[tuple[Agent, Agent]] = []
    for p, lst in prefs_p.items():
        cur = matching.assignment.get(p)
        cur_rank = rank_p[p].get(cur, len(lst)) if cur is not None else len(lst)
        for a in lst[:cur_rank]:
            ranks = rank_a.get(a, {})
            if p not in ranks:
                continue
            held = matching.held(a)
            swap = any(ranks[p] < ranks[q] for q in held if q in ranks)
            q = matching.quota(a)
            unfilled = q is None or len(held) < q
            expand = unfilled and (
                acceptability_hook is None or acceptability_hook(a, tuple(held), p)
            )
            if swap or expand:
                pairs.append((p, a))
    return pairs


def is_pareto_improvement(
    matching_a: Matching,
    matching_b: Matching,
    agents: Iterable[Agent],
    utility: Callable[[Agent, Agent | None], float],
) -> bool:
    """True when ``matching_b`` weakly improves every listed agent over
    ``matching_a`` and strictly improves at least one."""
    strict = False
    for agent in agents:
        u_a = utility(agent, matching_a.assignment.get(agent))
        u_b = utility(agent, matching_b.assignment.get(agent))
        if u_b < u_a:
            return False
        if u_b > u_a:
            strict = True
    return strict


def enumerate_matchings(
    proposers: Sequence[Agent],
    acceptors: Sequence[Agent],
    prefs_p: dict[Agent, Sequence[Agent]],
    prefs_a: dict[Agent, Sequence[Agent]],
    quotas: dict[Agent, int | None] | None = None,
) -> Iterable[Matching]:
    """Every quota-feasible matching of mutually-acceptable pairs.

    Brute-force oracle for small instances only; the option space is
    (choices+1)^proposers.
    """
    quotas = dict(quotas or {})
    rank_a = _ranks(prefs_a)
    choices = [
        [None] + [a for a in prefs_p.get(p, ()) if p in rank_a.get(a, {})] for p in proposers
    ]
    for combo in product(*choices):
        counts: dict[Agent, int] = {}
        for a in combo:
            if a is not None:
                counts[a] = counts.get(a, 0) + 1
        if any(quotas.get(a) is not None and c > quotas[a] for a, c in counts.items()):
            continue
        assignment = {p: a for p, a in zip(proposers, combo) if a is not None}
        yield matching_from_assignment(assignment, acceptors, quotas)


def enumerate_stable_matchings(
    proposers: Sequence[Agent],
    acceptors: Sequence[Agent],
    prefs_p: dict[Agent, Sequence[Agent]],
    prefs_a: dict[Agent, Sequence[Agent]],
    quotas: dict[Agent, int | None] | None = None,
    acceptability_hook: AcceptHook | None = None,
) -> list[Matching]:
    return [
        m
        for m in enumerate_matchings(proposers, acceptors, prefs_p, prefs_a, quotas)
        if not find_blocking_pairs(m, prefs_p, prefs_a, acceptability_hook)
    ]
