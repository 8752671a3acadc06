import numpy as np
import pytest

from mmwbackhaul.allocation import AbsAllocation, AllocationResult, evaluate_assignment
from mmwbackhaul.channel import ChannelModel, RadioConfig, sample_realization
from mmwbackhaul.formation import FormationResult, PipelineResult, PricingConfig, form_network
from mmwbackhaul.matching import deferred_acceptance
from mmwbackhaul.metrics import (
    aggregate,
    collect_metrics,
    formation_message_bound,
    mno_cost,
    overhead_check,
)
from mmwbackhaul.baselines import non_cooperative
from mmwbackhaul.topology import generate_topology

from helpers import make_topology


def synthetic_result(assignment, children, a_bs=2, stage=1):
    k = len(assignment)
    rec = AbsAllocation(
        stage=stage,
        a_bs=a_bs,
        children=children,
        bound_bps=float("inf"),
        rates={m: np.ones(k) for m in children},
        revenue={m: 0.0 for m in children},
        phase2_eligible={m: True for m in children},
        assignment=assignment,
        messages=0,
    )
    formation = FormationResult(
        stages=[],
        edges=[(a_bs, m, stage) for m in children],
        unmatched=set(),
        parent_of={m: a_bs for m in children},
        depth={m: stage for m in children},
    )
    allocation = AllocationResult(
        per_abs=[rec],
        link_rate_bps={},
        subchannel_rate_bps={},
        end_to_end_bps={m: 1.0 for m in children},
        rth_violations=[],
    )
    return PipelineResult(formation=formation, allocation=allocation)


def test_cross_operator_cost_counts_allocated_subchannels():
    # SBS 1 owned by MNO 0 serves SBS 2 owned by MNO 1 on 3 sub-channels
    topo = make_topology([(50.0, 0.0), (100.0, 0.0)], [0, 1], n_mnos=2)
    result = synthetic_result([2, 2, 2, None], children=[2], a_bs=1)
    cost = mno_cost(result, PricingConfig(unit_price=1.0), topo)
    assert cost == {0: 0.0, 1: 3.0}


def test_mbs_parent_never_costs_anything():
    topo = make_topology([(50.0, 0.0)], [0], n_mnos=1)
    result = synthetic_result([1, 1], children=[1], a_bs=0)
    assert mno_cost(result, PricingConfig(unit_price=1.0), topo) == {0: 0.0}


def test_noncooperative_runs_cost_zero():
    for seed in range(5):
        topo = generate_topology(seed, m_sbs=10, n_mnos=3, d_max=400, d=200)
        model = ChannelModel(radio=RadioConfig(n_subchannels=4))
        real = sample_realization(topo, model, np.random.SeedSequence([seed, 1]))
        res = non_cooperative(topo, real, model, PricingConfig())
        assert all(c == 0.0 for c in mno_cost(res, PricingConfig(), topo).values())


def test_aggregate_single_run_is_a_step():
    summary = aggregate([5.0])
    assert summary.mean == 5.0 and summary.std == 0.0
    assert summary.cdf_at(4.9) == 0.0
    assert summary.cdf_at(5.0) == 1.0
    assert summary.cdf_at(float("inf")) == 1.0


def test_aggregate_constants_and_errors():
    summary = aggregate([2.0, 2.0, 2.0])
    assert summary.std == 0.0
    with pytest.raises(ValueError):
        aggregate([])


def test_aggregate_cdf_reaches_one_and_is_monotone():
    summary = aggregate([3.0, 1.0, 2.0, 2.0])
    assert summary.cdf[-1] == 1.0
    assert all(a <= b for a, b in zip(summary.cdf, summary.cdf[1:]))


def test_formation_message_bound_uniform_and_fallback():
    assert formation_message_bound(0, [2, 2]) == 0.0
    assert formation_message_bound(6, [2, 2, 2]) == pytest.approx(0.5 * 2 * 4 * 5)
    # mixed quotas (unbounded macro cell) fall back to one proposal per pair
    assert formation_message_bound(4, [None]) == 4.0


def test_worst_case_count_meets_the_uniform_bound():
    # identical preferences, 6 proposers, 3 acceptors of quota 2: the count
    # telescopes to 12 and stays under the closed-form bound of 20
    proposers = [f"p{i}" for i in range(6)]
    acceptors = ["a0", "a1", "a2"]
    prefs_p = {p: list(acceptors) for p in proposers}
    prefs_a = {a: list(proposers) for a in acceptors}
    _, msgs = deferred_acceptance(proposers, acceptors, prefs_p, prefs_a, {a: 2 for a in acceptors})
    assert msgs == 12
    assert msgs <= formation_message_bound(6, [2, 2, 2])


def test_overhead_check_passes_on_pipeline_runs():
    for seed in range(10):
        topo = generate_topology(seed, m_sbs=14, n_mnos=3, d_max=400, d=200)
        model = ChannelModel(radio=RadioConfig(n_subchannels=6))
        real = sample_realization(topo, model, np.random.SeedSequence([seed, 1]))
        res = form_network(topo, real, model, PricingConfig(), quota=3)
        report = overhead_check(res, n_subchannels=6)
        assert report.passed, (report.stage_entries, report.abs_entries)


def test_sum_rate_accounting_closes_bit_exactly():
    topo = generate_topology(11, m_sbs=12, n_mnos=2, d_max=400, d=200)
    model = ChannelModel(radio=RadioConfig(n_subchannels=5))
    real = sample_realization(topo, model, np.random.SeedSequence([11, 1]))
    res = form_network(topo, real, model, PricingConfig())
    assignments = {rec.a_bs: rec.assignment for rec in res.allocation.per_abs}
    link, per_k, e2e = evaluate_assignment(
        model, topo, real, res.formation.parent_of, res.formation.depth, assignments
    )
    assert e2e == res.allocation.end_to_end_bps
    assert link == res.allocation.link_rate_bps
    metrics = collect_metrics(topo, res, PricingConfig())
    assert metrics.sum_rate_bps == sum(metrics.per_sbs_rates)
    assert metrics.sum_rate_bps == res.allocation.sum_rate_bps
