"""Run-level metrics: sum rate, per-operator cost, overhead bounds, CSV io."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formation import PipelineResult, PricingConfig
from .topology import Topology, same_mno

SUMRATE_COLUMNS = ["seed", "scheme", "m", "n", "rho", "sum_rate_bps"]
CDF_COLUMNS = ["scheme", "m", "n", "rho", "sum_rate_bps", "prob"]
COST_COLUMNS = ["q", "kappa", "mno", "cost"]
OVERHEAD_COLUMNS = [
    "seed",
    "scheme",
    "m",
    "n",
    "rho",
    "formation_messages",
    "allocation_messages",
    "formation_bound_ok",
    "allocation_bound_ok",
]
SNAPSHOT_COLUMNS = ["node", "x", "y", "mno", "parent", "stage"]


@dataclass
class RunMetrics:
    sum_rate_bps: float
    per_sbs_rates: list[float]
    mno_cost: dict[int, float]
    formation_messages: list[int]
    allocation_messages: dict[int, int]
    unmatched_count: int
    rth_violations: int


def mno_cost(result: PipelineResult, pricing: PricingConfig, topo: Topology) -> dict[int, float]:
    """Money each MNO pays other MNOs: the serving node's unit price times
    the number of sub-channels its foreign children actually received."""
    cost = {n: 0.0 for n in range(topo.n_mnos)}
    for rec in result.allocation.per_abs:
        counts: dict[int, int] = {}
        for child in rec.assignment:
            if child is not None:
                counts[child] = counts.get(child, 0) + 1
        for child, n_ch in counts.items():
            if not same_mno(topo, rec.a_bs, child):
                cost[int(topo.owner[child])] += pricing.price(rec.a_bs) * n_ch
    return cost


def collect_metrics(
    topo: Topology, result: PipelineResult, pricing: PricingConfig
) -> RunMetrics:
    e2e = result.allocation.end_to_end_bps
    per_sbs = [e2e[m] for m in topo.sbs_ids]
    return RunMetrics(
        sum_rate_bps=float(sum(per_sbs)),
        per_sbs_rates=per_sbs,
        mno_cost=mno_cost(result, pricing, topo),
        formation_messages=result.formation.messages_per_stage,
        allocation_messages=result.allocation.messages_per_abs(),
        unmatched_count=len(result.formation.unmatched),
        rth_violations=len(result.allocation.rth_violations),
    )


@dataclass
class AggregateSummary:
    n: int
    mean: float
    std: float
    grid: list[float]
    cdf: list[float]

    def cdf_at(self, x: float) -> float:
        prob = 0.0
        for g, p in zip(self.grid, self.cdf):
            if g <= x:
                prob = p
            else:
                break
        return prob


def aggregate(values, grid=None) -> AggregateSummary:
    """Mean, standard deviation, and right-continuous empirical CDF."""
    data = np.asarray(list(values), dtype=float)
    if data.size == 0:
        raise ValueError("aggregate needs at least one run")
    if grid is None:
        grid = np.unique(data)
    grid = np.asarray(grid, dtype=float)
    cdf = [float(np.mean(data <= g)) for g in grid]
    std = float(np.std(data, ddof=1)) if data.size > 1 else 0.0
    return AggregateSummary(
        n=int(data.size), mean=float(np.mean(data)), std=std, grid=[float(g) for g in grid], cdf=cdf
    )


@dataclass
class OverheadReport:
    stage_entries: list[tuple[int, int, float]]  # (stage, messages, bound)
    abs_entries: list[tuple[int, int, float]]  # (a_bs, messages, bound)

    @property
    def formation_ok(self) -> bool:
        return all(m <= b for _, m, b in self.stage_entries)

    @property
    def allocation_ok(self) -> bool:
        return all(m < b for _, m, b in self.abs_entries)

    @property
    def passed(self) -> bool:
        return self.formation_ok and self.allocation_ok


def formation_message_bound(n_dbs: int, quotas: list[int | None]) -> float:
    """Worst-case request count of one stage of deferred acceptance.

    With a uniform finite quota Q the identical-preference worst case gives
    Q/2 * (D/Q + 1) * (D/Q + 2); otherwise fall back to one proposal per
    (D-BS, A-BS) pair, which the algorithm never exceeds.
    """
    if n_dbs == 0:
        return 0.0
    uniform = {q for q in quotas}
    if len(uniform) == 1 and None not in uniform:
        q = float(quotas[0])
        return 0.5 * q * (n_dbs / q + 1.0) * (n_dbs / q + 2.0)
    return float(n_dbs * len(quotas))


def overhead_check(result: PipelineResult, n_subchannels: int) -> OverheadReport:
    """Compare recorded message counts against the analytic bounds: the
    stage formation bound and, per A-BS, strictly fewer allocation requests
    than sub-channels times quota."""
    stage_entries = []
    for rec in result.formation.stages:
        quotas = [rec.quotas[a] for a in rec.stage.a_bs]
        bound = formation_message_bound(len(rec.stage.d_bs), quotas)
        stage_entries.append((rec.stage.index, rec.messages, bound))
    quota_by_abs: dict[int, int | None] = {}
    for rec in result.formation.stages:
        quota_by_abs.update(rec.quotas)
    abs_entries = []
    for a_rec in result.allocation.per_abs:
        q = quota_by_abs.get(a_rec.a_bs)
        bound = float("inf") if q is None else float(n_subchannels * q)
        abs_entries.append((a_rec.a_bs, a_rec.messages, bound))
    return OverheadReport(stage_entries=stage_entries, abs_entries=abs_entries)


def write_csv(path: str | Path, columns: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]
