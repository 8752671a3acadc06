"""Render experiment figures from the simulator's CSV output.

Pure reader over the documented schemas; never mutates its inputs.

    sumrate.csv   seed, scheme, m, n, rho, sum_rate_bps
    cdf.csv       scheme, m, n, rho, sum_rate_bps, prob
    cost.csv      q, kappa, mno, cost
    overhead.csv  seed, scheme, m, n, rho, formation_messages,
                  allocation_messages, formation_bound_ok, allocation_bound_ok
    snapshot.csv  scheme, node, x, y, mno, parent, stage
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

GBPS = 1e9

SCHEME_STYLE = {
    "cooperative": dict(color="tab:blue", marker="o"),
    "noncoop": dict(color="tab:red", marker="s"),
    "random": dict(color="tab:green", marker="^"),
    "optimal": dict(color="black", marker="*"),
}


class SchemaError(ValueError):
    pass


def load_table(csv_dir: str | Path, name: str, required: list[str]) -> dict[str, list[str]]:
    """Read a CSV into columns, failing loudly on a missing file or column."""
    path = Path(csv_dir) / name
    if not path.exists():
        raise SchemaError(f"missing input file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None) or []
        rows = list(reader)
    for col in required:
        if col not in header:
            raise SchemaError(f"{name} is missing required column {col!r}")
    ix = {col: header.index(col) for col in header}
    return {col: [row[ix[col]] for row in rows] for col in header}


def _mean_by(keys: list, values: list[float]) -> dict:
    acc: dict = {}
    for key, val in zip(keys, values):
        acc.setdefault(key, []).append(val)
    return {key: float(np.mean(vals)) for key, vals in acc.items()}


def _sumrate_lines(csv_dir, x_col: str):
    table = load_table(csv_dir, "sumrate.csv", ["scheme", x_col, "sum_rate_bps"])
    schemes = sorted(set(table["scheme"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme in schemes:
        pairs = [
            (float(x), float(y))
            for s, x, y in zip(table["scheme"], table[x_col], table["sum_rate_bps"])
            if s == scheme
        ]
        means = _mean_by([x for x, _ in pairs], [y for _, y in pairs])
        xs = sorted(means)
        ax.plot(
            xs,
            [means[x] / GBPS for x in xs],
            label=scheme,
            **SCHEME_STYLE.get(scheme, {}),
        )
    ax.set_xlabel("number of SBSs" if x_col == "m" else "average LoS probability")
    ax.set_ylabel("average sum rate (Gbps)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return fig


def render_sumrate_vs_m(csv_dir):
    return _sumrate_lines(csv_dir, "m")


def render_sumrate_vs_rho(csv_dir):
    return _sumrate_lines(csv_dir, "rho")


def render_cdf(csv_dir, by: str = "scheme"):
    table = load_table(csv_dir, "cdf.csv", ["scheme", "rho", "sum_rate_bps", "prob"])
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = sorted(set(table[by]))
    for label in labels:
        points = [
            (float(x), float(p))
            for key, x, p in zip(table[by], table["sum_rate_bps"], table["prob"])
            if key == label
        ]
        points.sort()
        ax.step(
            [x / GBPS for x, _ in points],
            [p for _, p in points],
            where="post",
            label=f"{by}={label}" if by != "scheme" else label,
        )
    ax.set_xlabel("sum rate (Gbps)")
    ax.set_ylabel("empirical CDF")
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    return fig


def render_cost_surface(csv_dir):
    table = load_table(csv_dir, "cost.csv", ["q", "kappa", "mno", "cost"])
    qs = sorted({float(v) for v in table["q"]})
    kappas = sorted({float(v) for v in table["kappa"]})
    grid = np.zeros((len(kappas), len(qs)))
    counts = np.zeros_like(grid)
    for q, kappa, cost in zip(table["q"], table["kappa"], table["cost"]):
        i = kappas.index(float(kappa))
        j = qs.index(float(q))
        grid[i, j] += float(cost)
        counts[i, j] += 1
    grid = np.divide(grid, counts, out=np.zeros_like(grid), where=counts > 0)
    fig, ax = plt.subplots(figsize=(6, 4))
    mesh = ax.pcolormesh(qs, [k / GBPS for k in kappas], grid, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="mean cooperation cost per MNO")
    ax.set_xlabel("price per sub-channel q")
    ax.set_ylabel("weight kappa (Gbps per price unit)")
    return fig


def render_overhead(csv_dir):
    table = load_table(
        csv_dir, "overhead.csv", ["scheme", "m", "formation_messages", "allocation_messages"]
    )
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharex=True)
    for ax, col, title in zip(
        axes, ("formation_messages", "allocation_messages"), ("network formation", "resource allocation")
    ):
        for scheme in sorted(set(table["scheme"])):
            pairs = [
                (float(m), float(v))
                for s, m, v in zip(table["scheme"], table["m"], table[col])
                if s == scheme
            ]
            means = _mean_by([m for m, _ in pairs], [v for _, v in pairs])
            xs = sorted(means)
            ax.plot(xs, [means[x] for x in xs], label=scheme, **SCHEME_STYLE.get(scheme, {}))
        ax.set_title(title)
        ax.set_xlabel("number of SBSs")
        ax.set_ylabel("average messages per run")
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    return fig


def render_snapshot(csv_dir):
    """Topology snapshot: SBS circles colored by operator, the MBS as a
    triangle, backhaul edges colored by the child's operator."""
    table = load_table(csv_dir, "snapshot.csv", ["scheme", "node", "x", "y", "mno", "parent"])
    schemes = sorted(set(table["scheme"]))
    fig, axes = plt.subplots(1, len(schemes), figsize=(5 * len(schemes), 5), squeeze=False)
    cmap = plt.get_cmap("tab10")
    for ax, scheme in zip(axes[0], schemes):
        rows = [
            dict(node=int(n), x=float(x), y=float(y), mno=mno, parent=parent)
            for s, n, x, y, mno, parent in zip(
                table["scheme"], table["node"], table["x"], table["y"], table["mno"], table["parent"]
            )
            if s == scheme
        ]
        pos = {r["node"]: (r["x"], r["y"]) for r in rows}
        for r in rows:
            if r["parent"] != "":
                x0, y0 = pos[int(r["parent"])]
                color = cmap(int(r["mno"])) if r["mno"] != "" else "gray"
                ax.plot([x0, r["x"]], [y0, r["y"]], color=color, lw=1.2, zorder=1)
        for r in rows:
            if r["mno"] == "":
                ax.scatter([r["x"]], [r["y"]], marker="^", s=140, color="black", zorder=3)
            else:
                ax.scatter(
                    [r["x"]], [r["y"]], marker="o", s=60, color=cmap(int(r["mno"])), zorder=2
                )
            ax.annotate(str(r["node"]), (r["x"], r["y"]), textcoords="offset points", xytext=(4, 4))
        ax.set_title(scheme)
        ax.set_aspect("equal")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


FIGURES = {
    "sumrate_vs_m": render_sumrate_vs_m,
    "sumrate_vs_rho": render_sumrate_vs_rho,
    "cdf": render_cdf,
    "cdf_by_rho": lambda csv_dir: render_cdf(csv_dir, by="rho"),
    "cost_surface": render_cost_surface,
    "overhead": render_overhead,
    "snapshot": render_snapshot,
}

# The experiment presets of the simulator map onto these figures.
ALIASES = {
    "fig3": "sumrate_vs_m",
    "fig4": "sumrate_vs_m",
    "fig5": "sumrate_vs_rho",
    "fig6": "cdf",
    "fig7": "cdf_by_rho",
    "fig8": "cost_surface",
    "fig9": "snapshot",
}


def render(csv_dir: str | Path, figure: str, out_path: str | Path):
    """Render one named figure from ``csv_dir`` and save it to ``out_path``.

    Returns the matplotlib figure. Unknown names raise with the list of
    available figures.
    """
    name = ALIASES.get(figure, figure)
    if name not in FIGURES:
        options = sorted(set(FIGURES) | set(ALIASES))
        raise ValueError(f"unknown figure {figure!r}; available: {', '.join(options)}")
    fig = FIGURES[name](csv_dir)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    return fig
