"""Experiment runner: seeded Monte-Carlo sweeps written to CSV.

A run draws a fresh topology and channel realization per seed, executes the
requested scheme, and appends one row per metric file. Sweeps are cartesian
products over config keys; results merge in job order so replays with the
same config and seeds are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from . import __version__
from .baselines import (
    InstanceTooLargeError,
    SearchLimits,
    exhaustive_optimal,
    non_cooperative,
    random_baseline,
)
from .channel import AntennaPattern, ChannelModel, PathLossParams, RadioConfig, sample_realization
from .formation import PricingConfig, form_network
from .metrics import (
    CDF_COLUMNS,
    COST_COLUMNS,
    OVERHEAD_COLUMNS,
    SUMRATE_COLUMNS,
    collect_metrics,
    overhead_check,
    write_csv,
)
from .topology import MBS, SHARED_OWNER, generate_topology

import numpy as np

OUTPUT_DIR_ENV = "MMWBH_OUT"
SNAPSHOT_COLUMNS = ["scheme", "node", "x", "y", "mno", "parent", "stage"]
SCHEMES = ("cooperative", "noncoop", "random", "optimal")

# One named key per simulation-parameter row of the parameter table.
TABLE_DEFAULTS: dict = {
    "fc_hz": 73e9,
    "d0_m": 1.0,
    "alpha_los": 2.0,
    "alpha_nlos": 3.5,
    "xi_los_db": 4.2,
    "xi_nlos_db": 7.9,
    "g_max_db": 18.0,
    "g_min_db": -2.0,
    "theta_m_deg": 10.0,
    "p_mbs_dbm": 40.0,
    "p_sbs_dbm": 30.0,
    "bandwidth_hz": 5e9,
    "n_subchannels": 50,
    "noise_psd_dbm_hz": -174.0,
    "d_max_m": 400.0,
    "d_m": 200.0,
    "r_th_bps": 1e6,
    "unit_price": 1.0,
    "kappa": 0.0,
    "rho": 0.5,
    "quota": 5,
    "mbs_quota": None,
    "m_sbs": 20,
    "n_mnos": 2,
    "optimal_max_sbs": 8,
    "optimal_max_subchannels": 5,
}

PRESETS: dict[str, dict] = {
    "fig3": {
        "defaults": {"n_mnos": 2, "n_subchannels": 5},
        "sweep": {"m_sbs": [3, 4, 5, 6, 7, 8]},
        "schemes": ["cooperative", "noncoop", "random", "optimal"],
        "seeds": 25,
    },
    "fig4": {
        "defaults": {"n_mnos": 5},
        "sweep": {"m_sbs": [5, 15, 25, 35, 45, 55, 65]},
        "schemes": ["cooperative", "noncoop", "random"],
        "seeds": 200,
    },
    "fig5": {
        "defaults": {"n_mnos": 5, "m_sbs": 20},
        "sweep": {"rho": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]},
        "schemes": ["cooperative", "noncoop", "random"],
        "seeds": 200,
    },
    "fig6": {
        "defaults": {"n_mnos": 5, "m_sbs": 60},
        "schemes": ["cooperative", "noncoop", "random"],
        "seeds": 200,
    },
    "fig7": {
        "defaults": {"n_mnos": 5, "m_sbs": 20},
        "sweep": {"rho": [0.2, 0.5, 1.0]},
        "schemes": ["cooperative"],
        "seeds": 200,
    },
    "fig8": {
        "defaults": {"n_mnos": 3, "m_sbs": 15},
        "sweep": {
            "unit_price": [0, 2, 4, 6, 8, 10],
            "kappa": [0.0, 25e9, 50e9, 75e9, 100e9],
        },
        "schemes": ["cooperative"],
        "seeds": 50,
    },
    "fig9": {
        "defaults": {"n_mnos": 2, "m_sbs": 10, "quota": 5},
        "schemes": ["cooperative", "noncoop"],
        "seeds": 1,
        "snapshot": True,
    },
    "overhead": {
        "defaults": {"n_mnos": 3},
        "sweep": {"m_sbs": [6, 10, 14, 18]},
        "schemes": ["cooperative", "noncoop"],
        "seeds": 100,
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    params: dict = field(default_factory=lambda: dict(TABLE_DEFAULTS))
    schemes: list[str] = field(default_factory=lambda: ["cooperative"])
    seeds: list[int] = field(default_factory=lambda: list(range(200)))
    sweep: dict[str, list] = field(default_factory=dict)
    workers: int = 1
    snapshot: bool = False

    def to_json_dict(self) -> dict:
        return {
            "defaults": self.params,
            "schemes": self.schemes,
            "seeds": self.seeds,
            "sweep": self.sweep,
            "workers": self.workers,
            "snapshot": self.snapshot,
        }

    def validate(self) -> None:
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ConfigError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        for key in self.sweep:
            if key not in self.params:
                raise ConfigError(f"sweep key {key!r} is not a parameter")
        if "optimal" in self.schemes:
            limit_m = int(self.params["optimal_max_sbs"])
            limit_k = int(self.params["optimal_max_subchannels"])
            for point in self.sweep_points():
                merged = {**self.params, **point}
                if merged["m_sbs"] > limit_m or merged["n_subchannels"] > limit_k:
                    raise ConfigError(
                        "the exhaustive 'optimal' scheme is limited to "
                        f"m_sbs<={limit_m} and n_subchannels<={limit_k}; "
                        f"got m_sbs={merged['m_sbs']}, n_subchannels={merged['n_subchannels']}"
                    )

    def sweep_points(self) -> list[dict]:
        if not self.sweep:
            return [{}]
        keys = sorted(self.sweep)
        return [dict(zip(keys, combo)) for combo in product(*(self.sweep[k] for k in keys))]


def load_config(
    path: str | None = None, preset: str | None = None, overrides: list[str] | None = None
) -> ExperimentConfig:
    cfg = ExperimentConfig()
    merged: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available presets: {', '.join(sorted(PRESETS))}"
            )
        merged = json.loads(json.dumps(PRESETS[preset]))  # deep copy
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} line {exc.lineno}: {exc.msg}") from exc
        merged_defaults = {**merged.get("defaults", {}), **doc.pop("defaults", {})}
        merged.update(doc)
        merged["defaults"] = merged_defaults
    cfg.params.update(merged.get("defaults", {}))
    if "schemes" in merged:
        cfg.schemes = list(merged["schemes"])
    seeds = merged.get("seeds")
    if seeds is not None:
        cfg.seeds = list(range(int(seeds))) if isinstance(seeds, int) else [int(s) for s in seeds]
    cfg.sweep = {k: list(v) for k, v in merged.get("sweep", {}).items()}
    cfg.workers = int(merged.get("workers", cfg.workers))
    cfg.snapshot = bool(merged.get("snapshot", cfg.snapshot))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if key == "schemes":
            cfg.schemes = value.split(",") if isinstance(value, str) else list(value)
        elif key == "seeds":
            cfg.seeds = list(range(int(value))) if isinstance(value, int) else list(value)
        elif key == "workers":
            cfg.workers = int(value)
        elif key == "sweep":
            cfg.sweep = {k: list(v) for k, v in dict(value).items()}
        elif key == "snapshot":
            cfg.snapshot = bool(value)
        elif key in cfg.params:
            cfg.params[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    cfg.validate()
    return cfg


def build_model(p: dict) -> ChannelModel:
    return ChannelModel(
        radio=RadioConfig(
            n_subchannels=int(p["n_subchannels"]),
            bandwidth_hz=float(p["bandwidth_hz"]),
            p_mbs_dbm=float(p["p_mbs_dbm"]),
            p_sbs_dbm=float(p["p_sbs_dbm"]),
            noise_psd_dbm_hz=float(p["noise_psd_dbm_hz"]),
            rho=float(p["rho"]),
        ),
        path_loss=PathLossParams(
            fc_hz=float(p["fc_hz"]),
            d0_m=float(p["d0_m"]),
            alpha_los=float(p["alpha_los"]),
            alpha_nlos=float(p["alpha_nlos"]),
            xi_los_db=float(p["xi_los_db"]),
            xi_nlos_db=float(p["xi_nlos_db"]),
        ),
        antenna=AntennaPattern(
            g_max_db=float(p["g_max_db"]),
            g_min_db=float(p["g_min_db"]),
            theta_m_deg=float(p["theta_m_deg"]),
        ),
    )


def build_pricing(p: dict) -> PricingConfig:
    return PricingConfig(unit_price=float(p["unit_price"]), kappa=float(p["kappa"]))


def run_one(scheme: str, seed: int, p: dict):
    """Execute one seeded run; returns (metrics-or-None, result-or-None, sum_rate)."""
    topo = generate_topology(
        seed, int(p["m_sbs"]), int(p["n_mnos"]), float(p["d_max_m"]), float(p["d_m"])
    )
    model = build_model(p)
    real = sample_realization(topo, model, np.random.SeedSequence([seed, 1]))
    pricing = build_pricing(p)
    quota = int(p["quota"])
    mbs_quota = None if p["mbs_quota"] is None else int(p["mbs_quota"])
    common = dict(quota=quota, mbs_quota=mbs_quota, r_th_bps=float(p["r_th_bps"]))
    if scheme == "cooperative":
        result = form_network(topo, real, model, pricing, **common)
    elif scheme == "noncoop":
        result = non_cooperative(topo, real, model, pricing, **common)
    elif scheme == "random":
        result = random_baseline(topo, real, model, pricing, seed, **common)
    elif scheme == "optimal":
        limits = SearchLimits(
            max_sbs=int(p["optimal_max_sbs"]),
            max_subchannels=int(p["optimal_max_subchannels"]),
        )
        opt = exhaustive_optimal(
            topo, real, model, pricing, quota=quota, mbs_quota=mbs_quota, limits=limits
        )
        return None, None, opt.sum_rate_bps, topo
    else:
        raise ValueError(f"unknown scheme {scheme}")
    return collect_metrics(topo, result, pricing), result, result.allocation.sum_rate_bps, topo


def _execute_job(job: dict) -> dict:
    scheme, seed, p = job["scheme"], job["seed"], job["params"]
    metrics, result, sum_rate, topo = run_one(scheme, seed, p)
    out = {
        "sumrate": [seed, scheme, p["m_sbs"], p["n_mnos"], p["rho"], repr(float(sum_rate))],
        "sum_rate": float(sum_rate),
        "cost": None,
        "overhead": None,
        "snapshot": None,
    }
    if metrics is not None:
        report = overhead_check(result, int(p["n_subchannels"]))
        out["overhead"] = [
            seed,
            scheme,
            p["m_sbs"],
            p["n_mnos"],
            p["rho"],
            sum(metrics.formation_messages),
            sum(metrics.allocation_messages.values()),
            int(report.formation_ok),
            int(report.allocation_ok),
        ]
        out["cost"] = {str(mno): c for mno, c in metrics.mno_cost.items()}
        if job["snapshot"]:
            parent = dict(result.formation.parent_of)
            stage_of = {c: j for _, c, j in result.formation.edges}
            rows = []
            for node in range(topo.n_nodes):
                owner = int(topo.owner[node])
                rows.append(
                    [
                        scheme,
                        node,
                        repr(float(topo.positions[node, 0])),
                        repr(float(topo.positions[node, 1])),
                        "" if owner == SHARED_OWNER else owner,
                        parent.get(node, ""),
                        stage_of.get(node, ""),
                    ]
                )
            out["snapshot"] = rows
    return out


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path) -> int:
    """Run every (sweep point, scheme, seed) job and write the CSV outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = []
    for point in cfg.sweep_points():
        params = {**cfg.params, **point}
        for scheme in cfg.schemes:
            for seed in cfg.seeds:
                jobs.append(
                    {
                        "scheme": scheme,
                        "seed": seed,
                        "params": params,
                        "point": point,
                        "snapshot": cfg.snapshot and seed == cfg.seeds[0],
                    }
                )

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outputs = list(pool.map(_execute_job, jobs, chunksize=1))
    else:
        outputs = [_execute_job(job) for job in jobs]

    sumrate_rows = [out["sumrate"] for out in outputs]
    overhead_rows = [out["overhead"] for out in outputs if out["overhead"] is not None]
    snapshot_rows = [row for out in outputs if out["snapshot"] for row in out["snapshot"]]

    cost_acc: dict[tuple, list[dict]] = {}
    cdf_acc: dict[tuple, list[float]] = {}
    for job, out in zip(jobs, outputs):
        p = job["params"]
        key = (p["unit_price"], p["kappa"])
        if out["cost"] is not None and job["scheme"] == "cooperative":
            cost_acc.setdefault(key, []).append(out["cost"])
        group = (job["scheme"], p["m_sbs"], p["n_mnos"], p["rho"])
        cdf_acc.setdefault(group, []).append(out["sum_rate"])

    cost_rows = []
    for (q, kappa), samples in sorted(cost_acc.items()):
        mnos = sorted({mno for s in samples for mno in s})
        for mno in mnos:
            mean_cost = sum(s.get(mno, 0.0) for s in samples) / len(samples)
            cost_rows.append([q, kappa, mno, repr(mean_cost)])

    cdf_rows = []
    for (scheme, m, n, rho), values in sorted(cdf_acc.items(), key=lambda kv: str(kv[0])):
        ordered = sorted(values)
        total = len(ordered)
        for i, v in enumerate(ordered, start=1):
            cdf_rows.append([scheme, m, n, rho, repr(v), repr(i / total)])

    write_csv(out_dir / "sumrate.csv", SUMRATE_COLUMNS, sumrate_rows)
    write_csv(out_dir / "overhead.csv", OVERHEAD_COLUMNS, overhead_rows)
    write_csv(out_dir / "cost.csv", COST_COLUMNS, cost_rows)
    write_csv(out_dir / "cdf.csv", CDF_COLUMNS, cdf_rows)
    if snapshot_rows:
        write_csv(out_dir / "snapshot.csv", SNAPSHOT_COLUMNS, snapshot_rows)

    config_doc = json.dumps(cfg.to_json_dict(), sort_keys=True)
    manifest = {
        "version": __version__,
        "config": cfg.to_json_dict(),
        "config_sha256": hashlib.sha256(config_doc.encode()).hexdigest(),
        "seeds": cfg.seeds,
        "jobs": len(jobs),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmwbh", description="millimeter-wave multi-hop backhaul experiment runner"
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--preset", help=f"named preset: {', '.join(sorted(PRESETS))}")
    parser.add_argument(
        "--out", default=None, help=f"output directory (default ${OUTPUT_DIR_ENV} or ./results)"
    )
    parser.add_argument("--seeds", type=int, default=None, help="number of Monte-Carlo seeds")
    parser.add_argument("--workers", type=int, default=None, help="worker processes")
    parser.add_argument("--scheme", action="append", default=None, help="restrict to scheme")
    parser.add_argument("overrides", nargs="*", help="key=value config overrides")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.preset, args.overrides)
        if args.seeds is not None:
            cfg.seeds = list(range(args.seeds))
        if args.workers is not None:
            cfg.workers = args.workers
        if args.scheme:
            cfg.schemes = args.scheme
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out_dir = args.out or os.environ.get(OUTPUT_DIR_ENV) or "results"
    try:
        return run_experiment(cfg, out_dir)
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
