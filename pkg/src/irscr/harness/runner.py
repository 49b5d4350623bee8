"""Experiment orchestration: seeded sweeps, scheme dispatch, summaries."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..channels import (
    CorrelationSpec,
    build_uncertainty_models,
    dbm_to_watt,
    generate_scenario,
    watt_to_dbm,
)
from ..errors import (
    BootstrapInfeasibleError,
    CcpStalledError,
    NumericalFailureError,
    RankOneViolationError,
    SubproblemInfeasibleError,
)
from ..feasibility import check_feasibility_scd, check_feasibility_sta
from ..scd import run_bcd_scd
from ..sta import run_bcd_sta
from .benchmarks import benchmark_noirs, benchmark_prephase, benchmark_randphase
from .config import ExperimentConfig
from .oracles import certify_solution

_SOFT_FAILURES = (BootstrapInfeasibleError, SubproblemInfeasibleError,
                  RankOneViolationError, CcpStalledError, NumericalFailureError)


@dataclass
class RealizationRecord:
    realization_id: int
    grid: dict
    scheme: str
    feasible: bool
    iterations: int = 0
    power_w: float | None = None
    runtime_ms: float = 0.0
    mc_outage: float | None = None
    wc_margin: float | None = None
    rank_ratio: float | None = None
    cert_pass: bool | None = None
    note: str = ""
    solution: object = None   # BeamformingSolution when kept; not serialized to CSV

    @property
    def power_dbm(self):
        if self.power_w is None or self.power_w <= 0:
            return None
        return float(watt_to_dbm(self.power_w))


@dataclass
class ExperimentResult:
    records: list
    summary: dict
    grid_fields: list
    config: ExperimentConfig = None


def _seeded_rng(*key):
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def build_scenario(cfg: ExperimentConfig, realization_id: int):
    geo = cfg.geometry
    if cfg.pr_x is not None:
        geo = replace(geo, pr_position=(float(cfg.pr_x), geo.pr_position[1]))
    if cfg.irs_x is not None:
        geo = replace(geo, irs_position=(float(cfg.irs_x), geo.irs_position[1]))
    seed = np.random.SeedSequence([int(cfg.seed), 0, int(realization_id)])
    scenario = generate_scenario(
        geo, cfg.m_antennas, cfg.n_elements, cfg.k_users, cfg.n_prs,
        [cfg.rate] * cfg.k_users, [dbm_to_watt(cfg.gamma_dbm)] * cfg.n_prs, seed)
    spec = CorrelationSpec(cfg.c_eta, cfg.delta_g)
    bounded, statistical = build_uncertainty_models(scenario, spec, cfg.beta)
    return scenario, bounded, statistical


def _run_scheme(scheme, cfg, scenario, bounded, statistical, rid, feasibility_only):
    opts = cfg.algorithm
    init_rng = _seeded_rng(cfg.seed, 1, rid)
    bench_rng = _seeded_rng(cfg.seed, 2, rid)
    oracle_rng = _seeded_rng(cfg.seed, 3, rid, list(cfg.schemes).index(scheme))
    note = ""
    t0 = time.perf_counter()
    from ..solution import BeamformingSolution

    try:
        if scheme in ("SCD", "STA"):
            checker = check_feasibility_scd if scheme == "SCD" else check_feasibility_sta
            model = bounded if scheme == "SCD" else statistical
            verdict = checker(scenario, model, opts, init_rng)
            if cfg.exhaustive_init and not verdict.feasible:
                for _ in range(cfg.exhaustive_init):
                    retry = checker(scenario, model, opts, init_rng)
                    if retry.feasible:
                        verdict, note = retry, "false-infeasible"
                        break
            if not verdict.feasible:
                return _infeasible_record(rid, scheme, verdict.iterations, t0, note)
            if feasibility_only:
                sol = BeamformingSolution(
                    W=verdict.init_W, phi=verdict.init_phi,
                    iterations=verdict.iterations, scheme=scheme,
                    rank_ratio=verdict.rank_ratio)
            elif scheme == "SCD":
                sol = run_bcd_scd(scenario, model, opts, (verdict.init_W, verdict.init_phi))
            else:
                sol = run_bcd_sta(scenario, model, opts, (verdict.init_W, verdict.init_phi))
                sol.rank_ratio = max(sol.rank_ratio, verdict.rank_ratio)
            cert = certify_solution(scenario, model, sol.W, sol.phi,
                                    cfg.mc_samples, oracle_rng)
        else:
            if scheme == "NoIRS-STA":
                sol = benchmark_noirs(scenario, statistical, opts)
            elif scheme == "Prephase-STA":
                sol = benchmark_prephase(scenario, statistical, opts)
            else:  # RandPhase-STA
                sol = benchmark_randphase(scenario, statistical, opts, bench_rng)
            cert = certify_solution(scenario, statistical, sol.W, sol.phi,
                                    cfg.mc_samples, oracle_rng)
    except _SOFT_FAILURES as exc:
        rec = _infeasible_record(rid, scheme, 0, t0, f"{type(exc).__name__}: {exc}")
        return rec

    runtime_ms = (time.perf_counter() - t0) * 1000.0
    return RealizationRecord(
        realization_id=rid, grid={}, scheme=scheme, feasible=True,
        iterations=sol.iterations,
        power_w=float(np.linalg.norm(sol.W, "fro") ** 2),
        runtime_ms=runtime_ms, mc_outage=cert["mc_outage"],
        wc_margin=cert["wc_margin"],
        rank_ratio=sol.rank_ratio if scheme != "SCD" else None,
        cert_pass=cert["pass"], note=note, solution=sol)


def _infeasible_record(rid, scheme, iters, t0, note):
    return RealizationRecord(
        realization_id=rid, grid={}, scheme=scheme, feasible=False,
        iterations=iters, runtime_ms=(time.perf_counter() - t0) * 1000.0, note=note)


def _run_task(args):
    cfg, point, rid, feasibility_only = args
    cfg_point = cfg.point_params(point)
    scenario, bounded, statistical = build_scenario(cfg_point, rid)
    records = []
    for scheme in cfg.schemes:
        rec = _run_scheme(scheme, cfg_point, scenario, bounded, statistical,
                          rid, feasibility_only)
        rec.grid = dict(point)
        records.append(rec)
    return records


def run_experiment(cfg: ExperimentConfig, feasibility_only: bool = False) -> ExperimentResult:
    """Execute the full sweep; deterministic for a fixed (config, seed)."""
    points = cfg.grid_points()
    tasks = [(cfg, point, rid, feasibility_only)
             for point in points for rid in range(cfg.realizations)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    grid_fields = list(cfg.sweep.keys())
    records.sort(key=lambda r: ([r.grid[a] for a in grid_fields], r.realization_id,
                                list(cfg.schemes).index(r.scheme)))
    summary = summarize(records, cfg, grid_fields)
    return ExperimentResult(records=records, summary=summary,
                            grid_fields=grid_fields, config=cfg)


def _point_key(grid, grid_fields):
    return "|".join(f"{a}={grid[a]}" for a in grid_fields) if grid_fields else "default"


def summarize(records, cfg, grid_fields) -> dict:
    """Aggregate feasibility rates and power means per grid point and scheme."""
    per_point = {}
    for rec in records:
        key = _point_key(rec.grid, grid_fields)
        bucket = per_point.setdefault(key, {}).setdefault(rec.scheme, {
            "n": 0, "feasible": 0, "powers_w": [], "iterations": [],
            "cert_failures": 0, "false_infeasible": 0, "max_rank_ratio": 0.0,
        })
        bucket["n"] += 1
        if rec.feasible:
            bucket["feasible"] += 1
            bucket["powers_w"].append(rec.power_w)
            bucket["iterations"].append(rec.iterations)
            if rec.cert_pass is False:
                bucket["cert_failures"] += 1
            if rec.rank_ratio is not None:
                bucket["max_rank_ratio"] = max(bucket["max_rank_ratio"], rec.rank_ratio)
        if rec.note == "false-infeasible":
            bucket["false_infeasible"] += 1

    summary_points = {}
    for key, schemes in per_point.items():
        summary_points[key] = {}
        for scheme, b in schemes.items():
            powers = b.pop("powers_w")
            iters = b.pop("iterations")
            b["feasibility_rate"] = b["feasible"] / b["n"]
            b["mean_power_w"] = float(np.mean(powers)) if powers else None
            b["mean_power_dbm"] = float(watt_to_dbm(np.mean(powers))) if powers else None
            b["mean_iterations"] = float(np.mean(iters)) if iters else None
            summary_points[key][scheme] = b

    return {
        "points": summary_points,
        "trends": evaluate_trends(records, cfg, grid_fields),
        "total_records": len(records),
        "cert_failures": sum(1 for r in records if r.cert_pass is False),
    }


def evaluate_trends(records, cfg, grid_fields) -> list:
    """Soft monotonicity checks along each swept axis (reported, not fatal)."""
    trends = []
    for axis in grid_fields:
        values = sorted(set(r.grid[axis] for r in records))
        if len(values) < 2:
            continue
        other = [a for a in grid_fields if a != axis]
        contexts = sorted(set(tuple((a, r.grid[a]) for a in other) for r in records))
        for ctx in contexts:
            ctx_d = dict(ctx)
            for scheme in cfg.schemes:
                rates, powers = [], []
                for v in values:
                    sel = [r for r in records
                           if r.scheme == scheme and r.grid[axis] == v
                           and all(r.grid[a] == ctx_d[a] for a in other)]
                    if not sel:
                        rates.append(None)
                        powers.append(None)
                        continue
                    rates.append(sum(r.feasible for r in sel) / len(sel))
                    pw = [r.power_w for r in sel if r.feasible]
                    powers.append(float(np.mean(pw)) if pw else None)
                trends.append({
                    "axis": axis, "scheme": scheme, "context": ctx_d,
                    "metric": "feasibility_rate", "values": rates,
                    "monotone_nonincreasing": _nonincreasing(rates),
                })
                trends.append({
                    "axis": axis, "scheme": scheme, "context": ctx_d,
                    "metric": "mean_power_w", "values": powers,
                    "monotone_nonincreasing": _nonincreasing(powers),
                })
    return trends


def _nonincreasing(seq, rel_slack=1e-9):
    vals = [v for v in seq if v is not None]
    return all(b <= a * (1.0 + rel_slack) + 1e-15 for a, b in zip(vals, vals[1:]))
