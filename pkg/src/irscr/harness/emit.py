"""Result emission: per-record CSV, summary JSON, plot-ready CSVs, solutions."""

from __future__ import annotations

import json
import os

import numpy as np

from ..channels import Scenario
from ..errors import ConfigError
from .runner import ExperimentResult, _point_key

CSV_TAIL = ["scheme", "feasible", "iterations", "power_dbm", "runtime_ms",
            "mc_outage", "wc_margin", "rank_ratio"]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def records_csv_text(result: ExperimentResult) -> str:
    cfg = result.config
    header = ["realization_id", *result.grid_fields, *CSV_TAIL]
    lines = [",".join(header)]
    for r in result.records:
        runtime = r.runtime_ms if (cfg is not None and cfg.record_runtime) else 0.0
        row = [str(r.realization_id)]
        row += [_fmt(r.grid[a]) for a in result.grid_fields]
        row += [r.scheme, _fmt(r.feasible), str(r.iterations),
                _fmt(r.power_dbm), _fmt(float(runtime)), _fmt(r.mc_outage),
                _fmt(r.wc_margin), _fmt(r.rank_ratio)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def plot_csv_texts(result: ExperimentResult) -> dict:
    """One plot-ready CSV per swept axis: x plus per-line mean power / rate."""
    out = {}
    cfg = result.config
    points = result.summary["points"]
    for axis in result.grid_fields:
        values = sorted(set(r.grid[axis] for r in result.records))
        other = [a for a in result.grid_fields if a != axis]
        contexts = sorted(set(tuple((a, r.grid[a]) for a in other) for r in result.records))
        cols = []
        for ctx in contexts:
            ctx_d = dict(ctx)
            suffix = "".join(f"|{a}={ctx_d[a]}" for a in other)
            for scheme in cfg.schemes:
                series_p, series_f = [], []
                for v in values:
                    key = _point_key({axis: v, **ctx_d}, result.grid_fields)
                    cell = points.get(key, {}).get(scheme)
                    series_p.append(cell["mean_power_dbm"] if cell else None)
                    series_f.append(cell["feasibility_rate"] if cell else None)
                cols.append((f"{scheme}{suffix}|power_dbm", series_p))
                cols.append((f"{scheme}{suffix}|feasibility_rate", series_f))
        header = [axis] + [name for name, _ in cols]
        lines = [",".join(header)]
        for i, v in enumerate(values):
            lines.append(",".join([_fmt(v)] + [_fmt(series[i]) for _, series in cols]))
        out[axis] = "\n".join(lines) + "\n"
    return out


def summary_json_text(result: ExperimentResult) -> str:
    return json.dumps(result.summary, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _complex_pairs(a):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def solution_file_dict(scenario, model, W, phi, scheme) -> dict:
    doc = {
        "format": "irscr-solution-v1",
        "scheme": scheme,
        "scenario": scenario.to_json_dict(),
        "scenario_sha256": scenario.digest(),
        "W": _complex_pairs(W),
        "phi": _complex_pairs(phi),
        "uncertainty": {
            "mode": model.mode,
            "beta": np.asarray(model.beta).tolist(),
            "eps_d": None if model.eps_d is None else np.asarray(model.eps_d).tolist(),
            "eps_r": None if model.eps_r is None else np.asarray(model.eps_r).tolist(),
            "covariances": [
                {
                    "sigma2_gd": cov.sigma2_gd,
                    "sigma2_gr": cov.sigma2_gr,
                    "sqrt_gd": _complex_pairs(cov.sqrt_gd),
                    "sqrt_gr": _complex_pairs(cov.sqrt_gr),
                }
                for cov in model.covariances
            ],
        },
    }
    return doc


def load_solution_file(path):
    from ..channels import CovarianceModel, UncertaintyModel

    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "irscr-solution-v1":
        raise ConfigError("not an irscr solution file")

    def unc(a):
        arr = np.asarray(a, dtype=float)
        return arr[..., 0] + 1j * arr[..., 1]

    scenario = Scenario.from_json_dict(doc["scenario"])
    if scenario.digest() != doc["scenario_sha256"]:
        raise ConfigError("scenario hash mismatch")
    unc_doc = doc["uncertainty"]
    covs = []
    for c in unc_doc["covariances"]:
        sqrt_gd = unc(c["sqrt_gd"])
        sqrt_gr = unc(c["sqrt_gr"])
        covs.append(CovarianceModel(
            sigma2_gd=float(c["sigma2_gd"]), sigma2_gr=float(c["sigma2_gr"]),
            sqrt_gd=sqrt_gd, sqrt_gr=sqrt_gr,
            sigma_gd=sqrt_gd @ sqrt_gd.conj().T, sigma_gr=sqrt_gr @ sqrt_gr.conj().T))
    model = UncertaintyModel(
        mode=unc_doc["mode"], covariances=covs,
        beta=np.asarray(unc_doc["beta"], dtype=float),
        eps_d=None if unc_doc["eps_d"] is None else np.asarray(unc_doc["eps_d"], dtype=float),
        eps_r=None if unc_doc["eps_r"] is None else np.asarray(unc_doc["eps_r"], dtype=float))
    W = unc(doc["W"])
    phi = unc(doc["phi"])
    return scenario, model, W, phi, doc["scheme"]


def emit_results(result: ExperimentResult, out_dir: str) -> list:
    """Write all output files; refuses to write anything for empty results."""
    if not result.records:
        raise ConfigError("no records to emit; refusing to write partial outputs")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "records.csv")
    with open(path, "w") as fh:
        fh.write(records_csv_text(result))
    written.append(path)

    path = os.path.join(out_dir, "summary.json")
    with open(path, "w") as fh:
        fh.write(summary_json_text(result))
    written.append(path)

    for axis, text in plot_csv_texts(result).items():
        path = os.path.join(out_dir, f"plot_{axis}.csv")
        with open(path, "w") as fh:
            fh.write(text)
        written.append(path)

    cfg = result.config
    if cfg is not None and cfg.figures and result.grid_fields:
        from .figures import render_figures

        written.extend(render_figures(result, out_dir))

    if cfg is not None and cfg.save_solutions:
        sol_dir = os.path.join(out_dir, "solutions")
        os.makedirs(sol_dir, exist_ok=True)
        for rec in result.records:
            if not rec.feasible or rec.solution is None:
                continue
            cfg_point = cfg.point_params(rec.grid)
            from .runner import build_scenario

            scenario, bounded, statistical = build_scenario(cfg_point, rec.realization_id)
            model = bounded if rec.scheme == "SCD" else statistical
            name = f"solution_{_point_key(rec.grid, result.grid_fields)}_{rec.realization_id}_{rec.scheme}.json"
            name = name.replace("|", "_").replace("=", "-")
            path = os.path.join(sol_dir, name)
            with open(path, "w") as fh:
                json.dump(solution_file_dict(scenario, model, rec.solution.W,
                                             rec.solution.phi, rec.scheme), fh, indent=1)
            written.append(path)
    return written
