"""Figure rendering for sweep outputs (headless matplotlib)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .runner import _point_key  # noqa: E402

_MARKERS = ("o", "s", "^", "d", "v", "x")


def render_figures(result, out_dir) -> list:
    """Mean-power and feasibility-rate plots, one pair per swept axis."""
    written = []
    points = result.summary["points"]
    cfg = result.config
    for axis in result.grid_fields:
        values = sorted(set(r.grid[axis] for r in result.records))
        if len(values) < 2:
            continue
        other = [a for a in result.grid_fields if a != axis]
        contexts = sorted(set(tuple((a, r.grid[a]) for a in other)
                              for r in result.records))
        for metric, ylabel, fname in (
                ("mean_power_dbm", "mean transmit power (dBm)", f"power_vs_{axis}.png"),
                ("feasibility_rate", "feasibility rate", f"feasibility_vs_{axis}.png")):
            fig, ax = plt.subplots(figsize=(6.0, 4.0))
            idx = 0
            for ctx in contexts:
                ctx_d = dict(ctx)
                suffix = "".join(f", {a}={ctx_d[a]}" for a in other)
                for scheme in cfg.schemes:
                    ys = []
                    for v in values:
                        key = _point_key({axis: v, **ctx_d}, result.grid_fields)
                        cell = points.get(key, {}).get(scheme)
                        ys.append(cell.get(metric) if cell else None)
                    xs = [v for v, y in zip(values, ys) if y is not None]
                    ys = [y for y in ys if y is not None]
                    if not xs:
                        continue
                    ax.plot(xs, ys, marker=_MARKERS[idx % len(_MARKERS)],
                            label=f"{scheme}{suffix}")
                    idx += 1
            ax.set_xlabel(axis)
            ax.set_ylabel(ylabel)
            ax.grid(True, alpha=0.4)
            if idx:
                ax.legend(fontsize=8)
            fig.tight_layout()
            path = os.path.join(out_dir, fname)
            fig.savefig(path, dpi=120, metadata={"Software": "irscr"})
            plt.close(fig)
            written.append(path)
    return written
