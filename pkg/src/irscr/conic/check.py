"""Independent verification of solver output and a text dump for cross-checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .program import _data_norm
from .solver import OPTIMAL, _lowered_blocks, real_coordinates


@dataclass
class ConstraintViolation:
    index: int
    kind: str
    label: str
    violation: float
    scaled: float


@dataclass
class ViolationReport:
    entries: list
    tol: float

    @property
    def max_scaled(self):
        return max((e.scaled for e in self.entries), default=0.0)

    @property
    def worst(self):
        return max(self.entries, key=lambda e: e.scaled, default=None)

    @property
    def passes(self):
        return self.max_scaled <= self.tol


def block_coordinates(program, values):
    x = real_coordinates(program, values)
    return {name: x[blk.offset:blk.offset + blk.rdim] for name, blk in program.blocks.items()}


def check_solution(program, result, tol: float = 1e-6) -> ViolationReport:
    """Evaluate every constraint at the reported primal point.

    Violations are normalized by each block's data magnitude (never below 1),
    so the report is an absolute check after scaling by constraint norm.
    """
    if result.status != OPTIMAL:
        raise ValueError("check_solution requires an optimal result")
    coords = block_coordinates(program, result.values)
    entries = []
    for idx, blk in enumerate(program.constraints):
        val = blk.expr.value(coords)
        if blk.kind == "eq":
            viol = float(np.max(np.abs(val))) if np.size(val) else 0.0
        elif blk.kind == "ineq":
            viol = float(max(0.0, -np.min(np.real(val)))) if np.size(val) else 0.0
        elif blk.kind == "soc":
            v = np.atleast_1d(val)
            viol = float(max(0.0, np.linalg.norm(v[1:]) - np.real(v[0])))
        else:  # psd
            mat = np.asarray(val)
            mat = 0.5 * (mat + mat.conj().T)
            lam = np.linalg.eigvalsh(mat)
            viol = float(max(0.0, -lam[0]))
        scale = max(1.0, _data_norm(blk.expr))
        entries.append(ConstraintViolation(idx, blk.kind, blk.label, viol, viol / scale))
    return ViolationReport(entries, tol)


def dump_program(program, stream) -> None:
    """Write the lowered (all-real) cone data, one constraint block per record.

    Row format: ``row <i> const=<c> :: <col>=<coef> ...`` over the program's
    global real coordinate vector.  Intended for cross-checking a model
    against an external solver, not for speed.
    """
    stream.write("conic-program-dump v1\n")
    stream.write(f"coords {program.n_real}\n")
    for blk in program.blocks.values():
        shape = "x".join(str(s) for s in blk.shape) or "scalar"
        stream.write(f"var {blk.name} kind={blk.kind} shape={shape} "
                     f"offset={blk.offset} rdim={blk.rdim}\n")
    if program.objective is not None:
        from .solver import _resolve

        J, c = _resolve(program.objective, program)
        stream.write("objective minimize\n")
        _write_row(stream, 0, J.real[0], float(c.real[0]))
    for idx, ((kind, J, c, dim), blk) in enumerate(
            zip(_lowered_blocks(program), program.constraints)):
        extra = f" side={dim}" if kind == "psd" else ""
        stream.write(f"block {idx} kind={kind} rows={J.shape[0]}{extra} label={blk.label}\n")
        for i in range(J.shape[0]):
            _write_row(stream, i, J[i], float(c[i]))


def _write_row(stream, i, row, const):
    nz = np.nonzero(row)[0]
    cols = " ".join(f"{j}={row[j]!r}" for j in nz)
    stream.write(f"  row {i} const={const!r} :: {cols}\n")
