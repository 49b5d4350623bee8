"""Lowering to real cone data and the embedded interior-point solve.

The numerical engine is Clarabel, driven through the standard form

    min q'x  s.t.  A x + s = b,  s in K,

with K a product of zero, nonnegative, second-order and PSD-triangle cones.
All data assembly here is deterministic: constraint blocks are emitted in
insertion order and the engine runs single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

import clarabel

from ..errors import MalformedProgramError, NumericalFailureError
from .program import Affine, ConicProgram

_SQRT2 = np.sqrt(2.0)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class SolveResult:
    """Outcome of one conic solve."""

    status: str
    values: dict = field(default_factory=dict)
    objective: float | None = None
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    raw_status: str = ""


def _resolve(expr, program):
    """Dense complex Jacobian over the full real coordinate vector."""
    m = expr.size if expr.shape else 1
    J = np.zeros((m, program.n_real), dtype=complex)
    for name, mat in expr.coeffs.items():
        blk = program.blocks[name]
        J[:, blk.offset:blk.offset + blk.rdim] += mat
    return J, expr.const.copy()


def _prune_zero_rows(J, c, keep_mask_floor=None):
    mask = ~((np.all(J == 0, axis=1)) & (c == 0))
    if keep_mask_floor is not None:
        mask |= keep_mask_floor
    return J[mask], c[mask]


def _real_rows_eq(J, c):
    Jr, cr = J.real, c.real
    Ji, ci = _prune_zero_rows(J.imag, c.imag)
    return np.vstack([Jr, Ji]), np.concatenate([cr, ci])


def _real_rows_soc(J, c):
    # row 0 is the cone head t, already real; stack [t; Re u; Im u] and
    # drop u rows that are exactly zero.
    head_J, head_c = J[:1].real, c[:1].real
    uJ, uc = J[1:], c[1:]
    re_J, re_c = _prune_zero_rows(uJ.real, uc.real)
    im_J, im_c = _prune_zero_rows(uJ.imag, uc.imag)
    Jout = np.vstack([head_J, re_J, im_J])
    cout = np.concatenate([head_c, re_c, im_c])
    if Jout.shape[0] < 2:  # degenerate ||0|| <= t; keep one explicit zero row
        Jout = np.vstack([Jout, np.zeros((1, Jout.shape[1]))])
        cout = np.concatenate([cout, [0.0]])
    return Jout, cout


def _embed_real(J, c, n):
    """[Re M, -Im M; Im M, Re M] row map for a complex Hermitian block."""
    two = 2 * n
    Jout = np.zeros((two * two, J.shape[1]))
    cout = np.zeros(two * two)
    for j in range(n):
        for i in range(n):
            src = i + j * n
            re_J, re_c = J[src].real, c[src].real
            im_J, im_c = J[src].imag, c[src].imag
            for di, dj, sgn, part_J, part_c in (
                (i, j, 1.0, re_J, re_c),
                (i + n, j + n, 1.0, re_J, re_c),
                (i, j + n, -1.0, im_J, im_c),
                (i + n, j, 1.0, im_J, im_c),
            ):
                dest = di + dj * two
                Jout[dest] = sgn * part_J
                cout[dest] = sgn * part_c
    return Jout, cout


def _svec_rows(J, c, n):
    """Scaled upper-triangle (column-major) rows of a symmetric matrix map."""
    rows = []
    consts = []
    for j in range(n):
        for i in range(j + 1):
            src = i + j * n
            scale = 1.0 if i == j else _SQRT2
            rows.append(scale * J[src])
            consts.append(scale * c[src])
    return np.array(rows), np.array(consts)


def _lowered_blocks(program):
    """Per-constraint real cone data: list of (kind, J, c, cone_dim)."""
    out = []
    for blk in program.constraints:
        J, c = _resolve(blk.expr, program)
        if blk.kind == "eq":
            Jr, cr = _real_rows_eq(J, c)
            out.append(("eq", Jr, cr, Jr.shape[0]))
        elif blk.kind == "ineq":
            out.append(("ineq", J.real, c.real, J.shape[0]))
        elif blk.kind == "soc":
            Jr, cr = _real_rows_soc(J, c)
            out.append(("soc", Jr, cr, Jr.shape[0]))
        elif blk.kind == "psd":
            n = blk.expr.shape[0]
            if blk.domain == "complex":
                Jr, cr = _embed_real(J, c, n)
                side = 2 * n
            else:
                if np.max(np.abs(J.imag), initial=0.0) > 1e-9 or np.max(np.abs(c.imag), initial=0.0) > 1e-9:
                    raise MalformedProgramError("real PSD block has complex data")
                Jr, cr, side = J.real, c.real, n
            Js, cs = _svec_rows(Jr, cr, side)
            out.append(("psd", Js, cs, side))
        else:  # pragma: no cover
            raise MalformedProgramError(f"unknown constraint kind {blk.kind!r}")
    return out


def lower_complex(program: ConicProgram) -> ConicProgram:
    """Return an equivalent all-real program.

    Complex vector blocks become real blocks of twice the length ([Re; Im]);
    Hermitian blocks become their real parameter vectors; complex Hermitian
    PSD constraints become real symmetric PSD blocks of doubled side via the
    [Re, -Im; Im, Re] embedding.  Objective value is preserved exactly.
    """
    low = ConicProgram()
    for blk in program.blocks.values():
        if blk.kind == "real":
            low.add_real(blk.name, blk.shape)
        else:
            low.add_real(blk.name, (blk.rdim,))
    if low.n_real != program.n_real:  # pragma: no cover
        raise MalformedProgramError("lowering changed the coordinate space")

    def to_affine(J, c, shape=None):
        coeffs = {}
        for b in low.blocks.values():
            sub = J[:, b.offset:b.offset + b.rdim]
            if np.any(sub != 0):
                coeffs[b.name] = sub.astype(complex)
        return Affine(low, shape if shape is not None else (J.shape[0],), coeffs, c.astype(complex))

    for (kind, J, c, dim), blk in zip(_lowered_blocks(program), program.constraints):
        if kind == "eq":
            low.add_eq(to_affine(J, c), label=blk.label)
        elif kind == "ineq":
            low.add_ineq(to_affine(J, c), label=blk.label)
        elif kind == "soc":
            expr = to_affine(J, c)
            low.add_soc(expr[0], expr[1:], label=blk.label)
        else:  # psd: J, c here are svec rows; rebuild the full symmetric map
            n = dim
            full_J = np.zeros((n * n, J.shape[1]))
            full_c = np.zeros(n * n)
            k = 0
            for j in range(n):
                for i in range(j + 1):
                    scale = 1.0 if i == j else 1.0 / _SQRT2
                    for (ii, jj) in ((i, j), (j, i)):
                        full_J[ii + jj * n] = scale * J[k]
                        full_c[ii + jj * n] = scale * c[k]
                    k += 1
            low.add_psd(to_affine(full_J, full_c, (n, n)), label=blk.label, domain="real")

    if program.objective is not None:
        Jo, co = _resolve(program.objective, program)
        low.minimize(to_affine(Jo.real, co.real, ()))
    return low


_STATUS_MAP = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}


def solve(program: ConicProgram, tol: float = 1e-8) -> SolveResult:
    """Solve a conic program, lowering complex data internally.

    ``tol`` drives the engine's feasibility and duality-gap tolerances and
    must lie in (0, 1e-2].  The call is deterministic for identical inputs.
    """
    if not (0.0 < tol <= 1e-2):
        raise ValueError("tol must be in (0, 1e-2]")
    if program.objective is None:
        raise MalformedProgramError("program has no objective")

    blocks = _lowered_blocks(program)
    n = program.n_real
    A_parts = []
    b_parts = []
    cones = []
    for kind, J, c, dim in blocks:
        # s = b - A x must land in the cone; our exprs are "J x + c in cone".
        A_parts.append(-J)
        b_parts.append(c)
        if kind == "eq":
            cones.append(clarabel.ZeroConeT(J.shape[0]))
        elif kind == "ineq":
            cones.append(clarabel.NonnegativeConeT(J.shape[0]))
        elif kind == "soc":
            cones.append(clarabel.SecondOrderConeT(J.shape[0]))
        else:
            cones.append(clarabel.PSDTriangleConeT(dim))

    if A_parts:
        A = sparse.csc_matrix(np.vstack(A_parts))
        b = np.concatenate(b_parts)
    else:
        A = sparse.csc_matrix((0, n))
        b = np.zeros(0)

    Jo, co = _resolve(program.objective, program)
    q = Jo.real.ravel()
    c0 = float(co.real[0])

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_threads = 1
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol

    solver = clarabel.DefaultSolver(sparse.csc_matrix((n, n)), q, A, b, cones, settings)
    sol = solver.solve()
    raw = str(sol.status)
    status = _STATUS_MAP.get(raw, NUMERICAL_FAILURE)

    result = SolveResult(status=status, raw_status=raw, iterations=int(sol.iterations))
    if status == OPTIMAL:
        x = np.asarray(sol.x)
        result.values = _extract_values(program, x)
        result.objective = float(q @ x + c0)
        gap = abs(float(sol.obj_val) - float(sol.obj_val_dual))
        result.residuals = {
            "primal": float(sol.r_prim),
            "dual": float(sol.r_dual),
            "gap": gap / max(1.0, abs(float(sol.obj_val))),
        }
    return result


def _extract_values(program, x):
    values = {}
    for blk in program.blocks.values():
        seg = x[blk.offset:blk.offset + blk.rdim]
        if blk.kind == "real":
            values[blk.name] = seg.reshape(blk.shape, order="F") if blk.shape else float(seg[0])
        elif blk.kind == "complex":
            size = blk.rdim // 2
            z = seg[:size] + 1j * seg[size:]
            values[blk.name] = z.reshape(blk.shape, order="F") if blk.shape else complex(z[0])
        else:  # hermitian
            nmat = blk.shape[0]
            values[blk.name] = _hermitian_from_params(seg, nmat)
    return values


def _hermitian_from_params(params, n):
    out = np.zeros((n, n), dtype=complex)
    nut = n * (n - 1) // 2
    out[np.diag_indices(n)] = params[:n]
    k = 0
    for j in range(n):
        for i in range(j):
            v = params[n + k] + 1j * params[n + nut + k]
            out[i, j] = v
            out[j, i] = np.conj(v)
            k += 1
    return out


def real_coordinates(program, values):
    """Inverse of value extraction: full real vector from per-block values."""
    x = np.zeros(program.n_real)
    for blk in program.blocks.values():
        if blk.name not in values:
            raise NumericalFailureError(f"missing value for block {blk.name!r}")
        v = values[blk.name]
        if blk.kind == "real":
            x[blk.offset:blk.offset + blk.rdim] = np.asarray(v).ravel(order="F")
        elif blk.kind == "complex":
            z = np.asarray(v, dtype=complex).ravel(order="F")
            size = blk.rdim // 2
            x[blk.offset:blk.offset + size] = z.real
            x[blk.offset + size:blk.offset + blk.rdim] = z.imag
        else:
            mat = np.asarray(v, dtype=complex)
            n = blk.shape[0]
            nut = n * (n - 1) // 2
            seg = np.zeros(blk.rdim)
            seg[:n] = mat[np.diag_indices(n)].real
            k = 0
            for j in range(n):
                for i in range(j):
                    seg[n + k] = mat[i, j].real
                    seg[n + nut + k] = mat[i, j].imag
                    k += 1
            x[blk.offset:blk.offset + blk.rdim] = seg
    return x
