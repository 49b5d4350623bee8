"""Conic-program builder with complex variables and affine expressions.

A :class:`ConicProgram` owns named variable blocks (real vectors, complex
vectors/matrices, Hermitian matrices), one linear objective and a list of
constraint blocks (linear equality/inequality, second-order cone, positive
semidefinite).  Complex quantities are expressed directly; every complex
affine map is lowered to the program's real parameter vector, so the solver
only ever sees real data.

Variable lowering conventions
    real block of shape ``s``        -> ``prod(s)`` real coordinates
    complex block of shape ``s``     -> ``2*prod(s)`` coordinates, [Re; Im]
    Hermitian block of size ``n``    -> ``n*n`` coordinates laid out as
                                        [diag; Re upper (col-major); Im upper]

An :class:`Affine` stores, per referenced block, a dense complex Jacobian
over that block's real coordinates plus a complex constant, with matrix
entries vectorized column-major.  ``value = sum(J_b @ x_b) + const``.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatchError, MalformedProgramError

_HERMITIAN_SKEW_TOL = 1e-9


def _size(shape):
    out = 1
    for s in shape:
        out *= int(s)
    return out


def _as_shape(shape):
    if shape is None:
        return ()
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)


class VariableBlock:
    """Descriptor of one named variable block."""

    __slots__ = ("name", "kind", "shape", "offset", "rdim")

    def __init__(self, name, kind, shape, offset, rdim):
        self.name = name
        self.kind = kind  # "real" | "complex" | "hermitian"
        self.shape = shape
        self.offset = offset
        self.rdim = rdim

    def __repr__(self):
        return f"VariableBlock({self.name!r}, {self.kind}, shape={self.shape}, rdim={self.rdim})"


class Affine:
    """Complex affine map over a program's real coordinates."""

    __slots__ = ("program", "shape", "coeffs", "const")

    # make ndarray <op> Affine defer to the reflected methods below
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, program, shape, coeffs, const):
        self.program = program
        self.shape = shape
        self.coeffs = coeffs  # {block name: complex (size, rdim)}
        self.const = const  # complex (size,)

    @property
    def size(self):
        return _size(self.shape)

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def constant(program, value):
        arr = np.asarray(value, dtype=complex)
        return Affine(program, arr.shape, {}, arr.ravel(order="F").copy())

    def _wrap(self, other):
        if isinstance(other, Affine):
            if other.program is not self.program:
                raise MalformedProgramError("expressions belong to different programs")
            return other
        return Affine.constant(self.program, other)

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = self._wrap(other)
        if other.shape != self.shape:
            if other.shape == () and self.shape != ():
                other = other.broadcast(self.shape)
            elif self.shape == () and other.shape != ():
                return other.__add__(self)
            else:
                raise DimensionMismatchError(f"add: {self.shape} vs {other.shape}")
        coeffs = {k: v.copy() for k, v in self.coeffs.items()}
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs[k] + v if k in coeffs else v.copy()
        return Affine(self.program, self.shape, coeffs, self.const + other.const)

    def broadcast(self, shape):
        """Broadcast a scalar expression to a constant-filled shape."""
        if self.shape != ():
            raise DimensionMismatchError("only scalars broadcast")
        n = _size(shape)
        ones = np.ones(n)
        coeffs = {k: ones[:, None] * v for k, v in self.coeffs.items()}
        return Affine(self.program, shape, coeffs, ones * self.const)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return self.__add__(self._wrap(other).__neg__())

    def __rsub__(self, other):
        return self.__neg__().__add__(other)

    def __neg__(self):
        return Affine(self.program, self.shape, {k: -v for k, v in self.coeffs.items()}, -self.const)

    def __mul__(self, scalar):
        if isinstance(scalar, Affine):
            raise MalformedProgramError("product of two expressions is not affine")
        s = complex(scalar)
        return Affine(self.program, self.shape, {k: s * v for k, v in self.coeffs.items()}, s * self.const)

    def __rmul__(self, scalar):
        return self.__mul__(scalar)

    def __truediv__(self, scalar):
        return self.__mul__(1.0 / complex(scalar))

    def conj(self):
        return Affine(
            self.program,
            self.shape,
            {k: np.conj(v) for k, v in self.coeffs.items()},
            np.conj(self.const),
        )

    def real(self):
        return Affine(
            self.program,
            self.shape,
            {k: v.real.astype(complex) for k, v in self.coeffs.items()},
            self.const.real.astype(complex),
        )

    def imag(self):
        return Affine(
            self.program,
            self.shape,
            {k: v.imag.astype(complex) for k, v in self.coeffs.items()},
            self.const.imag.astype(complex),
        )

    # -- shape manipulation ---------------------------------------------------

    def _row_index(self):
        return np.arange(self.size).reshape(self.shape, order="F")

    def _select(self, rows, shape):
        rows = np.asarray(rows).ravel(order="F")
        coeffs = {k: v[rows, :] for k, v in self.coeffs.items()}
        return Affine(self.program, shape, coeffs, self.const[rows])

    def __getitem__(self, key):
        sel = self._row_index()[key]
        sel = np.asarray(sel)
        return self._select(sel, sel.shape)

    @property
    def T(self):
        if len(self.shape) != 2:
            raise DimensionMismatchError("transpose needs a matrix")
        idx = self._row_index().T
        return self._select(idx, idx.shape)

    @property
    def H(self):
        return self.T.conj()

    def ravel(self):
        return self._select(np.arange(self.size), (self.size,))

    def reshape(self, shape):
        shape = _as_shape(shape)
        if _size(shape) != self.size:
            raise DimensionMismatchError("reshape size mismatch")
        return Affine(self.program, shape, dict(self.coeffs), self.const.copy())

    def sum(self):
        ones = np.ones((1, self.size), dtype=complex)
        coeffs = {k: ones @ v for k, v in self.coeffs.items()}
        return Affine(self.program, (), {k: v.reshape(1, -1) for k, v in coeffs.items()},
                      np.atleast_1d(ones @ self.const).ravel())

    def trace(self):
        if len(self.shape) != 2 or self.shape[0] != self.shape[1]:
            raise DimensionMismatchError("trace needs a square matrix")
        n = self.shape[0]
        rows = np.arange(n) * (n + 1)
        return self._select(rows, (n,)).sum()

    # -- products with constants ----------------------------------------------

    def __matmul__(self, other):
        """expr @ const."""
        if isinstance(other, Affine):
            raise MalformedProgramError("product of two expressions is not affine")
        other = np.asarray(other, dtype=complex)
        left_shape = self.shape if len(self.shape) == 2 else (1, self.size)
        p, q = left_shape
        if other.ndim == 1:
            if other.shape[0] != q:
                raise DimensionMismatchError("matmul inner dimension")
            oth = other[:, None]
            out_shape = (p,) if len(self.shape) == 2 else ()
        else:
            if other.shape[0] != q:
                raise DimensionMismatchError("matmul inner dimension")
            oth = other
            out_shape = (p, oth.shape[1])
        r = oth.shape[1]

        def transform(mat):
            cube = mat.reshape(p, q, -1, order="F")
            out = np.einsum("qr,pqn->prn", oth, cube)
            return out.reshape(p * r, -1, order="F")

        coeffs = {k: transform(v) for k, v in self.coeffs.items()}
        const = transform(self.const[:, None]).ravel()
        if out_shape == ():
            return Affine(self.program, (), {k: v.reshape(1, -1) for k, v in coeffs.items()}, const)
        return Affine(self.program, out_shape, coeffs, const)

    def __rmatmul__(self, other):
        """const @ expr."""
        other = np.asarray(other, dtype=complex)
        right_shape = self.shape if len(self.shape) == 2 else (self.size, 1)
        q, r = right_shape
        if other.ndim == 1:
            other = other[None, :]
            squeeze = True
        else:
            squeeze = False
        if other.shape[1] != q:
            raise DimensionMismatchError("matmul inner dimension")
        p = other.shape[0]

        def transform(mat):
            cube = mat.reshape(q, r, -1, order="F")
            out = np.einsum("pq,qrn->prn", other, cube)
            return out.reshape(p * r, -1, order="F")

        coeffs = {k: transform(v) for k, v in self.coeffs.items()}
        const = transform(self.const[:, None]).ravel()
        if squeeze and len(self.shape) == 1:
            return Affine(self.program, (r,) if r > 1 else (), coeffs, const) if r > 1 else Affine(
                self.program, (), {k: v.reshape(1, -1) for k, v in coeffs.items()}, const)
        if squeeze:
            return Affine(self.program, (r,), coeffs, const)
        if len(self.shape) == 1:
            return Affine(self.program, (p,), coeffs, const)
        return Affine(self.program, (p, r), coeffs, const)

    # -- evaluation -----------------------------------------------------------

    def value(self, values):
        """Evaluate at a {block name: per-block real coordinate vector} map."""
        out = self.const.copy()
        for name, mat in self.coeffs.items():
            out = out + mat @ values[name]
        return out.reshape(self.shape, order="F") if self.shape else out[0]


def scale_matrix(scalar_expr, matrix):
    """scalar expression times a constant matrix -> matrix expression."""
    matrix = np.asarray(matrix, dtype=complex)
    vec = matrix.ravel(order="F")
    coeffs = {k: vec[:, None] @ v.reshape(1, -1) for k, v in scalar_expr.coeffs.items()}
    const = vec * scalar_expr.const
    return Affine(scalar_expr.program, matrix.shape, coeffs, const)


def concat(exprs):
    """Stack scalar/vector expressions into one vector expression."""
    exprs = list(exprs)
    if not exprs:
        raise DimensionMismatchError("concat of nothing")
    prog = None
    for e in exprs:
        if isinstance(e, Affine):
            prog = e.program
            break
    if prog is None:
        raise MalformedProgramError("concat needs at least one expression")
    parts = [e.ravel() if isinstance(e, Affine) else Affine.constant(prog, np.atleast_1d(e)).ravel()
             for e in exprs]
    total = sum(p.size for p in parts)
    const = np.concatenate([p.const for p in parts])
    coeffs = {}
    offset = 0
    for p in parts:
        for k, v in p.coeffs.items():
            if k not in coeffs:
                coeffs[k] = np.zeros((total, v.shape[1]), dtype=complex)
            coeffs[k][offset:offset + p.size, :] += v
        offset += p.size
    return Affine(prog, (total,), coeffs, const)


def block_hermitian(program, grid):
    """Assemble a Hermitian matrix expression from a 2-D grid of entries.

    Entries may be Affine (scalar/vector/matrix), ndarray constants or
    scalars.  Scalars on diagonal cells of size > 1 are expanded as multiples
    of the identity.  The assembled matrix is checked for Hermitian symmetry
    of its affine map and symmetrized to remove round-off.
    """
    nrows = len(grid)
    ncols = len(grid[0])
    row_sz = [None] * nrows
    col_sz = [None] * ncols

    def entry_shape(e):
        if isinstance(e, Affine):
            if len(e.shape) == 2:
                return e.shape
            if len(e.shape) == 1:
                return (e.size, 1)
            return None  # scalar expression, size set by context
        arr = np.asarray(e)
        if arr.ndim == 2:
            return arr.shape
        if arr.ndim == 1:
            return (arr.shape[0], 1)
        return None  # scalar, size set by context

    for i in range(nrows):
        for j in range(ncols):
            sh = entry_shape(grid[i][j])
            if sh is None:
                continue
            if row_sz[i] is None:
                row_sz[i] = sh[0]
            elif row_sz[i] != sh[0]:
                raise DimensionMismatchError("inconsistent block row sizes")
            if col_sz[j] is None:
                col_sz[j] = sh[1]
            elif col_sz[j] != sh[1]:
                raise DimensionMismatchError("inconsistent block col sizes")
    for i in range(nrows):
        if row_sz[i] is None:
            row_sz[i] = col_sz[i]
    for j in range(ncols):
        if col_sz[j] is None:
            col_sz[j] = row_sz[j]
    if any(s is None for s in row_sz) or row_sz != col_sz:
        raise DimensionMismatchError("grid does not describe a square block matrix")

    n = sum(row_sz)
    roff = np.concatenate([[0], np.cumsum(row_sz)])
    rows_expr = []
    for i in range(nrows):
        for j in range(ncols):
            e = grid[i][j]
            sh = (row_sz[i], col_sz[j])
            if isinstance(e, Affine):
                if e.shape == ():
                    if sh == (1, 1):
                        ee = e.reshape((1, 1))
                    else:
                        if sh[0] != sh[1]:
                            raise DimensionMismatchError("scalar expression on non-square cell")
                        ee = scale_matrix(e, np.eye(sh[0]))
                elif len(e.shape) == 1:
                    ee = e.reshape((e.size, 1))
                    if ee.shape != sh:
                        raise DimensionMismatchError("vector cell shape mismatch")
                else:
                    ee = e
            else:
                arr = np.asarray(e, dtype=complex)
                if arr.ndim == 0:
                    if sh[0] == sh[1]:
                        arr = arr * np.eye(sh[0])
                    elif arr == 0:
                        arr = np.zeros(sh)
                    else:
                        raise DimensionMismatchError("scalar constant on non-square cell")
                elif arr.ndim == 1:
                    arr = arr[:, None]
                if arr.shape != sh:
                    raise DimensionMismatchError(f"cell ({i},{j}) shape {arr.shape} != {sh}")
                ee = Affine.constant(program, arr)
            rows_expr.append(((i, j), ee))

    total = n * n
    const = np.zeros(total, dtype=complex)
    coeffs = {}
    for (i, j), ee in rows_expr:
        ri = np.arange(roff[i], roff[i] + row_sz[i])
        cj = np.arange(roff[j], roff[j] + col_sz[j])
        dest = (ri[:, None] + n * cj[None, :]).ravel(order="F")
        const[dest] += ee.const
        for k, v in ee.coeffs.items():
            if k not in coeffs:
                coeffs[k] = np.zeros((total, v.shape[1]), dtype=complex)
            coeffs[k][dest, :] += v
    out = Affine(program, (n, n), coeffs, const)
    return hermitize(out)


def hermitize(expr):
    """Average a square matrix expression with its conjugate transpose.

    Raises if the skew part is larger than round-off allows.
    """
    h = expr.H
    scale = max(1.0, _data_norm(expr))
    skew = expr - h
    if _data_norm(skew) > _HERMITIAN_SKEW_TOL * scale:
        raise MalformedProgramError("matrix expression is not Hermitian-symmetric")
    return (expr + h) * 0.5


def _data_norm(expr):
    m = float(np.max(np.abs(expr.const))) if expr.const.size else 0.0
    for v in expr.coeffs.values():
        if v.size:
            m = max(m, float(np.max(np.abs(v))))
    return m


class ConstraintBlock:
    """One conic constraint: kind, affine map and constant captured in expr.

    kinds: "eq" (expr == 0), "ineq" (expr >= 0 elementwise),
    "soc" (expr = [t; u], ||u|| <= t), "psd" (expr is a Hermitian matrix,
    expr >= 0 in the PSD order).  ``domain`` marks PSD blocks complex or real.
    """

    __slots__ = ("kind", "expr", "domain", "label")

    def __init__(self, kind, expr, domain=None, label=""):
        self.kind = kind
        self.expr = expr
        self.domain = domain
        self.label = label

    def __repr__(self):
        return f"ConstraintBlock({self.kind}, size={self.expr.size}, label={self.label!r})"


class ConicProgram:
    """Builder for a conic program over named variable blocks."""

    def __init__(self):
        self.blocks = {}
        self.constraints = []
        self.objective = None
        self._n_real = 0

    # -- variables ------------------------------------------------------------

    def _add_block(self, name, kind, shape, rdim):
        if name in self.blocks:
            raise MalformedProgramError(f"variable {name!r} already declared")
        blk = VariableBlock(name, kind, shape, self._n_real, rdim)
        self.blocks[name] = blk
        self._n_real += rdim
        return blk

    def add_real(self, name, shape=()):
        shape = _as_shape(shape)
        self._add_block(name, "real", shape, _size(shape))
        return self.var(name)

    def add_complex(self, name, shape):
        shape = _as_shape(shape)
        self._add_block(name, "complex", shape, 2 * _size(shape))
        return self.var(name)

    def add_hermitian(self, name, n):
        n = int(n)
        self._add_block(name, "hermitian", (n, n), n * n)
        return self.var(name)

    @property
    def n_real(self):
        return self._n_real

    def var(self, name):
        if name not in self.blocks:
            raise MalformedProgramError(f"variable {name!r} is not declared")
        blk = self.blocks[name]
        size = _size(blk.shape)
        if blk.kind == "real":
            J = np.eye(size, dtype=complex)
        elif blk.kind == "complex":
            J = np.concatenate([np.eye(size), 1j * np.eye(size)], axis=1)
        else:  # hermitian
            n = blk.shape[0]
            nut = n * (n - 1) // 2
            J = np.zeros((size, n * n), dtype=complex)
            pidx = {}
            c = 0
            for j in range(n):
                for i in range(j):
                    pidx[(i, j)] = c
                    c += 1
            for j in range(n):
                for i in range(n):
                    r = i + j * n
                    if i == j:
                        J[r, i] = 1.0
                    elif i < j:
                        J[r, n + pidx[(i, j)]] = 1.0
                        J[r, n + nut + pidx[(i, j)]] = 1.0j
                    else:
                        J[r, n + pidx[(j, i)]] = 1.0
                        J[r, n + nut + pidx[(j, i)]] = -1.0j
        return Affine(self, blk.shape, {name: J}, np.zeros(size, dtype=complex))

    def constant(self, value):
        return Affine.constant(self, value)

    # -- objective and constraints ---------------------------------------------

    def minimize(self, expr):
        expr = expr if isinstance(expr, Affine) else Affine.constant(self, expr)
        if expr.shape != ():
            raise MalformedProgramError("objective must be scalar")
        if _imag_norm(expr) > 1e-9 * max(1.0, _data_norm(expr)):
            raise MalformedProgramError("objective must be real")
        self._check_owned(expr)
        self.objective = expr.real()

    def maximize(self, expr):
        self.minimize(-expr)

    def _check_owned(self, expr):
        for name in expr.coeffs:
            if name not in self.blocks:
                raise MalformedProgramError(f"expression references undeclared variable {name!r}")

    def add_eq(self, expr, label=""):
        expr = expr.ravel() if expr.shape else expr
        self._check_owned(expr)
        self.constraints.append(ConstraintBlock("eq", expr, label=label))

    def add_ineq(self, expr, label=""):
        """expr >= 0 elementwise; expr must be real."""
        expr = expr.ravel() if expr.shape else expr
        self._check_owned(expr)
        if _imag_norm(expr) > 1e-9 * max(1.0, _data_norm(expr)):
            raise MalformedProgramError("inequality expression must be real")
        self.constraints.append(ConstraintBlock("ineq", expr.real(), label=label))

    def add_soc(self, t_expr, u_expr, label=""):
        """||u||_2 <= t with t a real scalar expression."""
        t_expr = t_expr if isinstance(t_expr, Affine) else Affine.constant(self, t_expr)
        if _imag_norm(t_expr) > 1e-9 * max(1.0, _data_norm(t_expr)):
            raise MalformedProgramError("SOC head must be real")
        stacked = concat([t_expr.real(), u_expr])
        if stacked.size < 2:
            raise MalformedProgramError("SOC blocks need dimension >= 2")
        self._check_owned(stacked)
        self.constraints.append(ConstraintBlock("soc", stacked, label=label))

    def add_abs_sq_le(self, u_expr, ell_expr, label=""):
        """||u||^2 <= ell via the standard SOC lift; empty u degrades to linear."""
        ell_expr = ell_expr if isinstance(ell_expr, Affine) else Affine.constant(self, ell_expr)
        if not isinstance(u_expr, Affine) or u_expr.size == 0:
            self.add_ineq(ell_expr, label=label)
            return
        one = Affine.constant(self, 1.0)
        self.add_soc(ell_expr + one, concat([2.0 * u_expr, ell_expr - one]), label=label)

    def add_psd(self, mat_expr, label="", domain=None):
        if len(mat_expr.shape) != 2 or mat_expr.shape[0] != mat_expr.shape[1]:
            raise MalformedProgramError("PSD block must be square")
        self._check_owned(mat_expr)
        mat_expr = hermitize(mat_expr)
        if domain is None:
            domain = "complex" if self._expr_is_complex(mat_expr) else "real"
        self.constraints.append(ConstraintBlock("psd", mat_expr, domain=domain, label=label))

    def _expr_is_complex(self, expr):
        for name in expr.coeffs:
            if self.blocks[name].kind in ("complex", "hermitian"):
                return True
        return _imag_norm(expr) > 0.0


def _imag_norm(expr):
    m = float(np.max(np.abs(expr.const.imag))) if expr.const.size else 0.0
    for v in expr.coeffs.values():
        if v.size:
            m = max(m, float(np.max(np.abs(v.imag))))
    return m
