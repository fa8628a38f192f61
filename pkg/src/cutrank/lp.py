"""Linear programs and a two-phase full-tableau primal simplex.

Models are ``min c^T x`` over sparse relational rows (<=, >=, =) plus
variable bounds with +-inf allowed.  Internally every program is lowered
to the canonical nonnegative form ``min c y  s.t.  A y <= b, y >= 0``:

* finite lower bound l:   x = l + y          (shift)
* only upper bound u:     x = u - y          (mirror)
* free variable:          x = y+ - y-        (split into two columns)
* finite upper bounds become explicit rows   y <= u - l

The optimal tableau B^-1 (A | I) over canonical structural + slack columns
is recomputable from the final basis, which is what integer-rounding cut
generation consumes.  Pivoting itself runs in the selected kernel (see
``cutrank.kernel``); everything here is deterministic: identical inputs
give bit-identical solutions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from cutrank import kernel
from cutrank.errors import NumericalFailure

LE = "<="
GE = ">="
EQ = "="
RELATIONS = (LE, GE, EQ)

TOL_FEAS = 1e-7   # feasibility tolerance
TOL_OPT = 1e-9    # reduced-cost optimality tolerance
TOL_PIVOT = 1e-9  # minimum admissible pivot magnitude
BLAND_AFTER = 64  # non-improving pivots before the Bland fallback


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class Row:
    """One sparse constraint row: sum(values * x[indices]) <relation> rhs."""

    indices: np.ndarray
    values: np.ndarray
    relation: str
    rhs: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("row indices/values must be 1-d and aligned")
        order = np.argsort(idx, kind="stable")
        self.indices = idx[order]
        self.values = val[order]
        self.rhs = float(self.rhs)
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if idx.size and np.any(np.diff(self.indices) == 0):
            raise ValueError("duplicate variable index in row")

    def dense(self, n):
        out = np.zeros(n)
        out[self.indices] = self.values
        return out

    def activity(self, x):
        return float(np.sum(self.values * x[self.indices]))


@dataclass
class LinearProgram:
    """min objective . x subject to rows and bounds (inf allowed)."""

    objective: np.ndarray
    rows: list
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)

    @property
    def n_vars(self):
        return self.objective.size

    def validate(self):
        n = self.n_vars
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bound vectors must match objective length")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective must be finite")
        both = np.isfinite(self.lower) & np.isfinite(self.upper)
        if np.any(self.lower[both] > self.upper[both]):
            raise ValueError("lower bound exceeds upper bound")
        for i, row in enumerate(self.rows):
            if row.indices.size and (row.indices[0] < 0 or row.indices[-1] >= n):
                raise ValueError(f"row {i} references variable out of range")
            if not np.all(np.isfinite(row.values)) or not np.isfinite(row.rhs):
                raise ValueError(f"row {i} has non-finite data")


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective_value: float | None
    basis: np.ndarray | None
    iteration_count: int


@dataclass
class SimplexTableau:
    """Optimal tableau rows B^-1 (A | I) over canonical columns.

    ``rows[:, :n_struct]`` are canonical structural columns and the
    remaining block the slack columns; ``canon`` carries the mapping back
    to original variables for consumers that rewrite tableau rows.
    """

    rows: np.ndarray
    rhs: np.ndarray
    basic_vars: np.ndarray
    canon: "Canonical" = field(repr=False)

    @property
    def n_struct(self):
        return self.canon.n_struct


@dataclass
class Canonical:
    """Lowered form min c.y, A y <= b, y >= 0 plus the column mapping."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    col_var: np.ndarray    # original variable per canonical column
    col_sign: np.ndarray   # +1 shift/identity, -1 mirror or split negative part
    col_split: np.ndarray  # True for columns born from a free-variable split
    var_base: np.ndarray   # x = var_base + sum(sign * y) over the var's columns
    const: float           # objective constant introduced by shifts

    @property
    def n_struct(self):
        return self.c.size

    @property
    def n_rows(self):
        return self.b.size

    def x_from_y(self, y):
        x = self.var_base.copy()
        for k in range(self.n_struct):
            x[self.col_var[k]] += self.col_sign[k] * y[k]
        return x


def canonicalize(lp: LinearProgram) -> Canonical:
    """Deterministically lower an LP to canonical nonnegative form."""
    n = lp.n_vars
    col_var, col_sign, col_split = [], [], []
    var_base = np.zeros(n)
    bound_rows = []  # (col, ub) pending upper-bound rows
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            var_base[j] = lo
            col_var.append(j)
            col_sign.append(1.0)
            col_split.append(False)
            if np.isfinite(hi):
                bound_rows.append((len(col_var) - 1, hi - lo))
        elif np.isfinite(hi):
            var_base[j] = hi
            col_var.append(j)
            col_sign.append(-1.0)
            col_split.append(False)
        else:
            col_var.extend([j, j])
            col_sign.extend([1.0, -1.0])
            col_split.extend([True, True])
    col_var = np.asarray(col_var, dtype=np.intp)
    col_sign = np.asarray(col_sign)
    col_split = np.asarray(col_split, dtype=bool)
    ncols = col_var.size

    # columns of each original variable, for scattering row coefficients
    cols_of = [[] for _ in range(n)]
    for k in range(ncols):
        cols_of[col_var[k]].append(k)

    def lower_row(dense_coeffs, rhs):
        out = np.zeros(ncols)
        for j in np.flatnonzero(dense_coeffs):
            for k in cols_of[j]:
                out[k] = dense_coeffs[j] * col_sign[k]
        return out, rhs - float(np.sum(dense_coeffs * var_base))

    rows, rhs = [], []
    for row in lp.rows:
        dense = row.dense(n)
        if row.relation in (LE, EQ):
            a, b = lower_row(dense, row.rhs)
            rows.append(a)
            rhs.append(b)
        if row.relation in (GE, EQ):
            a, b = lower_row(-dense, -row.rhs)
            rows.append(a)
            rhs.append(b)
    for col, ub in bound_rows:
        a = np.zeros(ncols)
        a[col] = 1.0
        rows.append(a)
        rhs.append(float(ub))

    A = np.array(rows).reshape(len(rows), ncols)
    b = np.asarray(rhs, dtype=np.float64)
    c = np.zeros(ncols)
    for k in range(ncols):
        c[k] = lp.objective[col_var[k]] * col_sign[k]
    const = float(np.sum(lp.objective * var_base))
    return Canonical(c, A, b, col_var, col_sign, col_split, var_base, const)


def _pivot(tab, basis, pr, pc):
    """One pivot with the same arithmetic as the kernels (setup-time use)."""
    tab[pr, :] /= tab[pr, pc]
    colc = tab[:, pc].copy()
    colc[pr] = 0.0
    tab -= colc[:, None] * tab[pr, :]
    tab[:, pc] = 0.0
    tab[pr, pc] = 1.0
    basis[pr] = pc


def _default_max_iter(m, width):
    return 2000 + 40 * (m + width)


def _solve_canonical(canon: Canonical, max_iter=None):
    """Two-phase simplex on the canonical form.

    Returns (status, y, basis, iterations).  basis indexes canonical
    structural columns [0, ncols) then slack columns [ncols, ncols+m).
    """
    m, ncols = canon.A.shape
    n_real = ncols + m
    if max_iter is None:
        max_iter = _default_max_iter(m, n_real)

    neg = canon.b < 0.0
    n_art = int(np.count_nonzero(neg))
    width = n_real + n_art + 1
    tab = np.zeros((m + 1, width))
    tab[:m, :ncols] = canon.A
    tab[:m, ncols:n_real] = np.eye(m)
    tab[:m, -1] = canon.b
    tab[:m][neg] *= -1.0  # flip rows so every rhs is nonnegative

    basis = np.empty(m, dtype=np.intp)
    art = 0
    for i in range(m):
        if neg[i]:
            tab[i, n_real + art] = 1.0
            basis[i] = n_real + art
            art += 1
        else:
            basis[i] = ncols + i
    iters = 0

    if n_art:
        # phase 1: minimise the artificial sum
        for i in np.flatnonzero(neg):
            tab[m, :] -= tab[i, :]
        tab[m, n_real:-1] = 0.0
        status, it = kernel.simplex_iterate(
            tab, basis, n_real, TOL_OPT, TOL_PIVOT, BLAND_AFTER, max_iter
        )
        iters += it
        if status == 2 or not np.all(np.isfinite(tab)):
            return LpStatus.NUMERICAL_FAILURE, None, None, iters
        if -tab[m, -1] > TOL_FEAS:
            return LpStatus.INFEASIBLE, None, None, iters
        # drive leftover artificials out on the first usable real column
        for i in range(m):
            if basis[i] >= n_real:
                pc = -1
                for j in range(n_real):
                    if abs(tab[i, j]) > TOL_PIVOT:
                        pc = j
                        break
                if pc < 0:
                    return LpStatus.NUMERICAL_FAILURE, None, None, iters
                _pivot(tab, basis, i, pc)
                iters += 1
        tab = np.ascontiguousarray(
            np.hstack([tab[:, :n_real], tab[:, -1:]])
        )

    # phase 2 objective: reduced costs of the real problem
    c_ext = np.concatenate([canon.c, np.zeros(m)])
    zrow = c_ext.copy()
    zrhs = 0.0
    for i in range(m):
        cb = c_ext[basis[i]]
        if cb != 0.0:
            zrow -= cb * tab[i, :n_real]
            zrhs -= cb * tab[i, -1]
    tab[m, :n_real] = zrow
    tab[m, -1] = zrhs

    status, it = kernel.simplex_iterate(
        tab, basis, n_real, TOL_OPT, TOL_PIVOT, BLAND_AFTER, max_iter
    )
    iters += it
    if status == 2 or not np.all(np.isfinite(tab)):
        return LpStatus.NUMERICAL_FAILURE, None, None, iters
    if status == 1:
        return LpStatus.UNBOUNDED, None, None, iters

    y = np.zeros(ncols)
    for i in range(m):
        if basis[i] < ncols:
            v = tab[i, -1]
            y[basis[i]] = 0.0 if abs(v) < 1e-11 else v
    return LpStatus.OPTIMAL, y, basis.copy(), iters


def solve_lp(lp: LinearProgram, max_iter=None) -> LpSolution:
    """Solve an LP; deterministic, with explicit failure statuses.

    The optimal point is a basic feasible solution; the returned basis
    indexes canonical structural + slack columns and is what
    extract_tableau consumes.
    """
    lp.validate()
    canon = canonicalize(lp)
    status, y, basis, iters = _solve_canonical(canon, max_iter)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, None, None, None, iters)

    # never report an infeasible point as Optimal
    if np.any(y < -TOL_FEAS):
        return LpSolution(LpStatus.NUMERICAL_FAILURE, None, None, None, iters)
    resid = canon.A @ y - canon.b
    if resid.size and float(np.max(resid)) > TOL_FEAS:
        return LpSolution(LpStatus.NUMERICAL_FAILURE, None, None, None, iters)

    x = canon.x_from_y(y)
    obj = float(np.sum(lp.objective * x))
    return LpSolution(LpStatus.OPTIMAL, x, obj, basis, iters)


def extract_tableau(lp: LinearProgram, sol: LpSolution) -> SimplexTableau:
    """Rebuild B^-1 (A | I) and B^-1 b for the optimal basis of ``sol``.

    Independent of pivoting internals: the basis columns are taken from
    the canonical (A | I) and factored directly, so each basic column of
    the result is a unit vector by construction.
    """
    if sol.status is not LpStatus.OPTIMAL or sol.basis is None:
        raise ValueError("tableau extraction needs an Optimal solution")
    canon = canonicalize(lp)
    m, ncols = canon.A.shape
    AI = np.hstack([canon.A, np.eye(m)])
    B = AI[:, sol.basis]
    try:
        rows = np.linalg.solve(B, AI)
        rhs = np.linalg.solve(B, canon.b)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular basis matrix: {exc}") from exc
    if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(rhs))):
        raise NumericalFailure("non-finite tableau from basis solve")
    for k in range(m):
        col = rows[:, sol.basis[k]]
        if abs(col[k] - 1.0) > TOL_FEAS or np.max(np.abs(np.delete(col, k))) > TOL_FEAS:
            raise NumericalFailure("basic column is not a unit vector")
    return SimplexTableau(rows=rows, rhs=rhs, basic_vars=np.asarray(sol.basis), canon=canon)
