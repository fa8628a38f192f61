"""Candidate cut generation at the root node.

Three generators feed the candidate pool:

* integer-rounding (Gomory fractional) cuts from optimal tableau rows,
* minimal cover cuts from knapsack-shaped binary rows,
* clique cuts from a pairwise conflict graph over binary variables.

Validity is the non-negotiable property: every emitted inequality holds at
every mixed-integer-feasible point.  For rounding cuts that forces a guard
the plain formula does not state: a tableau row is used only when its
basic variable is integer with fractional value AND every nonbasic column
carrying a nonzero coefficient is guaranteed integral at feasible points
(integer structural columns, or slacks of rows with integral data over
integral columns).  A continuous column with a nonzero coefficient, even
an integer one, admits feasible points that the rounded inequality would
cut off, so such rows are skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cutrank.instances import MipInstance, ProblemProperty
from cutrank.lp import LE, SimplexTableau

GOMORY = "gomory"
COVER = "cover"
CLIQUE = "clique"
KINDS = (GOMORY, COVER, CLIQUE)

TOL_FRAC = 1e-5      # fractionality threshold for rounding-cut eligibility
TOL_INTDATA = 1e-9   # tolerance when testing data for integrality
COEF_CAP = 1e6       # max allowed |alpha|_inf after rescaling


@dataclass
class Cut:
    """Sparse valid inequality alpha . x <= beta."""

    indices: np.ndarray
    values: np.ndarray
    beta: float
    kind: str
    source_row: int | None = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.beta = float(self.beta)
        if self.indices.size == 0:
            raise ValueError("cut must have at least one nonzero coefficient")
        if not (np.all(np.isfinite(self.values)) and math.isfinite(self.beta)):
            raise ValueError("cut has non-finite data")
        scale = float(np.max(np.abs(self.values)))
        if scale > COEF_CAP:
            factor = COEF_CAP / scale
            self.values = self.values * factor
            self.beta *= factor

    def dense(self, n):
        out = np.zeros(n)
        out[self.indices] = self.values
        return out

    def activity(self, x):
        return float(np.sum(self.values * x[self.indices]))

    def violation(self, x):
        return self.activity(x) - self.beta

    def normalized_key(self):
        scale = float(np.max(np.abs(self.values)))
        vals = tuple(round(v / scale, 12) for v in self.values)
        return (tuple(int(i) for i in self.indices), vals, round(self.beta / scale, 12))


@dataclass
class CutPool:
    """Deduplicated, deterministically ordered candidate cuts."""

    cuts: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def __getitem__(self, i):
        return self.cuts[i]

    def subset(self, indices):
        return [self.cuts[i] for i in indices]


def _is_integral(v, tol=TOL_INTDATA):
    return abs(v - round(v)) < tol


def fractional_rounding_cut(coeffs, rhs):
    """Integer rounding of a tableau row: (-a + floor(a)) . x <= -b + floor(b)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return np.floor(coeffs) - coeffs, math.floor(rhs) - rhs


def generate_gomory(tableau: SimplexTableau, prop: ProblemProperty):
    """Rounding cuts from fractional integer-basic tableau rows.

    Cuts are produced in the canonical column space and rewritten over the
    original structural variables by substituting each slack with its
    defining row.  Rows that cannot be certified valid (see module
    docstring) are skipped.
    """
    canon = tableau.canon
    inst = prop.instance
    m, total = tableau.rows.shape
    ns = canon.n_struct

    col_integral = np.zeros(ns, dtype=bool)
    for k in range(ns):
        j = canon.col_var[k]
        col_integral[k] = (
            inst.integrality[j]
            and not canon.col_split[k]
            and _is_integral(canon.var_base[j])
        )
    row_integral = np.zeros(m, dtype=bool)
    for r in range(m):
        if not _is_integral(canon.b[r]):
            continue
        sup = np.flatnonzero(np.abs(canon.A[r]) > 1e-12)
        row_integral[r] = all(
            _is_integral(canon.A[r, k]) and col_integral[k] for k in sup
        )
    col_ok = np.concatenate([col_integral, row_integral])

    out = []
    for i in range(m):
        bv = int(tableau.basic_vars[i])
        if bv >= ns or not col_integral[bv]:
            continue
        b_i = float(tableau.rhs[i])
        frac0 = b_i - math.floor(b_i)
        if frac0 < TOL_FRAC or frac0 > 1.0 - TOL_FRAC:
            continue
        row = tableau.rows[i].copy()
        near = np.abs(row - np.round(row)) < TOL_FRAC
        row[near] = np.round(row[near])
        neg_frac, neg_b = fractional_rounding_cut(row, b_i)
        support = np.flatnonzero(np.abs(row) > 1e-12)
        support = support[support != bv]
        if not np.all(col_ok[support]):
            continue
        # canonical cut: neg_frac . (y, s) <= neg_b; substitute out slacks
        g = neg_frac[:ns].copy()
        rhs_cut = neg_b
        for k in np.flatnonzero(np.abs(neg_frac[ns:]) > 1e-12):
            w = -neg_frac[ns + k]  # fractional part of the slack coefficient
            g += w * canon.A[k]
            rhs_cut += w * canon.b[k]
        # map canonical structural columns back to original variables
        alpha = np.zeros(inst.n_vars)
        for k in np.flatnonzero(np.abs(g) > 1e-12):
            j = canon.col_var[k]
            alpha[j] += g[k] * canon.col_sign[k]
            rhs_cut += g[k] * canon.col_sign[k] * canon.var_base[j]
        idx = np.flatnonzero(np.abs(alpha) > 1e-12)
        if idx.size == 0:
            continue
        cut = Cut(idx, alpha[idx], rhs_cut, GOMORY, source_row=i)
        if cut.violation(prop.x_lp_star) <= 0.5 * TOL_FRAC:
            continue
        out.append(cut)
    return out


def generate_cover(inst: MipInstance):
    """Minimal cover cuts from <= rows over binary variables.

    Greedy: take coefficients in descending order until they exceed the
    rhs, then drop members that are not needed; the survivors C give
    sum(x_i for i in C) <= |C| - 1.
    """
    binary = inst.binary_mask()
    out = []
    for ridx, row in enumerate(inst.rows):
        if row.relation != LE or row.indices.size == 0:
            continue
        if row.rhs < 0 or np.any(row.values < 0) or not np.all(binary[row.indices]):
            continue
        if float(np.sum(row.values)) <= row.rhs:
            continue  # no cover exists
        order = sorted(range(row.indices.size),
                       key=lambda k: (-row.values[k], row.indices[k]))
        chosen = []
        total = 0.0
        for k in order:
            chosen.append(k)
            total += float(row.values[k])
            if total > row.rhs:
                break
        # shrink to minimality, lightest members first
        for k in sorted(chosen, key=lambda k: (row.values[k], row.indices[k])):
            if total - float(row.values[k]) > row.rhs:
                chosen.remove(k)
                total -= float(row.values[k])
        members = np.sort(row.indices[chosen])
        out.append(Cut(members, np.ones(members.size), float(members.size - 1),
                       COVER, source_row=ridx))
    return out


def generate_clique(inst: MipInstance):
    """Clique cuts sum(x) <= 1 from pairwise conflicts between binaries.

    Variables i, j conflict when some <= row over binaries with nonnegative
    coefficients forces a_i + a_j > rhs (both cannot be 1).  Maximal
    cliques are grown greedily from each vertex; only size >= 3 is worth
    emitting.
    """
    binary = inst.binary_mask()
    adj = {}
    for row in inst.rows:
        if row.relation != LE or row.indices.size < 2:
            continue
        if row.rhs < 0 or np.any(row.values < 0) or not np.all(binary[row.indices]):
            continue
        idx = row.indices
        vals = row.values
        for a in range(idx.size):
            for b in range(a + 1, idx.size):
                if vals[a] + vals[b] > row.rhs + 1e-9:
                    i, j = int(idx[a]), int(idx[b])
                    adj.setdefault(i, set()).add(j)
                    adj.setdefault(j, set()).add(i)
    out = []
    seen = set()
    for v in sorted(adj):
        clique = [v]
        for u in sorted(adj[v]):
            if all(u in adj[w] for w in clique):
                clique.append(u)
        if len(clique) < 3:
            continue
        key = tuple(sorted(clique))
        if key in seen:
            continue
        seen.add(key)
        members = np.array(key, dtype=np.intp)
        out.append(Cut(members, np.ones(members.size), 1.0, CLIQUE))
    return out


def candidate_cuts(inst: MipInstance, prop: ProblemProperty,
                   tableau: SimplexTableau | None, max_per_kind=None) -> CutPool:
    """Union of the three generators, deduplicated, in a stable order.

    Order is rounding cuts (by tableau row), then covers (by source row),
    then cliques; duplicates after normalization keep their first
    occurrence.  ``max_per_kind`` optionally caps each generator's
    contribution.
    """
    groups = [
        generate_gomory(tableau, prop) if tableau is not None else [],
        generate_cover(inst),
        generate_clique(inst),
    ]
    if max_per_kind is not None:
        groups = [g[:max_per_kind] for g in groups]
    pool = CutPool()
    seen = set()
    counts = dict.fromkeys(KINDS, 0)
    for group in groups:
        for cut in group:
            key = cut.normalized_key()
            if key in seen:
                continue
            seen.add(key)
            pool.cuts.append(cut)
            counts[cut.kind] += 1
    pool.counts = counts
    return pool
