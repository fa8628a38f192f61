"""MIP instances: representation, synthetic generators, text persistence.

Four instance families are generated here: set cover, bounded-integer
knapsack (with a 0/1 variant), fixed-charge production planning, and dense
"general" MIPs with a planted feasible point.  Every generator is a pure
function of its arguments including the seed, so identical calls yield
bit-identical instances.  Sizes at the reference parameterizations:
set cover (200, 200) -> 200 x 200; knapsack (700, ...) -> 701 x 700;
planning (20, 50) -> 140 x 1420; general (30, 30) -> 30 x 30.

Coefficient distributions are this module's own choice: integer values
drawn uniformly from (0, max_param] (or symmetric ranges for general
MIPs); see the generator docstrings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cutrank.errors import GenerationError, ParseError, RelaxationError
from cutrank.lp import EQ, GE, LE, LinearProgram, LpStatus, Row, solve_lp

MAGIC = "MIPR1"

SET_COVER = "setcover"
KNAPSACK = "knapsack"
PLANNING = "planning"
GENERAL = "generalmip"
FAMILIES = (SET_COVER, KNAPSACK, PLANNING, GENERAL)


@dataclass
class MipInstance:
    """min objective . x, rows/bounds as in LinearProgram, plus integrality."""

    objective: np.ndarray
    rows: list
    lower: np.ndarray
    upper: np.ndarray
    integrality: np.ndarray
    family: str
    seed: int

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64)
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        self.integrality = np.asarray(self.integrality, dtype=bool)

    @property
    def n_vars(self):
        return self.objective.size

    @property
    def n_rows(self):
        return len(self.rows)

    @property
    def shape(self):
        return (self.n_rows, self.n_vars)

    @property
    def name(self):
        return f"{self.family}-{self.seed}"

    def binary_mask(self):
        return self.integrality & (self.lower == 0.0) & (self.upper == 1.0)

    def relaxation(self) -> LinearProgram:
        return LinearProgram(self.objective, list(self.rows), self.lower, self.upper)

    def validate(self):
        self.relaxation().validate()
        if self.integrality.shape != (self.n_vars,):
            raise ValueError("integrality mask must match variable count")


@dataclass
class ProblemProperty:
    """Root LP solution paired with the instance it belongs to."""

    x_lp_star: np.ndarray
    instance: MipInstance


def problem_property(inst: MipInstance) -> ProblemProperty:
    """Solve the root LP relaxation; raises RelaxationError when it has none."""
    sol = solve_lp(inst.relaxation())
    if sol.status is not LpStatus.OPTIMAL:
        raise RelaxationError(sol.status.value)
    return ProblemProperty(x_lp_star=sol.x, instance=inst)


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed))


def generate_set_cover(n_elements, n_sets, density=0.1, seed=0, max_cost=100,
                       retry_budget=1000) -> MipInstance:
    """Minimum-cost set cover: one binary per set, one >=1 row per element.

    Element membership is Bernoulli(density) per (element, set); rows that
    end up empty are redrawn up to ``retry_budget`` times, after which
    GenerationError is raised (density too low to cover everything).
    """
    if n_elements < 1 or n_sets < 1:
        raise ValueError("n_elements and n_sets must be >= 1")
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    rng = _rng([17, seed, n_elements, n_sets])
    costs = rng.integers(1, max_cost + 1, size=n_sets).astype(np.float64)
    rows = []
    for _ in range(n_elements):
        member = rng.random(n_sets) < density
        tries = 0
        while not member.any():
            tries += 1
            if tries > retry_budget:
                raise GenerationError(
                    f"element stayed uncovered after {retry_budget} redraws"
                )
            member = rng.random(n_sets) < density
        idx = np.flatnonzero(member)
        rows.append(Row(idx, np.ones(idx.size), GE, 1.0))
    return MipInstance(
        objective=costs,
        rows=rows,
        lower=np.zeros(n_sets),
        upper=np.ones(n_sets),
        integrality=np.ones(n_sets, dtype=bool),
        family=SET_COVER,
        seed=seed,
    )


def generate_knapsack(n_items, max_number=5, max_value=10, max_weight=10, seed=0,
                      zero_one=False) -> MipInstance:
    """Bounded-integer knapsack, encoded as minimization of -value.

    One capacity row plus one item-cap row per item (x_i <= u_i), giving
    (n_items + 1) x n_items.  With ``zero_one`` the caps move into [0, 1]
    variable bounds instead (single capacity row), making every variable
    binary so that cover-cut separation applies.
    """
    for name, v in (("n_items", n_items), ("max_number", max_number),
                    ("max_value", max_value), ("max_weight", max_weight)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1")
    rng = _rng([23, seed, n_items])
    values = rng.integers(1, max_value + 1, size=n_items).astype(np.float64)
    weights = rng.integers(1, max_weight + 1, size=n_items).astype(np.float64)
    if zero_one:
        caps = np.ones(n_items)
    else:
        caps = rng.integers(1, max_number + 1, size=n_items).astype(np.float64)
    capacity = float(math.ceil(0.5 * float(np.sum(weights * caps))))
    all_idx = np.arange(n_items)
    rows = [Row(all_idx, weights, LE, capacity)]
    if zero_one:
        upper = np.ones(n_items)
    else:
        upper = np.full(n_items, np.inf)
        for i in range(n_items):
            rows.append(Row(np.array([i]), np.array([1.0]), LE, float(caps[i])))
    return MipInstance(
        objective=-values,
        rows=rows,
        lower=np.zeros(n_items),
        upper=upper,
        integrality=np.ones(n_items, dtype=bool),
        family=KNAPSACK,
        seed=seed,
    )


def generate_planning(n_factories, n_demands, seed=0, n_modules=20) -> MipInstance:
    """Fixed-charge production/transport planning.

    Variables: continuous shipments x[f,d], a binary open flag per factory,
    and ``n_modules`` binary capacity modules per factory; constraints:
    demand met exactly (paired >=/<= rows), factory capacity, and the
    module-open link.  At (20, 50) with the default module count this is
    140 rows x 1420 variables.  Fixed costs dominate unit shipping costs.
    """
    if n_factories < 1 or n_demands < 1:
        raise ValueError("factory and demand counts must be >= 1")
    rng = _rng([31, seed, n_factories, n_demands])
    demand = rng.integers(10, 51, size=n_demands).astype(np.float64)
    ship_cost = rng.integers(1, 11, size=(n_factories, n_demands)).astype(np.float64)
    base_cap = rng.integers(5, 21, size=n_factories).astype(np.float64)
    unit_cap = rng.integers(5, 16, size=n_factories).astype(np.float64)
    fixed_cost = rng.integers(500, 1001, size=n_factories).astype(np.float64)
    module_cost = rng.integers(50, 101, size=n_factories).astype(np.float64)

    # guarantee feasibility: full build-out must be able to serve all demand
    total_cap = float(np.sum(base_cap + unit_cap * n_modules))
    deficit = float(np.sum(demand)) - total_cap
    if deficit > 0:
        bump = math.ceil(deficit / (n_modules * n_factories))
        unit_cap += bump

    n_ship = n_factories * n_demands
    n = n_ship + n_factories + n_factories * n_modules
    ship = lambda f, d: f * n_demands + d
    open_var = lambda f: n_ship + f
    module = lambda f, k: n_ship + n_factories + f * n_modules + k

    objective = np.zeros(n)
    objective[:n_ship] = ship_cost.ravel()
    for f in range(n_factories):
        objective[open_var(f)] = fixed_cost[f]
        for k in range(n_modules):
            objective[module(f, k)] = module_cost[f]

    rows = []
    for d in range(n_demands):
        idx = np.array([ship(f, d) for f in range(n_factories)])
        rows.append(Row(idx, np.ones(n_factories), GE, float(demand[d])))
    for d in range(n_demands):
        idx = np.array([ship(f, d) for f in range(n_factories)])
        rows.append(Row(idx, np.ones(n_factories), LE, float(demand[d])))
    for f in range(n_factories):
        idx = [ship(f, d) for d in range(n_demands)]
        val = [1.0] * n_demands
        idx.append(open_var(f))
        val.append(-base_cap[f])
        for k in range(n_modules):
            idx.append(module(f, k))
            val.append(-unit_cap[f])
        rows.append(Row(np.array(idx), np.array(val), LE, 0.0))
    for f in range(n_factories):
        idx = [module(f, k) for k in range(n_modules)]
        val = [1.0] * n_modules
        idx.append(open_var(f))
        val.append(-float(n_modules))
        rows.append(Row(np.array(idx), np.array(val), LE, 0.0))

    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    upper[n_ship:] = 1.0
    integrality = np.zeros(n, dtype=bool)
    integrality[n_ship:] = True
    return MipInstance(objective, rows, lower, upper, integrality, PLANNING, seed)


def generate_general_mip(n_vars, n_cons, seed=0, integer_fraction=0.7,
                         coef_range=5, obj_range=10, bound_range=3) -> MipInstance:
    """Dense random MIP with a planted feasible point.

    A and the objective are uniform integers in symmetric ranges, every
    variable is boxed in [0, u] with small integer u, and the rhs is set
    to dominate a random integer point so feasibility is guaranteed.  The
    first ceil(integer_fraction * n_vars) variables are integer.
    """
    if n_vars < 1 or n_cons < 1:
        raise ValueError("n_vars and n_cons must be >= 1")
    if not 0.0 <= integer_fraction <= 1.0:
        raise ValueError("integer_fraction must lie in [0, 1]")
    rng = _rng([41, seed, n_vars, n_cons])
    A = rng.integers(-coef_range, coef_range + 1, size=(n_cons, n_vars)).astype(np.float64)
    z = rng.integers(-obj_range, obj_range + 1, size=n_vars).astype(np.float64)
    upper = rng.integers(1, bound_range + 1, size=n_vars).astype(np.float64)
    n_int = math.ceil(integer_fraction * n_vars)
    integrality = np.zeros(n_vars, dtype=bool)
    integrality[:n_int] = True
    planted = np.empty(n_vars)
    for j in range(n_vars):
        if integrality[j]:
            planted[j] = float(rng.integers(0, int(upper[j]) + 1))
        else:
            planted[j] = rng.uniform(0.0, upper[j])
    margin = rng.integers(0, 6, size=n_cons).astype(np.float64)
    b = A @ planted + margin
    rows = [Row(np.flatnonzero(A[i]), A[i, np.flatnonzero(A[i])], LE, float(b[i]))
            for i in range(n_cons)]
    return MipInstance(z, rows, np.zeros(n_vars), upper, integrality, GENERAL, seed)


# ---------------------------------------------------------------------------
# persistence


def _fmt(v):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def write_instance(inst: MipInstance, path):
    """Plain-text instance file; numeric fields round-trip bit-identically."""
    lines = [MAGIC,
             f"family {inst.family}",
             f"seed {inst.seed}",
             f"vars {inst.n_vars}",
             f"rows {inst.n_rows}",
             "objective " + " ".join(_fmt(v) for v in inst.objective),
             "integrality " + " ".join("1" if f else "0" for f in inst.integrality)]
    for lo, hi in zip(inst.lower, inst.upper):
        lines.append(f"bound {_fmt(lo)} {_fmt(hi)}")
    for row in inst.rows:
        terms = " ".join(f"{i}:{_fmt(v)}" for i, v in zip(row.indices, row.values))
        lines.append(f"row {row.relation} {_fmt(row.rhs)} {row.indices.size} {terms}".rstrip())
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_float(tok, lineno, what):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"bad {what} value {tok!r}", lineno) from None


def read_instance(path) -> MipInstance:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ParseError(f"missing {MAGIC} magic line", 1)

    def field(lineno, key, count=1):
        if lineno > len(lines):
            raise ParseError("file truncated", lineno)
        parts = lines[lineno - 1].split()
        if not parts or parts[0] != key or len(parts) != count + 1:
            raise ParseError(f"expected '{key}' with {count} field(s)", lineno)
        return parts[1:]

    family = field(2, "family")[0]
    seed = int(field(3, "seed")[0])
    n = int(field(4, "vars")[0])
    m = int(field(5, "rows")[0])
    obj_toks = field(6, "objective", n)
    objective = np.array([_parse_float(t, 6, "objective") for t in obj_toks])
    int_toks = field(7, "integrality", n)
    integrality = np.array([t == "1" for t in int_toks])
    lower = np.empty(n)
    upper = np.empty(n)
    ln = 8
    for j in range(n):
        lo, hi = field(ln, "bound", 2)
        lower[j] = _parse_float(lo, ln, "lower bound")
        upper[j] = _parse_float(hi, ln, "upper bound")
        ln += 1
    rows = []
    for _ in range(m):
        if ln > len(lines):
            raise ParseError("file truncated inside rows", ln)
        parts = lines[ln - 1].split()
        if len(parts) < 4 or parts[0] != "row":
            raise ParseError("expected 'row <rel> <rhs> <nnz> ...'", ln)
        rel = parts[1]
        if rel not in (LE, GE, EQ):
            raise ParseError(f"unknown relation {rel!r}", ln)
        rhs = _parse_float(parts[2], ln, "rhs")
        nnz = int(parts[3])
        terms = parts[4:]
        if len(terms) != nnz:
            raise ParseError(f"row declares {nnz} terms but carries {len(terms)}", ln)
        idx = np.empty(nnz, dtype=np.intp)
        val = np.empty(nnz)
        for k, term in enumerate(terms):
            try:
                i_s, v_s = term.split(":", 1)
                idx[k] = int(i_s)
            except ValueError:
                raise ParseError(f"bad term {term!r}", ln) from None
            val[k] = _parse_float(v_s, ln, "coefficient")
        rows.append(Row(idx, val, rel, rhs))
        ln += 1
    if ln > len(lines) or lines[ln - 1] != "end":
        raise ParseError("missing 'end' terminator", ln)
    inst = MipInstance(objective, rows, lower, upper, integrality, family, seed)
    inst.validate()
    return inst
