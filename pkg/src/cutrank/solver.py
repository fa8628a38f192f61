"""Branch-and-cut: exact branch-and-bound with one cut round at the root.

The root LP is solved, candidate cuts are generated once, the configured
policy keeps the top K%, the root is re-solved, and a plain best-bound /
most-fractional branch-and-bound runs to optimality (bounds-only
branching; cuts are never separated below the root).  Reported effort
comes in two flavours: wall-clock seconds and a deterministic work proxy,
the total simplex iterations over the whole tree, which makes feedback
ratios and whole-pipeline artifacts exactly reproducible.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from cutrank.cuts import Cut, CutPool, candidate_cuts
from cutrank.errors import NumericalFailure, ValidationError
from cutrank.instances import MipInstance, ProblemProperty
from cutrank.lp import EQ, GE, LE, LinearProgram, LpStatus, Row, extract_tableau, solve_lp
from cutrank.scoring import SelectionPolicy, policy_scores, select_top_k

TAU_INT = 1e-6   # integrality tolerance on incumbent coordinates
TAU_GAP = 1e-9   # absolute bound-pruning tolerance

WORK = "work"          # deterministic: total simplex iterations
WALLCLOCK = "wallclock"
FEEDBACK_MODES = (WORK, WALLCLOCK)


class MipStatus:
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"


@dataclass
class BncConfig:
    policy: SelectionPolicy | None = None  # None: no cuts (baseline runs)
    k_percent: float = 30.0
    node_limit: int = 200000
    time_limit: float = 60.0
    feedback_mode: str = WORK
    branching: str = "most_fractional"
    node_selection: str = "best_bound"
    seed: int = 0

    def validate(self):
        if self.node_limit <= 0 or self.time_limit <= 0:
            raise ValidationError("limits must be positive")
        if self.feedback_mode not in FEEDBACK_MODES:
            raise ValidationError(f"unknown feedback mode {self.feedback_mode!r}")


@dataclass
class SolveReport:
    status: str
    incumbent: np.ndarray | None
    objective: float | None
    nodes_visited: int
    simplex_iterations_total: int
    wall_time: float = field(compare=False)
    cuts_generated: int = 0
    cuts_added: int = 0
    nodes_failed: int = 0
    limit_hit: str | None = None


def work_counter(report: SolveReport, mode: str) -> float:
    """The effort measure feedback ratios are computed from."""
    if mode == WORK:
        return float(report.simplex_iterations_total)
    return report.wall_time


def root_relaxation(inst: MipInstance):
    """Solve the root LP once; returns (property, solution, tableau)."""
    sol = solve_lp(inst.relaxation())
    if sol.status is not LpStatus.OPTIMAL:
        return None, sol, None
    prop = ProblemProperty(x_lp_star=sol.x, instance=inst)
    tableau = extract_tableau(inst.relaxation(), sol)
    return prop, sol, tableau


def _is_integral_point(x, integrality):
    vals = x[integrality]
    return bool(np.all(np.abs(vals - np.round(vals)) <= TAU_INT))


def _most_fractional(x, integrality):
    frac = x - np.floor(x)
    dist = np.minimum(frac, 1.0 - frac)
    dist[~integrality] = -1.0
    j = int(np.argmax(dist))
    return j, float(x[j])


def _snap_incumbent(inst, x):
    """Round integer coordinates exactly; keep the raw point if rounding
    would break feasibility (defensive, should not trigger on valid cuts)."""
    snapped = x.copy()
    ints = inst.integrality
    snapped[ints] = np.round(snapped[ints])
    for row in inst.rows:
        act = row.activity(snapped)
        if row.relation == LE and act > row.rhs + 1e-6:
            return x
        if row.relation == GE and act < row.rhs - 1e-6:
            return x
        if row.relation == EQ and abs(act - row.rhs) > 1e-6:
            return x
    if np.any(snapped < inst.lower - 1e-9) or np.any(snapped > inst.upper + 1e-9):
        return x
    return snapped


def solve_mip(inst: MipInstance, cfg: BncConfig, fixed_bag=None,
              pool: CutPool | None = None) -> SolveReport:
    """Solve a MIP exactly under ``cfg``.

    ``fixed_bag`` bypasses the policy and adds exactly those pool indices
    at the root (used during training-data collection, where the candidate
    ``pool`` is computed once per instance and reused across bags).
    """
    cfg.validate()
    t0 = time.perf_counter()
    iters = 0
    nodes = 0
    failed = 0
    cuts_generated = 0
    cuts_added = 0

    objective = inst.objective
    base_rows = list(inst.rows)

    def node_lp(rows, lower, upper):
        return solve_lp(LinearProgram(objective, rows, lower, upper))

    lower = inst.lower.copy()
    upper = inst.upper.copy()
    root_sol = node_lp(base_rows, lower, upper)
    iters += root_sol.iteration_count
    nodes += 1
    if root_sol.status is LpStatus.INFEASIBLE:
        return SolveReport(MipStatus.INFEASIBLE, None, None, nodes, iters,
                           time.perf_counter() - t0)
    if root_sol.status is not LpStatus.OPTIMAL:
        raise NumericalFailure(f"root relaxation ended {root_sol.status.value}")

    rows = base_rows
    wants_cuts = cfg.policy is not None or fixed_bag is not None
    if wants_cuts:
        prop = ProblemProperty(x_lp_star=root_sol.x, instance=inst)
        if pool is None:
            tableau = extract_tableau(inst.relaxation(), root_sol)
            pool = candidate_cuts(inst, prop, tableau)
        cuts_generated = len(pool)
        if fixed_bag is not None:
            chosen = np.asarray(fixed_bag, dtype=np.intp)
        elif len(pool):
            scores = policy_scores(cfg.policy, pool, prop)
            chosen = select_top_k(scores, cfg.k_percent)
        else:
            chosen = np.empty(0, dtype=np.intp)
        if chosen.size:
            rows = base_rows + [Row(c.indices, c.values, LE, c.beta)
                                for c in pool.subset(chosen)]
            cuts_added = int(chosen.size)
            root_sol = node_lp(rows, lower, upper)
            iters += root_sol.iteration_count
            if root_sol.status is LpStatus.INFEASIBLE:
                return SolveReport(MipStatus.INFEASIBLE, None, None, nodes, iters,
                                   time.perf_counter() - t0,
                                   cuts_generated, cuts_added)
            if root_sol.status is not LpStatus.OPTIMAL:
                raise NumericalFailure(
                    f"root re-solve ended {root_sol.status.value}")

    incumbent = None
    inc_obj = np.inf
    limit_hit = None
    counter = 0
    heap = []

    def offer(sol, lo, up):
        """Register a solved node: record incumbent or queue for branching."""
        nonlocal incumbent, inc_obj, counter
        obj = float(np.sum(objective * sol.x))
        if obj >= inc_obj - TAU_GAP:
            return
        if _is_integral_point(sol.x, inst.integrality):
            x_hat = _snap_incumbent(inst, sol.x)
            obj_hat = float(np.sum(objective * x_hat))
            if obj_hat < inc_obj:
                incumbent = x_hat
                inc_obj = obj_hat
            return
        heapq.heappush(heap, (obj, counter, sol.x, lo, up))
        counter += 1

    offer(root_sol, lower, upper)
    while heap:
        bound, _, x, lo, up = heapq.heappop(heap)
        if bound >= inc_obj - TAU_GAP:
            break  # best-bound order: nothing left can improve
        if nodes >= cfg.node_limit:
            limit_hit = "nodes"
            break
        if time.perf_counter() - t0 > cfg.time_limit:
            limit_hit = "time"
            break
        j, v = _most_fractional(x, inst.integrality)
        for child_lo, child_up in (
            (lo, _with(up, j, np.floor(v))),
            (_with(lo, j, np.ceil(v)), up),
        ):
            if child_lo[j] > child_up[j]:
                continue
            sol = node_lp(rows, child_lo, child_up)
            iters += sol.iteration_count
            nodes += 1
            if sol.status is LpStatus.INFEASIBLE:
                continue
            if sol.status is not LpStatus.OPTIMAL:
                failed += 1
                continue
            offer(sol, child_lo, child_up)

    if limit_hit is None and failed == 0:
        status = MipStatus.OPTIMAL if incumbent is not None else MipStatus.INFEASIBLE
    else:
        status = MipStatus.FEASIBLE
    return SolveReport(
        status=status,
        incumbent=incumbent,
        objective=inc_obj if incumbent is not None else None,
        nodes_visited=nodes,
        simplex_iterations_total=iters,
        wall_time=time.perf_counter() - t0,
        cuts_generated=cuts_generated,
        cuts_added=cuts_added,
        nodes_failed=failed,
        limit_hit=limit_hit,
    )


def _with(bounds, j, value):
    out = bounds.copy()
    out[j] = value
    return out


# ---------------------------------------------------------------------------
# evaluation metrics

CSV_COLUMNS = ("instance", "policy", "status", "nodes", "simplex_iters",
               "wall_time", "r_time", "r_nodes")


@dataclass
class MetricsRow:
    instance: str
    policy: str
    status: str
    nodes: int
    simplex_iters: int
    wall_time: float
    r_time: float
    r_nodes: float
    used: bool  # both sides Optimal; excluded from aggregates otherwise


@dataclass
class PolicyEvaluation:
    rows: list
    mean_r_time: float
    std_r_time: float
    mean_r_nodes: float
    std_r_nodes: float
    n_used: int


def _ratio(base, new):
    return (base - new) / base if base > 0 else 0.0


def evaluate_policy(instances, cfg: BncConfig, baseline_reports) -> PolicyEvaluation:
    """Per-instance effort/node reduction ratios of ``cfg.policy``.

    ``baseline_reports`` must be no-cut solves of the same instances in the
    same order.  Instances where either side failed to certify optimality
    are reported but excluded from the aggregate mean/std (population).
    """
    if len(instances) != len(baseline_reports):
        raise ValidationError("instance list and baseline reports differ in length")
    rows = []
    for inst, base in zip(instances, baseline_reports):
        rep = solve_mip(inst, cfg)
        r_time = _ratio(work_counter(base, cfg.feedback_mode),
                        work_counter(rep, cfg.feedback_mode))
        r_nodes = _ratio(float(base.nodes_visited), float(rep.nodes_visited))
        used = base.status == MipStatus.OPTIMAL and rep.status == MipStatus.OPTIMAL
        policy_name = cfg.policy.name if cfg.policy is not None else "nocuts"
        rows.append(MetricsRow(inst.name, policy_name, rep.status,
                               rep.nodes_visited, rep.simplex_iterations_total,
                               rep.wall_time, r_time, r_nodes, used))
    usable = [r for r in rows if r.used]
    if usable:
        rt = np.array([r.r_time for r in usable])
        rn = np.array([r.r_nodes for r in usable])
        agg = (float(rt.mean()), float(rt.std()), float(rn.mean()), float(rn.std()))
    else:
        agg = (0.0, 0.0, 0.0, 0.0)
    return PolicyEvaluation(rows, *agg, n_used=len(usable))


def metrics_csv_lines(rows, feedback_mode=WORK):
    """CSV rows in the frozen column order.

    Under the deterministic work mode the wall_time column is written as
    0.0: wall-clock is not reproducible bit-for-bit and would poison
    otherwise byte-identical artifacts.
    """
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        wall = 0.0 if feedback_mode == WORK else r.wall_time
        lines.append(",".join([
            r.instance, r.policy, r.status, str(r.nodes), str(r.simplex_iters),
            repr(wall), repr(r.r_time), repr(r.r_nodes),
        ]))
    return lines
