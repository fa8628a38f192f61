"""Pure-numpy simplex pivot loop.

Fallback for the compiled kernel in ``_speedups``.  Both implementations
perform the identical sequence of IEEE double operations (same entering /
leaving choices, same elementwise multiply-subtract updates), so a solve
gives the same result whichever backend runs it; only zero signs may
differ, which no comparison in the solver observes.
"""

import numpy as np

# status codes returned by simplex_iterate
OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


def simplex_iterate(tab, basis, n_enterable, tol_opt, tol_piv, bland_after, max_iter):
    """Pivot ``tab`` in place until optimal, unbounded, or out of budget.

    tab is (m+1) x (w+1) C-contiguous float64: m constraint rows, one
    reduced-cost row at the bottom, right-hand side in the last column.
    basis holds the basic column of each constraint row (np.intp).  Only
    columns < n_enterable may enter.  Dantzig pricing switches to Bland's
    rule after ``bland_after`` consecutive non-improving pivots.

    Returns (status, iterations).
    """
    m = tab.shape[0] - 1
    rhs = tab.shape[1] - 1
    it = 0
    stall = 0
    bland = False
    last_obj = -tab[m, rhs]
    while True:
        if it >= max_iter:
            return ITERATION_LIMIT, it
        red = tab[m, :n_enterable]
        if bland:
            hits = np.flatnonzero(red < -tol_opt)
            if hits.size == 0:
                return OPTIMAL, it
            pc = int(hits[0])
        else:
            pc = int(np.argmin(red))
            if red[pc] >= -tol_opt:
                return OPTIMAL, it
        col = tab[:m, pc]
        ok = np.flatnonzero(col > tol_piv)
        if ok.size == 0:
            return UNBOUNDED, it
        ratios = tab[ok, rhs] / col[ok]
        best = ratios.min()
        tied = ok[ratios == best]
        if tied.size > 1:
            # ties leave the row whose basic variable has the lowest index
            pr = int(tied[np.argmin(basis[tied])])
        else:
            pr = int(tied[0])
        p = tab[pr, pc]
        tab[pr, :] /= p
        colc = tab[:, pc].copy()
        colc[pr] = 0.0
        tab -= colc[:, None] * tab[pr, :]
        tab[:, pc] = 0.0
        tab[pr, pc] = 1.0
        basis[pr] = pc
        it += 1
        cur = -tab[m, rhs]
        if cur < last_obj - 1e-12:
            last_obj = cur
            stall = 0
        else:
            stall += 1
            if stall >= bland_after:
                bland = True
