# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simplex pivot loop; mirrors _simplex_py.simplex_iterate exactly.

Every floating-point operation here matches the numpy fallback in kind and
order (build flags disable mul/add fusion), so both backends compute the
same pivots and the same tableau values.
"""


def simplex_iterate(double[:, ::1] tab, Py_ssize_t[::1] basis,
                    Py_ssize_t n_enterable, double tol_opt, double tol_piv,
                    Py_ssize_t bland_after, Py_ssize_t max_iter):
    """See _simplex_py.simplex_iterate."""
    cdef Py_ssize_t m = tab.shape[0] - 1
    cdef Py_ssize_t width = tab.shape[1]
    cdef Py_ssize_t rhs = width - 1
    cdef Py_ssize_t it = 0
    cdef Py_ssize_t stall = 0
    cdef bint bland = False
    cdef double last_obj = -tab[m, rhs]
    cdef Py_ssize_t pc, pr, i, j
    cdef double best, v, r, best_r, p, f, cur

    while True:
        if it >= max_iter:
            return 2, it
        pc = -1
        if bland:
            for j in range(n_enterable):
                if tab[m, j] < -tol_opt:
                    pc = j
                    break
            if pc < 0:
                return 0, it
        else:
            best = tab[m, 0]
            pc = 0
            for j in range(1, n_enterable):
                v = tab[m, j]
                if v < best:
                    best = v
                    pc = j
            if best >= -tol_opt:
                return 0, it
        pr = -1
        best_r = 0.0
        for i in range(m):
            v = tab[i, pc]
            if v > tol_piv:
                r = tab[i, rhs] / v
                if pr < 0 or r < best_r or (r == best_r and basis[i] < basis[pr]):
                    pr = i
                    best_r = r
        if pr < 0:
            return 1, it
        p = tab[pr, pc]
        for j in range(width):
            tab[pr, j] /= p
        for i in range(m + 1):
            if i == pr:
                continue
            f = tab[i, pc]
            if f == 0.0:
                continue
            for j in range(width):
                tab[i, j] -= f * tab[pr, j]
        for i in range(m + 1):
            tab[i, pc] = 0.0
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
