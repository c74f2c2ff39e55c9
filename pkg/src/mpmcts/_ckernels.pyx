# cython: language_level=3, boundscheck=False, wraparound=False
"""Selection-formula kernels, compiled backend.

Mirrors ``mpmcts._pykernels`` bit for bit: same operation order, IEEE
doubles, libm log/sqrt, no fast-math.  See that module for the formula
definitions and the first-play-urgency convention.
"""

from libc.math cimport INFINITY, log, sqrt

BACKEND = "cython"

UCB1 = 0
VANILLA_VL = 1
WU = 2
LCB_VL = 3


cpdef double ucb1(double w, long long v, long long V, double c):
    if v == 0:
        return INFINITY
    return w / v + c * sqrt(log(<double> V) / v)


cpdef double ucb_vl(double w, long long v, long long t, long long V, long long T, double c):
    cdef long long n = v + t
    if n == 0:
        return INFINITY
    return w / n + c * sqrt(log(<double> (V + T)) / n)


cpdef double ucb_wu(double w, long long v, long long t, long long V, long long T, double c):
    if v == 0:
        return INFINITY
    return w / v + c * sqrt(log(<double> (V + T)) / (v + t))


cpdef double ucb_vl_lcb(double w, long long v, long long t, long long V, long long T, double c):
    cdef long long n = v + t
    cdef double explore, lcb
    if n == 0:
        return INFINITY
    explore = c * sqrt(log(<double> (V + T)) / n)
    if v == 0:
        return explore
    lcb = t * (w / v - explore)
    if lcb > 0.0:
        lcb = 0.0
    return (w + lcb) / n + explore


cpdef double value(int formula, double w, long long v, long long t, long long V, long long T, double c):
    if formula == 0:
        return ucb1(w, v, V, c)
    if formula == 1:
        return ucb_vl(w, v, t, V, T, c)
    if formula == 2:
        return ucb_wu(w, v, t, V, T, c)
    if formula == 3:
        return ucb_vl_lcb(w, v, t, V, T, c)
    raise ValueError(f"unknown formula id {formula}")


cpdef Py_ssize_t best_index(int formula, double c, list ws, list vs, list ts, long long V, long long T):
    """Argmax of the formula over parallel stat lists; ties keep the lowest index."""
    cdef Py_ssize_t i, best_i = 0
    cdef Py_ssize_t n = len(ws)
    cdef double x, best = -INFINITY
    for i in range(n):
        x = value(formula, <double> ws[i], <long long> vs[i], <long long> ts[i], V, T, c)
        if x > best:
            best = x
            best_i = i
    return best_i
