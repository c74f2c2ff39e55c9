"""Selection-formula kernels, pure-Python backend.

These are the innermost functions of the search: every selection step and
every history-row re-evaluation calls them.  The compiled backend in
``_ckernels`` mirrors this module bit for bit (same operation order, IEEE
doubles, libm log/sqrt); ``mpmcts.kernels`` picks one at import time.

Formula ids (shared with the compiled backend):

    UCB1        w/v + C*sqrt(ln(V)/v)
    VANILLA_VL  (w+0)/(v+t) + C*sqrt(ln(V+T)/(v+t))
    WU          w/v + C*sqrt(ln(V+T)/(v+t))
    LCB_VL      (w+LCB)/(v+t) + C*sqrt(ln(V+T)/(v+t)),
                LCB = min{0, t*(w/v - C*sqrt(ln(V+T)/(v+t)))}

First-play urgency: a value is +inf iff the exploitation denominator is
undefined and no in-flight information exists -- v == 0 for UCB1/WU,
v + t == 0 for the virtual-loss variants.  For LCB_VL with v == 0 and
t > 0, LCB and the exploitation term are both defined as 0.
"""

from __future__ import annotations

import math

BACKEND = "python"

UCB1 = 0
VANILLA_VL = 1
WU = 2
LCB_VL = 3

_INF = float("inf")


def ucb1(w: float, v: int, V: int, c: float) -> float:
    if v == 0:
        return _INF
    return w / v + c * math.sqrt(math.log(V) / v)


def ucb_vl(w: float, v: int, t: int, V: int, T: int, c: float) -> float:
    n = v + t
    if n == 0:
        return _INF
    return w / n + c * math.sqrt(math.log(V + T) / n)


def ucb_wu(w: float, v: int, t: int, V: int, T: int, c: float) -> float:
    if v == 0:
        return _INF
    return w / v + c * math.sqrt(math.log(V + T) / (v + t))


def ucb_vl_lcb(w: float, v: int, t: int, V: int, T: int, c: float) -> float:
    n = v + t
    if n == 0:
        return _INF
    explore = c * math.sqrt(math.log(V + T) / n)
    if v == 0:
        return explore
    lcb = t * (w / v - explore)
    if lcb > 0.0:
        lcb = 0.0
    return (w + lcb) / n + explore


def value(formula: int, w: float, v: int, t: int, V: int, T: int, c: float) -> float:
    if formula == UCB1:
        return ucb1(w, v, V, c)
    if formula == VANILLA_VL:
        return ucb_vl(w, v, t, V, T, c)
    if formula == WU:
        return ucb_wu(w, v, t, V, T, c)
    if formula == LCB_VL:
        return ucb_vl_lcb(w, v, t, V, T, c)
    raise ValueError(f"unknown formula id {formula}")


def best_index(formula: int, c: float, ws, vs, ts, V: int, T: int) -> int:
    """Argmax of the formula over parallel stat lists; ties keep the lowest index."""
    best = -_INF
    best_i = 0
    for i in range(len(ws)):
        x = value(formula, ws[i], vs[i], ts[i], V, T, c)
        if x > best:
            best = x
            best_i = i
    return best_i
