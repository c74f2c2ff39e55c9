"""Backend selection for the selection-formula kernels.

Prefers the compiled extension, falls back to pure Python.  Set
MPMCTS_PURE_PYTHON=1 to force the fallback (used by the benchmark and by
tests that compare the two backends).
"""

from __future__ import annotations

import os

if os.environ.get("MPMCTS_PURE_PYTHON"):
    from mpmcts import _pykernels as _impl
else:
    try:
        from mpmcts import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        from mpmcts import _pykernels as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND

UCB1 = _impl.UCB1
VANILLA_VL = _impl.VANILLA_VL
WU = _impl.WU
LCB_VL = _impl.LCB_VL

ucb1 = _impl.ucb1
ucb_vl = _impl.ucb_vl
ucb_wu = _impl.ucb_wu
ucb_vl_lcb = _impl.ucb_vl_lcb
value = _impl.value
best_index = _impl.best_index
