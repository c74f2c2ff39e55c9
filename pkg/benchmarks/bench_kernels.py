"""Benchmark the compiled selection kernels against the pure-Python twins.

Usage: python benchmarks/bench_kernels.py [repeats]

Times the argmax kernel on realistic children tables (the innermost loop of
every selection step and history-row evaluation) and a full small search
run under each backend.  The two backends are bit-identical; the only
difference is speed.
"""

from __future__ import annotations

import random
import statistics
import sys
import time

from mpmcts import _pykernels

try:
    from mpmcts import _ckernels
except ImportError:
    _ckernels = None


def bench_argmax(impl, tables, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        acc = 0
        for ws, vs, ts, V, T in tables:
            acc += impl.best_index(impl.VANILLA_VL, 1.0, ws, vs, ts, V, T)
        best = min(best, time.perf_counter() - started)
        assert acc >= 0
    return best


def bench_search(backend_env: str) -> float:
    import os
    import subprocess

    env = dict(os.environ)
    if backend_env:
        env["MPMCTS_PURE_PYTHON"] = backend_env
    else:
        env.pop("MPMCTS_PURE_PYTHON", None)
    code = (
        "import time\n"
        "from mpmcts.config import RunConfig\n"
        "from mpmcts.engine import run_distributed_sim\n"
        "from mpmcts.kernels import BACKEND\n"
        "cfg = RunConfig.from_dict({'algorithm': 'mp-mcts', 'workers': 8,\n"
        "    'overload': 3, 'budget_sims': 4000, 'seed': 5,\n"
        "    'problem': {'kind': 'grammar'}})\n"
        "t0 = time.perf_counter()\n"
        "run_distributed_sim(cfg, check_invariants=False)\n"
        "print(BACKEND, time.perf_counter() - t0)\n"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    backend, elapsed = out.stdout.split()
    print(f"  full search run [{backend}]: {float(elapsed):.2f} s")
    return float(elapsed)


def main() -> None:
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    rng = random.Random(0)
    tables = []
    for _ in range(20_000):
        n = rng.randint(2, 7)
        vs = [rng.randrange(0, 50) for _ in range(n)]
        tables.append((
            [rng.uniform(-v, v) if v else 0.0 for v in vs],
            vs,
            [rng.randrange(0, 4) for _ in range(n)],
            1 + sum(vs),
            rng.randrange(0, 12),
        ))

    print(f"argmax kernel over {len(tables)} children tables (best of {repeats}):")
    py = bench_argmax(_pykernels, tables, repeats)
    print(f"  python: {py * 1e3:8.1f} ms")
    if _ckernels is None:
        print("  cython: not built (pip install -e . with cython available)")
    else:
        cy = bench_argmax(_ckernels, tables, repeats)
        print(f"  cython: {cy * 1e3:8.1f} ms   ({py / cy:.1f}x faster)")
        mismatches = sum(
            _pykernels.best_index(1, 1.0, *t) != _ckernels.best_index(1, 1.0, *t)
            for t in tables
        )
        print(f"  agreement: {len(tables) - mismatches}/{len(tables)} identical argmax")

    print("end-to-end (8 workers, 4000 sims, grammar problem):")
    pure = bench_search("1")
    if _ckernels is not None:
        fast = bench_search("")
        print(f"  speedup: {pure / fast:.2f}x")


if __name__ == "__main__":
    main()
