"""Deterministic reference oracle -- the test double.

Score law, documented so any client can reproduce it: take the blake2b-64
digest of the UTF-8 solution string and map it linearly onto [-10, 10).
Priors are uniform over a fixed seven-symbol set (six letters plus the
newline terminal), so every prefix gets the same candidate fan-out.
"""

from __future__ import annotations

import hashlib

SYMBOLS = ["a", "b", "c", "d", "e", "f", "\n"]


def score(solution: str) -> float:
    digest = hashlib.blake2b(solution.encode("utf-8"), digest_size=8).digest()
    unit = int.from_bytes(digest, "big") / float(1 << 64)
    return unit * 20.0 - 10.0


def priors(prefix: str) -> list[tuple[str, float]]:
    share = 1.0 / len(SYMBOLS)
    return [(symbol, share) for symbol in SYMBOLS]
