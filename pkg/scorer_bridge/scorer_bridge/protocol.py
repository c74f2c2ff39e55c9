"""Line protocol shared by all oracles.

One UTF-8 line per request, one per response, strictly in order:

    SCORE <solution>      ->  OK <raw-score>
    PRIORS <prefix>       ->  OK <k> <symbol:prob> ... (k pairs)
    anything else         ->  ERR parse

Payloads travel with backslash escaping (``\\n`` for newline, ``\\\\`` for a
backslash) so multi-symbol strings containing the newline terminal fit on
one line.  Raw scores cross the boundary unsquashed; the consuming engine
owns the mapping into its reward range.  A malformed line answers ``ERR``
and the process stays alive.
"""

from __future__ import annotations

import sys
from typing import Callable, TextIO

Scorer = Callable[[str], float]
PriorFn = Callable[[str], list[tuple[str, float]]]


def escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n")


def unescape(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(text[i])
        i += 1
    return "".join(out)


def handle_line(line: str, scorer: Scorer, priors: PriorFn) -> str:
    line = line.rstrip("\n")
    if line.startswith("SCORE "):
        payload = unescape(line[len("SCORE "):])
        try:
            return f"OK {scorer(payload)!r}"
        except ValueError as exc:
            return f"ERR {exc}"
    if line == "PRIORS" or line.startswith("PRIORS "):
        prefix = unescape(line[len("PRIORS "):]) if line != "PRIORS" else ""
        try:
            pairs = priors(prefix)
        except ValueError as exc:
            return f"ERR {exc}"
        body = " ".join(f"{escape(symbol)}:{prob!r}" for symbol, prob in pairs)
        return f"OK {len(pairs)} {body}"
    return "ERR parse"


def serve(scorer: Scorer, priors: PriorFn,
          stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout) -> None:
    """Blocking request loop; returns on EOF."""
    for line in stdin:
        stdout.write(handle_line(line, scorer, priors))
        stdout.write("\n")
        stdout.flush()
