"""Pluggable search problems.

An adapter exposes a rooted tree of actions with expansion priors, a rollout
that completes a partial solution, and a deterministic score mapping every
solution string into [-1, 1].  Three built-ins:

* a seeded synthetic tree with a planted optimum and a brute-force
  enumerator (the ground-truth oracle for acceptance tests);
* a seeded string grammar with variable branching and a documented
  surrogate score (the desk-scale stand-in for a learned sequence model);
* an adapter that delegates scoring/priors to an external oracle process
  over a one-line-per-request protocol.
"""

from __future__ import annotations

import json
import random
import select
import subprocess
import sys
from dataclasses import dataclass
from importlib import resources
from typing import Protocol

from mpmcts.tree import MASK64, derive_seed


class AdapterError(Exception):
    """Rollout or scoring failed; the engine records reward -1."""


class Problem(Protocol):
    def root_state(self): ...

    def expand_candidates(self, state) -> list[tuple[int, float]]: ...

    def is_terminal(self, state) -> bool: ...

    def apply(self, state, action): ...

    def rollout(self, state, rng: random.Random) -> tuple[object, str]: ...

    def score(self, solution: str) -> float: ...


def prune_by_cumulative_prior(
    candidates: list[tuple[int, float]], threshold: float
) -> list[tuple[int, float]]:
    """Keep the highest-prior candidates until their cumulative probability
    reaches the threshold.

    Sorted by prior descending (ties by action id ascending); always keeps at
    least one.  The returned list is a prefix of the sorted candidates, so
    storing children in this order makes lowest-index tie-breaks equivalent
    to highest-prior tie-breaks.
    """
    if not candidates:
        raise ValueError("prune_by_cumulative_prior on empty candidates")
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    ordered = sorted(candidates, key=lambda ap: (-ap[1], ap[0]))
    kept = []
    total = 0.0
    for action, prior in ordered:
        kept.append((action, prior))
        total += prior
        if total >= threshold:
            break
    return kept


def squash(raw: float, scale: float = 0.01) -> float:
    """Map a raw surrogate score into (-1, 1), monotone and sign-preserving:
    r = scale*s / (1 + scale*|s|)."""
    x = scale * raw
    return x / (1.0 + abs(x))


# ---------------------------------------------------------------------------
# Synthetic needle-in-a-tree problem


def _unit_interval(seed: int, *parts: object) -> float:
    return derive_seed(seed, *parts) / float(MASK64 + 1)


@dataclass(frozen=True)
class SyntheticTreeSpec:
    depth: int
    branching: int
    seed: int

    def __post_init__(self) -> None:
        if self.depth < 1 or self.branching < 1:
            raise ValueError("depth and branching must be >= 1")


class SyntheticTreeProblem:
    """Fixed-depth, fixed-branching tree with i.i.d. uniform [-1, 1) terminal
    rewards and one seeded golden path planted at exactly 1.0.

    States are action paths; solutions are dotted paths.  The reward law is
    a pure function of (seed, leaf path), so every worker scores leaves
    identically with no shared state.
    """

    def __init__(self, spec: SyntheticTreeSpec) -> None:
        self.spec = spec
        self.golden = tuple(
            derive_seed(spec.seed, "golden", d) % spec.branching
            for d in range(spec.depth)
        )
        self._prior = 1.0 / spec.branching

    def root_state(self) -> tuple[int, ...]:
        return ()

    def is_terminal(self, state: tuple[int, ...]) -> bool:
        return len(state) >= self.spec.depth

    def apply(self, state: tuple[int, ...], action: int) -> tuple[int, ...]:
        return state + (action,)

    def expand_candidates(self, state: tuple[int, ...]) -> list[tuple[int, float]]:
        if self.is_terminal(state):
            return []
        return [(a, self._prior) for a in range(self.spec.branching)]

    def rollout(
        self, state: tuple[int, ...], rng: random.Random
    ) -> tuple[tuple[int, ...], str]:
        path = state
        while len(path) < self.spec.depth:
            path = path + (rng.randrange(self.spec.branching),)
        return path, solution_of_path(path)

    def leaf_reward(self, path: tuple[int, ...]) -> float:
        if path == self.golden:
            return 1.0
        return _unit_interval(self.spec.seed, "leaf", path) * 2.0 - 1.0

    def score(self, solution: str) -> float:
        return self.leaf_reward(path_of_solution(solution))


def solution_of_path(path: tuple[int, ...]) -> str:
    return ".".join(str(a) for a in path)


def path_of_solution(solution: str) -> tuple[int, ...]:
    if not solution:
        return ()
    return tuple(int(part) for part in solution.split("."))


def synthetic_enumerate_optimum(
    spec: SyntheticTreeSpec,
) -> tuple[float, tuple[int, ...]]:
    """Exhaustive enumeration of every terminal reward -- the ground truth
    the search is tested against."""
    leaves = spec.branching**spec.depth
    if leaves > 10**6:
        raise ValueError(f"{leaves} leaves exceed the enumeration bound 10^6")
    problem = SyntheticTreeProblem(spec)
    best_reward = float("-inf")
    best_path: tuple[int, ...] = ()
    stack: list[tuple[int, ...]] = [()]
    while stack:
        path = stack.pop()
        if len(path) == spec.depth:
            reward = problem.leaf_reward(path)
            if reward > best_reward:
                best_reward, best_path = reward, path
            continue
        for action in reversed(range(spec.branching)):
            stack.append(path + (action,))
    return best_reward, best_path


# ---------------------------------------------------------------------------
# Grammar string problem


class GrammarSpec:
    """A small first-order stochastic grammar plus a surrogate score.

    Candidates for a prefix depend on its last symbol; the newline terminal
    becomes available once the body reaches ``min_len``.  The surrogate is
    motif_weight * count(motif) - length_cost * len(body), squashed into
    (-1, 1); longer well-formed strings score higher, which gives the search
    a depth gradient.  The exact tables live in a fixture file so scores are
    reproducible across implementations.
    """

    def __init__(self, fixture: dict) -> None:
        self.alphabet: list[str] = fixture["alphabet"]
        self.terminal: str = fixture["terminal"]
        self.min_len: int = fixture["min_len"]
        self.max_len: int = fixture["max_len"]
        self.successors: dict[str, list[str]] = fixture["successors"]
        self.priors: dict[str, dict[str, float]] = fixture["priors"]
        self.terminal_prior: float = fixture["terminal_prior"]
        surrogate = fixture["surrogate"]
        self.motif: str = surrogate["motif"]
        self.motif_weight: float = surrogate["motif_weight"]
        self.length_cost: float = surrogate["length_cost"]
        self.squash_scale: float = surrogate["squash_scale"]
        self.symbol_ids = {s: i for i, s in enumerate(self.alphabet)}
        self.symbol_ids[self.terminal] = len(self.alphabet)
        self.symbols = self.alphabet + [self.terminal]

    @property
    def branching(self) -> int:
        return len(self.symbols)

    def to_fixture(self) -> dict:
        return {
            "alphabet": self.alphabet,
            "terminal": self.terminal,
            "min_len": self.min_len,
            "max_len": self.max_len,
            "successors": self.successors,
            "priors": self.priors,
            "terminal_prior": self.terminal_prior,
            "surrogate": {
                "motif": self.motif,
                "motif_weight": self.motif_weight,
                "length_cost": self.length_cost,
                "squash_scale": self.squash_scale,
            },
        }


def generate_grammar_fixture(
    seed: int,
    alphabet: str = "abcdef",
    min_len: int = 6,
    max_len: int = 40,
    terminal_prior: float = 0.08,
) -> dict:
    """Seeded fixture generator.  Succession always includes a<->b so the
    motif-rich deep optimum is reachable under any seed."""
    rng = random.Random(derive_seed(seed, "grammar"))
    letters = list(alphabet)
    successors: dict[str, list[str]] = {}
    priors: dict[str, dict[str, float]] = {}
    for context in [""] + letters:
        k = rng.randint(3, len(letters))
        succ = sorted(rng.sample(letters, k))
        if context == "a" and "b" not in succ:
            succ = sorted(succ + ["b"])
        if context in ("", "b") and "a" not in succ:
            succ = sorted(succ + ["a"])
        weights = {s: 0.25 + rng.random() for s in succ}
        total = sum(weights.values())
        successors[context] = succ
        priors[context] = {s: weights[s] / total for s in succ}
    return {
        "alphabet": letters,
        "terminal": "\n",
        "min_len": min_len,
        "max_len": max_len,
        "successors": successors,
        "priors": priors,
        "terminal_prior": terminal_prior,
        "surrogate": {
            "motif": "ab",
            "motif_weight": 6.0,
            "length_cost": 1.0,
            "squash_scale": 0.01,
        },
    }


def load_default_grammar() -> GrammarSpec:
    text = resources.files("mpmcts").joinpath("data/grammar_default.json").read_text()
    return GrammarSpec(json.loads(text))


class GrammarStringProblem:
    """States are partial strings; a string is terminal once it ends with the
    newline symbol or hits max_len.  Strings that hit max_len without
    terminating are invalid and score -1."""

    def __init__(self, spec: GrammarSpec) -> None:
        self.spec = spec

    def root_state(self) -> str:
        return ""

    def is_terminal(self, state: str) -> bool:
        return state.endswith(self.spec.terminal) or len(state) >= self.spec.max_len

    def apply(self, state: str, action: int) -> str:
        return state + self.spec.symbols[action]

    def expand_candidates(self, state: str) -> list[tuple[int, float]]:
        if self.is_terminal(state):
            return []
        spec = self.spec
        context = state[-1] if state else ""
        letter_priors = spec.priors[context]
        if len(state) >= spec.min_len:
            stop = spec.terminal_prior
            out = [(spec.symbol_ids[spec.terminal], stop)]
            out += [
                (spec.symbol_ids[s], p * (1.0 - stop)) for s, p in letter_priors.items()
            ]
        else:
            out = [(spec.symbol_ids[s], p) for s, p in letter_priors.items()]
        return out

    def rollout(self, state: str, rng: random.Random) -> tuple[str, str]:
        current = state
        while not self.is_terminal(current):
            candidates = self.expand_candidates(current)
            actions = [a for a, _ in candidates]
            weights = [p for _, p in candidates]
            action = rng.choices(actions, weights=weights)[0]
            current = self.apply(current, action)
        return current, current

    def surrogate(self, body: str) -> float:
        spec = self.spec
        return spec.motif_weight * body.count(spec.motif) - spec.length_cost * len(body)

    def score(self, solution: str) -> float:
        spec = self.spec
        if not solution.endswith(spec.terminal):
            return -1.0  # ran past max_len without terminating
        body = solution[: -len(spec.terminal)]
        return squash(self.surrogate(body), spec.squash_scale)


# ---------------------------------------------------------------------------
# External oracle problem


class OracleClient:
    """One oracle subprocess per worker, one outstanding request at a time.

    Line protocol on stdio: ``SCORE <solution>`` -> ``OK <raw>``,
    ``PRIORS <prefix>`` -> ``OK <k> <symbol:prob>...``, errors as
    ``ERR <message>``.  Newlines inside payloads travel escaped (\\n).
    A dead or silent oracle is an AdapterError; timeouts count as failures
    rather than hangs.
    """

    def __init__(self, command: str, timeout: float = 30.0) -> None:
        self.command = command
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                shell=True,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def request(self, line: str) -> str:
        proc = self._ensure()
        try:
            assert proc.stdin is not None and proc.stdout is not None
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
            if not ready:
                raise AdapterError(f"oracle timed out after {self.timeout}s")
            reply = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise AdapterError(f"oracle process failed: {exc}") from exc
        if not reply:
            raise AdapterError("oracle closed its output stream")
        return reply.rstrip("\n")

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    @staticmethod
    def escape(text: str) -> str:
        return text.replace("\\", "\\\\").replace("\n", "\\n")

    @staticmethod
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


class ExternalOracleProblem:
    """String tree whose priors and raw scores come from the oracle; raw
    scores are squashed engine-side so the reward law is single-sourced."""

    def __init__(
        self,
        command: str,
        max_len: int = 40,
        timeout: float = 30.0,
        squash_scale: float = 0.01,
        terminal: str = "\n",
    ) -> None:
        self.client = OracleClient(command, timeout)
        self.max_len = max_len
        self.squash_scale = squash_scale
        self.terminal = terminal
        self._symbols: list[str] | None = None
        self._prior_cache: dict[str, list[tuple[int, float]]] = {}

    def _request_priors(self, state: str) -> list[tuple[str, float]]:
        reply = self.client.request(f"PRIORS {OracleClient.escape(state)}")
        parts = reply.split()
        if not parts or parts[0] != "OK":
            raise AdapterError(f"oracle rejected PRIORS: {reply!r}")
        count = int(parts[1])
        pairs = []
        for chunk in parts[2 : 2 + count]:
            symbol, prob = chunk.rsplit(":", 1)
            pairs.append((OracleClient.unescape(symbol), float(prob)))
        return pairs

    def _ensure_symbols(self) -> list[str]:
        # The root PRIORS reply fixes the symbol universe (and hence action
        # ids) identically on every worker; the oracle must answer with one
        # fixed, whitespace-free symbol set.
        if self._symbols is None:
            pairs = self._request_priors("")
            symbols = sorted({s for s, _ in pairs})
            if self.terminal not in symbols:
                symbols.append(self.terminal)
            self._symbols = symbols
            self._prior_cache[""] = [(symbols.index(s), p) for s, p in pairs]
        return self._symbols

    def root_state(self) -> str:
        return ""

    def is_terminal(self, state: str) -> bool:
        return state.endswith(self.terminal) or len(state) >= self.max_len

    def apply(self, state: str, action: int) -> str:
        return state + self._ensure_symbols()[action]

    def expand_candidates(self, state: str) -> list[tuple[int, float]]:
        symbols = self._ensure_symbols()
        if state in self._prior_cache:
            return self._prior_cache[state]
        pairs = self._request_priors(state)
        try:
            candidates = [(symbols.index(s), p) for s, p in pairs]
        except ValueError as exc:
            raise AdapterError(f"oracle symbol outside root universe: {exc}") from exc
        self._prior_cache[state] = candidates
        return candidates

    def rollout(self, state: str, rng: random.Random) -> tuple[str, str]:
        current = state
        while not self.is_terminal(current):
            candidates = self.expand_candidates(current)
            actions = [a for a, _ in candidates]
            weights = [p for _, p in candidates]
            action = rng.choices(actions, weights=weights)[0]
            current = self.apply(current, action)
        return current, current

    def score(self, solution: str) -> float:
        if not solution.endswith(self.terminal):
            return -1.0
        body = solution[: -len(self.terminal)]
        reply = self.client.request(f"SCORE {OracleClient.escape(body)}")
        parts = reply.split(maxsplit=1)
        if parts and parts[0] == "OK":
            return squash(float(parts[1]), self.squash_scale)
        raise AdapterError(f"oracle rejected SCORE: {reply!r}")

    def close(self) -> None:
        self.client.close()


def build_problem(problem_cfg: dict, master_seed: int):
    """Problem factory used by the run config."""
    kind = problem_cfg.get("kind")
    if kind == "synthetic":
        spec = SyntheticTreeSpec(
            depth=problem_cfg["depth"],
            branching=problem_cfg["branching"],
            seed=problem_cfg.get("reward_seed", master_seed),
        )
        return SyntheticTreeProblem(spec)
    if kind == "grammar":
        fixture_path = problem_cfg.get("fixture")
        if fixture_path:
            with open(fixture_path) as fh:
                spec = GrammarSpec(json.load(fh))
        else:
            spec = load_default_grammar()
        return GrammarStringProblem(spec)
    if kind == "external":
        command = problem_cfg.get("oracle_cmd")
        if not command:
            raise ValueError("external problem requires oracle_cmd")
        return ExternalOracleProblem(
            command,
            max_len=problem_cfg.get("max_len", 40),
            timeout=problem_cfg.get("timeout", 30.0),
        )
    raise ValueError(f"unknown problem kind {kind!r}")


def main() -> None:  # pragma: no cover - tiny helper for regenerating data
    fixture = generate_grammar_fixture(int(sys.argv[1]) if len(sys.argv) > 1 else 7)
    print(json.dumps(fixture, indent=2))


if __name__ == "__main__":  # pragma: no cover
    main()
