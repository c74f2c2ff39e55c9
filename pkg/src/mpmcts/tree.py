"""Hash-partitioned node storage.

Nodes are keyed by their full action path from the root (a tree, not a DAG:
transpositions are never merged).  A Zobrist table fixed at startup maps
paths to 64-bit digests, and ``digest mod worker_count`` assigns each node a
unique home worker.  Each worker stores only its own partition; records are
value-copied into messages, never shared.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

NodePath = tuple[int, ...]
NodeKey = int

MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, *parts: object) -> int:
    """Stable 64-bit stream seed from the master seed and a label tuple.

    blake2b-based so it is independent of PYTHONHASHSEED and identical on
    every worker and platform.
    """
    material = repr((master_seed & MASK64, parts)).encode()
    return int.from_bytes(hashlib.blake2b(material, digest_size=8).digest(), "big")


class KeyspaceError(Exception):
    """Path exceeds the Zobrist table dimensions fixed at startup."""


class ZobristTable:
    """Precomputed random 64-bit entries Z[depth][action] plus a root constant.

    All workers build the table from the same (seed, max_depth, max_branching)
    triple, so equal paths hash equally everywhere.  The table never grows:
    an out-of-range path is an explicit error, because silent regrowth would
    desynchronize keys across workers.
    """

    def __init__(self, seed: int, max_depth: int, max_branching: int) -> None:
        if max_depth < 1 or max_branching < 1:
            raise ValueError("max_depth and max_branching must be >= 1")
        import random

        rng = random.Random(derive_seed(seed, "zobrist"))
        self.seed = seed
        self.max_depth = max_depth
        self.max_branching = max_branching
        self.root_key: NodeKey = rng.getrandbits(64)
        self._table = [
            [rng.getrandbits(64) for _ in range(max_branching)]
            for _ in range(max_depth)
        ]

    def key(self, path: NodePath) -> NodeKey:
        if len(path) > self.max_depth:
            raise KeyspaceError(
                f"path depth {len(path)} exceeds max_depth {self.max_depth}"
            )
        digest = self.root_key
        table = self._table
        for depth, action in enumerate(path):
            if action >= self.max_branching or action < 0:
                raise KeyspaceError(
                    f"action {action} at depth {depth} exceeds "
                    f"max_branching {self.max_branching}"
                )
            digest ^= table[depth][action]
        return digest


@dataclass(frozen=True)
class WorkerMap:
    worker_count: int

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")

    def home(self, key: NodeKey) -> int:
        return key % self.worker_count


def home_worker(key: NodeKey, wmap: WorkerMap) -> int:
    return wmap.home(key)


@dataclass
class ChildEntry:
    """One child slot in a node record: identity, expansion prior, and the
    (wins, visits, inflight) bandit triple."""

    action: int
    prior: float
    wins: float = 0.0
    visits: int = 0
    inflight: int = 0
    touched: bool = False


@dataclass
class NodeRecord:
    """A stored tree node.

    ``visits`` counts completed simulations backpropagated through this node
    plus the node's own simulations (one for interior nodes, which simulate
    once before they expand; possibly more for terminal leaves), so
    ``visits == own_sims + sum(child.visits)`` holds at all times.
    ``inflight`` mirrors ``sum(child.inflight)``.  ``history``, present only
    under the node-resident-history algorithm, keeps one sibling-snapshot
    row per ancestor level.
    """

    key: NodeKey
    path: NodePath
    wins: float = 0.0
    visits: int = 0
    own_sims: int = 0
    inflight: int = 0
    children: list[ChildEntry] = field(default_factory=list)
    expanded: bool = False
    terminal: bool = False
    history: Optional["HistoryTable"] = None  # noqa: F821 (see mpmcts.history)
    state: Any = None

    @property
    def depth(self) -> int:
        return len(self.path)

    def child_by_action(self, action: int) -> ChildEntry:
        for entry in self.children:
            if entry.action == action:
                return entry
        raise KeyError(f"no child with action {action} at node {self.path}")

    def check_aggregates(self) -> None:
        """Recompute V and T from children and compare with the maintained
        values; both accounting routes must agree.  Also bounds every
        cumulative reward by its visit count (rewards live in [-1, 1])."""
        v_sum = sum(ch.visits for ch in self.children)
        t_sum = sum(ch.inflight for ch in self.children)
        if self.visits != v_sum + self.own_sims:
            raise AssertionError(
                f"visit aggregate mismatch at {self.path}: "
                f"V={self.visits} children={v_sum} own={self.own_sims}"
            )
        if self.inflight != t_sum:
            raise AssertionError(
                f"inflight aggregate mismatch at {self.path}: "
                f"T={self.inflight} children={t_sum}"
            )
        slop = 1e-9
        if abs(self.wins) > self.visits + slop * max(1, self.visits):
            raise AssertionError(
                f"reward bound violated at {self.path}: "
                f"|{self.wins}| > {self.visits}"
            )
        for child in self.children:
            if child.inflight < 0 or child.visits < 0:
                raise AssertionError(f"negative counter at {self.path}/{child.action}")
            if abs(child.wins) > child.visits + slop * max(1, child.visits):
                raise AssertionError(
                    f"reward bound violated at {self.path} child {child.action}"
                )


class HomeViolation(RuntimeError):
    """A worker touched a record it does not own -- a programming error."""


class DigestCollision(RuntimeError):
    """Two distinct paths produced the same 64-bit digest."""


class Store:
    """Per-worker hash table over node digests.

    Backed by a dict (already open-addressed under the hood); full-path
    equality confirms every hit so a 64-bit digest collision faults loudly
    instead of silently merging two nodes.
    """

    def __init__(self, worker_id: int, wmap: WorkerMap) -> None:
        self.worker_id = worker_id
        self.wmap = wmap
        self._records: dict[NodeKey, NodeRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[NodeRecord]:
        return iter(self._records.values())

    def _check_home(self, key: NodeKey) -> None:
        home = self.wmap.home(key)
        if home != self.worker_id:
            raise HomeViolation(
                f"worker {self.worker_id} accessed key {key:#018x} "
                f"homed at worker {home}"
            )

    def lookup(self, key: NodeKey, path: NodePath) -> NodeRecord | None:
        self._check_home(key)
        record = self._records.get(key)
        if record is None:
            return None
        if record.path != path:
            raise DigestCollision(
                f"digest {key:#018x} maps to both {record.path} and {path}"
            )
        return record

    def write(self, record: NodeRecord) -> None:
        self._check_home(record.key)
        existing = self._records.get(record.key)
        if existing is not None and existing.path != record.path:
            raise DigestCollision(
                f"digest {record.key:#018x} maps to both "
                f"{existing.path} and {record.path}"
            )
        self._records[record.key] = record

    def dump_lines(self) -> list[str]:
        """Tree-dump rows: digest hex, dotted path, wins, visits, depth."""
        lines = []
        for record in sorted(self._records.values(), key=lambda r: r.path):
            dotted = ".".join(str(a) for a in record.path)
            lines.append(
                f"{record.key:016x} {dotted} {record.wins!r} "
                f"{record.visits} {record.depth}"
            )
        return lines
