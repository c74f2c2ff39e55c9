from __future__ import annotations

import random

import pytest

from mpmcts.tree import (
    ChildEntry,
    DigestCollision,
    HomeViolation,
    KeyspaceError,
    NodeRecord,
    Store,
    WorkerMap,
    ZobristTable,
    home_worker,
)


class TestZobrist:
    def test_empty_path_is_root_constant(self):
        table = ZobristTable(seed=1, max_depth=4, max_branching=3)
        assert table.key(()) == table.root_key

    def test_deterministic(self):
        a = ZobristTable(seed=9, max_depth=5, max_branching=4)
        b = ZobristTable(seed=9, max_depth=5, max_branching=4)
        assert a.key((0, 1, 2)) == b.key((0, 1, 2))
        assert a.root_key == b.root_key

    def test_order_sensitive(self):
        table = ZobristTable(seed=42, max_depth=4, max_branching=3)
        assert table.key((0, 1)) != table.key((1, 0))

    def test_depth_overflow_rejected(self):
        table = ZobristTable(seed=1, max_depth=2, max_branching=2)
        with pytest.raises(KeyspaceError):
            table.key((0, 1, 0))

    def test_branching_overflow_rejected(self):
        table = ZobristTable(seed=1, max_depth=2, max_branching=2)
        with pytest.raises(KeyspaceError):
            table.key((2,))

    def test_injective_on_small_enumeration(self):
        # every path of depth <= 6 over branching 4: 5461 paths, no collisions
        table = ZobristTable(seed=7, max_depth=6, max_branching=4)
        seen = {}
        stack = [()]
        while stack:
            path = stack.pop()
            digest = table.key(path)
            assert digest not in seen, f"collision {path} vs {seen[digest]}"
            seen[digest] = path
            if len(path) < 6:
                stack.extend(path + (a,) for a in range(4))
        assert len(seen) == sum(4**d for d in range(7))


class TestHomeWorker:
    def test_single_worker_owns_everything(self):
        wmap = WorkerMap(1)
        assert home_worker(12345678, wmap) == 0

    def test_modulo(self):
        assert home_worker(7, WorkerMap(4)) == 3

    def test_balanced_buckets(self):
        rng = random.Random(5)
        wmap = WorkerMap(16)
        buckets = [0] * 16
        for _ in range(10_000):
            buckets[home_worker(rng.getrandbits(64), wmap)] += 1
        assert all(400 <= count <= 850 for count in buckets), buckets

    def test_zobrist_partition_balance(self):
        # composed with real node keys: max/mean <= 1.5 over >= 1000 nodes
        table = ZobristTable(seed=3, max_depth=6, max_branching=4)
        wmap = WorkerMap(16)
        buckets = [0] * 16
        count = 0
        stack = [()]
        while stack and count < 2000:
            path = stack.pop()
            buckets[wmap.home(table.key(path))] += 1
            count += 1
            if len(path) < 6:
                stack.extend(path + (a,) for a in range(4))
        mean = count / 16
        assert max(buckets) / mean <= 1.5

    def test_zero_workers_rejected(self):
        with pytest.raises(ValueError):
            WorkerMap(0)


class TestStore:
    def setup_method(self):
        self.wmap = WorkerMap(4)
        self.zobrist = ZobristTable(seed=11, max_depth=4, max_branching=3)

    def _record(self, path):
        return NodeRecord(key=self.zobrist.key(path), path=path)

    def _store_for(self, key):
        return Store(self.wmap.home(key), self.wmap)

    def test_absent_before_write(self):
        record = self._record((0, 1))
        store = self._store_for(record.key)
        assert store.lookup(record.key, record.path) is None

    def test_read_your_writes(self):
        record = self._record((0, 1))
        store = self._store_for(record.key)
        store.write(record)
        assert store.lookup(record.key, record.path) is record

    def test_last_write_wins(self):
        first = self._record((2,))
        second = self._record((2,))
        second.visits = 5
        store = self._store_for(first.key)
        store.write(first)
        store.write(second)
        assert store.lookup(first.key, (2,)).visits == 5

    def test_cross_worker_access_faults(self):
        record = self._record((0,))
        wrong = (self.wmap.home(record.key) + 1) % 4
        store = Store(wrong, self.wmap)
        with pytest.raises(HomeViolation):
            store.lookup(record.key, record.path)
        with pytest.raises(HomeViolation):
            store.write(record)

    def test_digest_collision_faults(self):
        record = self._record((0, 1))
        store = self._store_for(record.key)
        store.write(record)
        with pytest.raises(DigestCollision):
            store.lookup(record.key, (1, 0))

    def test_dump_lines_format(self):
        record = self._record((0, 1))
        record.wins, record.visits = 0.5, 3
        store = self._store_for(record.key)
        store.write(record)
        (line,) = store.dump_lines()
        digest, dotted, wins, visits, depth = line.split()
        assert digest == f"{record.key:016x}"
        assert dotted == "0.1"
        assert float(wins) == 0.5 and int(visits) == 3 and int(depth) == 2


class TestAggregates:
    def test_recomputation_matches(self):
        record = NodeRecord(key=1, path=(0,), visits=5, own_sims=1, inflight=2)
        record.children = [
            ChildEntry(action=0, prior=0.5, wins=1.0, visits=3, inflight=1),
            ChildEntry(action=1, prior=0.5, wins=-0.5, visits=1, inflight=1),
        ]
        record.check_aggregates()

    def test_mismatch_detected(self):
        record = NodeRecord(key=1, path=(0,), visits=7, own_sims=1)
        record.children = [ChildEntry(action=0, prior=1.0, visits=3)]
        with pytest.raises(AssertionError):
            record.check_aggregates()

    def test_reward_bound_enforced(self):
        record = NodeRecord(key=1, path=(0,), wins=4.5, visits=3, own_sims=3)
        with pytest.raises(AssertionError):
            record.check_aggregates()
