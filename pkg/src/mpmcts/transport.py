"""Deterministic discrete-event transport over a virtual clock.

All workers live in one process and are cooperatively scheduled; the
transport owns the clock.  A send at time ``now`` becomes deliverable at
``now + latency`` (constant, or seeded uniform jitter in [1, L]); delivery
within one ordered link (src, dest) is always FIFO, enforced by clamping
each link's delivery times to be non-decreasing.  Events with equal delivery
time order by (src, seq), giving one total deterministic order: the whole
execution is a function of (config, seeds).
"""

from __future__ import annotations

import heapq
import random
from collections import Counter

from mpmcts.tree import derive_seed
from mpmcts.wire import Message, MessageKind, TransportFault, decode, encode


class DeadlockError(RuntimeError):
    """No deliverable events and no runnable worker: a protocol bug."""


class SimTransport:
    def __init__(
        self,
        worker_count: int,
        latency: int = 1,
        jitter: int = 0,
        seed: int = 0,
        codec_check: bool = False,
        record_trace: bool = False,
    ) -> None:
        if latency < 1:
            raise ValueError("latency must be >= 1 tick")
        if jitter and jitter < 1:
            raise ValueError("jitter upper bound must be >= 1 tick")
        self.worker_count = worker_count
        self.latency = latency
        self.jitter = jitter
        self.codec_check = codec_check
        self.now = 0
        self._rng = random.Random(derive_seed(seed, "latency"))
        self._events: list[tuple[int, int, int, Message]] = []
        self._due: list[list[Message]] = [[] for _ in range(worker_count)]
        self._seq = [0] * worker_count  # per-sender, strictly increasing
        self._link_last: dict[tuple[int, int], int] = {}
        self.sent: Counter[MessageKind] = Counter()
        self.received: Counter[MessageKind] = Counter()
        self.trace: list[tuple[int, int, int, str]] | None = (
            [] if record_trace else None
        )

    def next_seq(self, src: int) -> int:
        self._seq[src] += 1
        return self._seq[src]

    def send(self, msg: Message) -> None:
        if not 0 <= msg.dest < self.worker_count:
            raise TransportFault(f"dest {msg.dest} out of range")
        if self.codec_check:
            msg = decode(encode(msg))  # force a wire round-trip
        lat = self._rng.randint(1, self.jitter) if self.jitter else self.latency
        link = (msg.src, msg.dest)
        deliver_at = max(self.now + lat, self._link_last.get(link, 0))
        self._link_last[link] = deliver_at
        heapq.heappush(self._events, (deliver_at, msg.src, msg.seq, msg))
        self.sent[msg.kind] += 1

    def _deliver_due(self) -> None:
        while self._events and self._events[0][0] <= self.now:
            _, _, _, msg = heapq.heappop(self._events)
            self._due[msg.dest].append(msg)
            self.received[msg.kind] += 1
            if self.trace is not None:
                self.trace.append((self.now, msg.src, msg.dest, msg.kind.value))

    def poll_receive(self, worker_id: int) -> list[Message]:
        """All messages for this worker deliverable at the current time,
        link-FIFO order preserved."""
        self._deliver_due()
        out = self._due[worker_id]
        self._due[worker_id] = []
        return out

    def pending(self) -> int:
        return len(self._events) + sum(len(bucket) for bucket in self._due)

    def pending_kinds(self) -> Counter:
        kinds = Counter(event[3].kind for event in self._events)
        for bucket in self._due:
            kinds.update(msg.kind for msg in bucket)
        return kinds

    def advance(self) -> int:
        """Jump the clock to the next event time.  Raises DeadlockError with
        a queue dump when nothing is pending -- the engine only advances when
        work should still be in flight."""
        if not self._events:
            raise DeadlockError(
                f"no pending events at t={self.now}; "
                f"sent={dict(self.sent)} received={dict(self.received)}"
            )
        self.now = self._events[0][0]
        return self.now
