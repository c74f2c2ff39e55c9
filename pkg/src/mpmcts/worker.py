"""Worker state machines for the three distributed search algorithms.

Each worker is a strictly sequential event loop: messages arrive, become
jobs, and every job produces at most one outgoing message, so the number of
in-flight work units stays constant at overload * workers until the run
starts draining.

The three variants share the walk-down/walk-up skeleton:

* plain hash-distributed search backpropagates every simulation all the way
  to the root;
* the depth-first variant carries a sibling-snapshot history in each
  message and keeps searching below a node while the history says its path
  is still the best, cutting almost all shallow backpropagation traffic;
* the node-resident variant additionally stores a history table in every
  node and merges message tables into it, so crossing jobs see each other's
  results much sooner.

Simulation runs synchronously inside the leaf's home worker; a slow scorer
stalls only that worker.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from mpmcts import kernels
from mpmcts.config import Algorithm, RunConfig
from mpmcts.history import (
    EMPTY_HISTORY,
    HistoryRow,
    HistoryTable,
    SiblingStat,
    history_append,
    history_current_best,
    history_merge,
    history_refresh_bottom,
    history_remove_bottom,
    history_truncate,
)
from mpmcts.metrics import WorkerCounters
from mpmcts.problems import AdapterError, prune_by_cumulative_prior
from mpmcts.tree import (
    ChildEntry,
    NodePath,
    NodeRecord,
    Store,
    WorkerMap,
    ZobristTable,
    derive_seed,
)
from mpmcts.wire import Message, MessageKind


class ProtocolError(RuntimeError):
    """A message arrived that the protocol forbids (t underflow, backprop
    into a missing parent, ...)."""


@dataclass
class Job:
    kind: MessageKind
    path: NodePath
    key: int
    reward: Optional[float] = None
    history: Optional[HistoryTable] = None


@dataclass
class Worker:
    worker_id: int
    cfg: RunConfig
    problem: object
    zobrist: ZobristTable
    wmap: WorkerMap
    send: Callable[..., None]  # bound transport send, see engine/net runners
    now: Callable[[], int | float]
    counters: WorkerCounters = field(init=False)
    trace_sink: Optional[Callable[[int, NodePath, float], None]] = None

    def __post_init__(self) -> None:
        self.store = Store(self.worker_id, self.wmap)
        self.jobq: deque[Job] = deque()
        self.rollout_rng = random.Random(
            derive_seed(self.cfg.seed, "rollout", self.worker_id)
        )
        self.counters = WorkerCounters(worker_id=self.worker_id)
        self.best_reward: float | None = None
        self.best_solution: str = ""
        self.stopping = False
        self._uses_history = self.cfg.algorithm in (
            Algorithm.TDS_DF_UCT,
            Algorithm.MP_MCTS,
        )
        self._node_history = self.cfg.algorithm is Algorithm.MP_MCTS
        self._formula_id = self.cfg.formula.value
        self._c = self.cfg.exploration_c

    # -- job intake ---------------------------------------------------------

    def seed_initial_jobs(self) -> None:
        """Queue overload * workers root-selection jobs.  Only the root's
        home worker may call this, once, at startup."""
        root_key = self.zobrist.root_key
        if self.wmap.home(root_key) != self.worker_id:
            raise ProtocolError(
                f"seed_initial_jobs on worker {self.worker_id}, but the root "
                f"is homed at worker {self.wmap.home(root_key)}"
            )
        history = EMPTY_HISTORY if self._uses_history else None
        for _ in range(self.cfg.overload * self.cfg.workers):
            self.jobq.append(Job(MessageKind.SELECT, (), root_key, None, history))

    def on_message(self, msg: Message) -> None:
        if msg.kind is MessageKind.SELECT:
            self.counters.select_received += 1
            self.jobq.append(Job(msg.kind, msg.path, msg.key, None, msg.history))
        elif msg.kind is MessageKind.BACKPROP:
            self.counters.bp_received += 1
            self.jobq.append(Job(msg.kind, msg.path, msg.key, msg.reward, msg.history))
        else:
            raise ProtocolError(f"{msg.kind} does not belong in the job queue")

    def process_job(self, job: Job) -> None:
        if job.kind is MessageKind.SELECT:
            self._handle_select(job)
        else:
            self._handle_backprop(job)

    # -- outgoing messages --------------------------------------------------

    def _send(self, kind: MessageKind, path: NodePath, key: int, **kw) -> None:
        self.send(kind=kind, src=self.worker_id, path=path, key=key, **kw)

    def _send_select(self, path: NodePath, key: int, history, stats) -> None:
        self._send(
            MessageKind.SELECT,
            path,
            key,
            dest=self.wmap.home(key),
            history=history,
            child_stats=stats,
        )

    def _send_backprop(self, path: NodePath, reward: float, history) -> None:
        parent_path = path[:-1]
        parent_key = self.zobrist.key(parent_path)
        self._send(
            MessageKind.BACKPROP,
            path,
            self.zobrist.key(path),
            dest=self.wmap.home(parent_key),
            reward=reward,
            history=history,
        )

    # -- selection ----------------------------------------------------------

    def _handle_select(self, job: Job) -> None:
        record = self.store.lookup(job.key, job.path)
        if record is None:
            record = NodeRecord(
                key=job.key,
                path=job.path,
                state=self._state_of(job.path),
            )
            record.terminal = self.problem.is_terminal(record.state)
            self._simulate(record, job)
            return
        if (
            not record.expanded
            and not record.terminal
            and record.visits >= self.cfg.expansion_threshold - 1
            and record.depth < self.zobrist.max_depth
        ):
            self._expand(record)
        if not record.children:
            # terminal, below the expansion threshold, or at the depth cap:
            # behaves as a leaf again
            self._simulate(record, job)
            return
        self._descend(record, job)

    def _state_of(self, path: NodePath):
        state = self.problem.root_state()
        for action in path:
            state = self.problem.apply(state, action)
        return state

    def _expand(self, record: NodeRecord) -> None:
        candidates = self.problem.expand_candidates(record.state)
        if not candidates:
            record.terminal = True
            return
        kept = prune_by_cumulative_prior(candidates, self.cfg.prune_cumulative)
        record.children = [ChildEntry(action, prior) for action, prior in kept]
        record.expanded = True

    def _best_child_index(self, record: NodeRecord) -> int:
        children = record.children
        return kernels.best_index(
            self._formula_id,
            self._c,
            [ch.wins for ch in children],
            [ch.visits for ch in children],
            [ch.inflight for ch in children],
            record.visits,
            record.inflight,
        )

    def _descend(self, record: NodeRecord, job: Job) -> None:
        idx = self._best_child_index(record)
        child = record.children[idx]
        child.inflight += 1
        record.inflight += 1
        child.touched = True
        child_path = record.path + (child.action,)
        child_key = self.zobrist.key(child_path)

        out_history = None
        if self._uses_history:
            incoming = job.history if job.history is not None else EMPTY_HISTORY
            if self._node_history:
                merged = history_merge(
                    record.history if record.history is not None else EMPTY_HISTORY,
                    history_truncate(incoming, record.depth),
                )
                record.history = merged
                base = merged
            else:
                base = incoming
            out_history = history_append(
                base, self._snapshot_row(record, child.action, child_key)
            )
        self.store.write(record)
        stats = {"w": child.wins, "v": child.visits, "t": child.inflight}
        self._send_select(child_path, child_key, out_history, stats)

    def _snapshot_row(
        self, record: NodeRecord, chosen_action: int, chosen_key: int
    ) -> HistoryRow:
        return HistoryRow(
            parent_key=record.key,
            chosen_action=chosen_action,
            chosen_key=chosen_key,
            entries=tuple(
                SiblingStat(ch.action, ch.wins, ch.visits, ch.inflight)
                for ch in record.children
            ),
        )

    # -- simulation ---------------------------------------------------------

    def _simulate(self, record: NodeRecord, job: Job) -> None:
        repeat = record.own_sims > 0 and self._dead_end(record)
        if repeat:
            # a dead end measured again: the score is already known, so the
            # repeat records the penalizing -1 -- saturated leaves poison
            # their own mean and selection moves on
            reward, solution = -1.0, ""
        else:
            try:
                _, solution = self.problem.rollout(record.state, self.rollout_rng)
                reward = self.problem.score(solution)
            except AdapterError:
                # failed rollouts take the same penalizing convention
                reward, solution = -1.0, ""
        if not -1.0 <= reward <= 1.0:
            raise AdapterError(f"reward {reward} outside [-1, 1]")
        record.wins += reward
        record.visits += 1
        record.own_sims += 1
        depth = record.depth
        self.counters.record_simulation(depth)
        if self.best_reward is None or reward > self.best_reward:
            self.best_reward = reward
            self.best_solution = solution
            self.counters.note_best(self.now(), reward)
        if self.trace_sink is not None:
            self.trace_sink(self.worker_id, record.path, reward)

        out_history = None
        if self.cfg.algorithm is Algorithm.TDS_DF_UCT and depth > 0:
            out_history = history_remove_bottom(job.history)
        elif self._node_history:
            # node-resident tables only ever merge; the finished reward
            # reaches them through the real child-entry updates that later
            # snapshots carry
            resident = history_merge(
                record.history if record.history is not None else EMPTY_HISTORY,
                history_truncate(
                    job.history if job.history is not None else EMPTY_HISTORY, depth
                ),
            )
            record.history = resident
            out_history = resident
        self.store.write(record)

        if depth == 0:
            # the root was the very first leaf; no parent to notify, so the
            # work unit restarts at the root to keep the in-flight count
            self._replenish_root()
            return
        self._send_backprop(record.path, reward, out_history)

    def _dead_end(self, record: NodeRecord) -> bool:
        """True when this node can never grow children: re-simulating it can
        only repeat a known score."""
        return record.terminal or record.depth >= self.zobrist.max_depth

    def _replenish_root(self) -> None:
        if self.stopping:
            return
        root_key = self.zobrist.root_key
        history = EMPTY_HISTORY if self._uses_history else None
        self._send_select((), root_key, history, None)

    # -- backpropagation ----------------------------------------------------

    def _handle_backprop(self, job: Job) -> None:
        if not job.path:
            raise ProtocolError("backprop message for the root itself")
        if job.reward is None:
            raise ProtocolError("backprop without a reward")
        parent_path = job.path[:-1]
        parent_key = self.zobrist.key(parent_path)
        record = self.store.lookup(parent_key, parent_path)
        if record is None:
            raise ProtocolError(
                f"backprop into missing parent {parent_path} on worker "
                f"{self.worker_id}"
            )
        entry = record.child_by_action(job.path[-1])
        if entry.inflight <= 0:
            raise ProtocolError(
                f"virtual-loss underflow at {parent_path} child {entry.action}"
            )
        entry.inflight -= 1
        record.inflight -= 1
        entry.wins += job.reward
        entry.visits += 1
        record.wins += job.reward
        record.visits += 1

        if self.cfg.algorithm is Algorithm.TDS_UCT:
            self._finish_backprop_tds(record, job, parent_path)
        else:
            self._finish_backprop_df(record, job, parent_path)

    def _finish_backprop_tds(
        self, record: NodeRecord, job: Job, parent_path: NodePath
    ) -> None:
        self.store.write(record)
        if parent_path:
            self._send_backprop(parent_path, job.reward, None)
        elif not self.stopping:
            # reward reached the root: replenish by starting a fresh descent
            self._descend(record, Job(MessageKind.SELECT, (), record.key))

    def _finish_backprop_df(
        self, record: NodeRecord, job: Job, parent_path: NodePath
    ) -> None:
        """Shared by the message-history and node-resident-history variants;
        they differ in where the table that answers GetCurrentBest lives."""
        depth = len(parent_path)
        incoming = job.history if job.history is not None else EMPTY_HISTORY
        if self._node_history:
            resident = history_merge(
                record.history if record.history is not None else EMPTY_HISTORY,
                history_truncate(incoming, depth),
            )
            record.history = resident
            table = resident
        else:
            # fold this chain's reward into the snapshot before judging it,
            # so the test sees the result the pending backprop would deliver
            table = incoming
            if depth > 0:
                table = history_refresh_bottom(table, job.reward)
        self.store.write(record)

        resume = depth == 0 or (
            history_current_best(table, self.cfg.vl_formula) == record.key
        )
        if resume and not self.stopping:
            self._descend(record, Job(MessageKind.SELECT, parent_path, record.key, None, table))
            return
        if depth == 0:
            return  # draining: the unit ends at the root
        if self._node_history:
            out_history = record.history
        else:
            out_history = history_remove_bottom(table)
        self._send_backprop(parent_path, job.reward, out_history)
