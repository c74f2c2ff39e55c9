"""Single-handler behaviors, driven through a transport stub that captures
every outgoing message."""

from __future__ import annotations

import pytest
from conftest import make_cfg

from mpmcts.history import EMPTY_HISTORY, history_append
from mpmcts.problems import build_problem
from mpmcts.tree import WorkerMap, ZobristTable
from mpmcts.wire import Message, MessageKind
from mpmcts.worker import Job, ProtocolError, Worker


class SentCapture:
    def __init__(self):
        self.messages: list[Message] = []
        self._seq = 0

    def __call__(self, kind, src, dest, path=(), key=0, reward=None, history=None,
                 child_stats=None, best_found=None):
        self._seq += 1
        self.messages.append(
            Message(kind=kind, src=src, dest=dest, seq=self._seq, key=key,
                    path=path, reward=reward, child_stats=child_stats,
                    history=history, best_found=best_found)
        )

    def pop_all(self):
        out, self.messages = self.messages, []
        return out


def standalone_worker(**overrides):
    overrides.setdefault("workers", 1)
    cfg = make_cfg(**overrides)
    zobrist = ZobristTable(cfg.seed, *cfg.derived_dimensions())
    sent = SentCapture()
    worker = Worker(
        worker_id=0,
        cfg=cfg,
        problem=build_problem(cfg.problem, cfg.seed),
        zobrist=zobrist,
        wmap=WorkerMap(1),
        send=sent,
        now=lambda: 0,
    )
    return worker, sent, zobrist


def select_job(worker, path=()):
    history = EMPTY_HISTORY if worker._uses_history else None
    return Job(MessageKind.SELECT, path, worker.zobrist.key(path), None, history)


def bp_job(worker, path, reward, history=None):
    return Job(MessageKind.BACKPROP, path, worker.zobrist.key(path), reward, history)


class TestSeeding:
    def test_counts(self):
        worker, _, _ = standalone_worker(workers=1, overload=1)
        worker.seed_initial_jobs()
        assert len(worker.jobq) == 1

    def test_overload_times_workers(self):
        cfg = make_cfg(workers=4, overload=3)
        zobrist = ZobristTable(cfg.seed, *cfg.derived_dimensions())
        wmap = WorkerMap(4)
        home = wmap.home(zobrist.root_key)
        worker = Worker(worker_id=home, cfg=cfg,
                        problem=build_problem(cfg.problem, cfg.seed),
                        zobrist=zobrist, wmap=wmap, send=SentCapture(), now=lambda: 0)
        worker.seed_initial_jobs()
        assert len(worker.jobq) == 12

    def test_non_home_worker_faults(self):
        cfg = make_cfg(workers=4, overload=3)
        zobrist = ZobristTable(cfg.seed, *cfg.derived_dimensions())
        wmap = WorkerMap(4)
        wrong = (wmap.home(zobrist.root_key) + 1) % 4
        worker = Worker(worker_id=wrong, cfg=cfg,
                        problem=build_problem(cfg.problem, cfg.seed),
                        zobrist=zobrist, wmap=wmap, send=SentCapture(), now=lambda: 0)
        with pytest.raises(ProtocolError):
            worker.seed_initial_jobs()


class TestSelectPlain:
    def test_fresh_root_simulates_and_replenishes(self):
        worker, sent, _ = standalone_worker()
        worker.process_job(select_job(worker))
        assert worker.counters.simulations_done == 1
        (out,) = sent.pop_all()
        assert out.kind is MessageKind.SELECT and out.path == ()

    def test_second_visit_expands_then_descends(self):
        worker, sent, _ = standalone_worker()
        worker.process_job(select_job(worker))
        sent.pop_all()
        worker.process_job(select_job(worker))
        root = worker.store.lookup(worker.zobrist.root_key, ())
        assert root.expanded and len(root.children) == 3
        (out,) = sent.pop_all()
        assert out.kind is MessageKind.SELECT and len(out.path) == 1
        chosen = root.child_by_action(out.path[0])
        assert chosen.inflight == 1 and root.inflight == 1

    def test_fresh_leaf_backprops_toward_parent(self):
        worker, sent, _ = standalone_worker()
        worker.process_job(select_job(worker, (0,)))
        (out,) = sent.pop_all()
        assert out.kind is MessageKind.BACKPROP
        assert out.path == (0,)
        assert out.reward is not None

    def test_concurrent_selects_spread_over_children(self):
        worker, sent, _ = standalone_worker()
        worker.process_job(select_job(worker))  # sim at root
        sent.pop_all()
        worker.process_job(select_job(worker))  # expand + first descent
        first = sent.pop_all()[0]
        worker.process_job(select_job(worker))  # second descent, vloss visible
        second = sent.pop_all()[0]
        assert first.path != second.path  # virtual loss diversifies


class TestBackpropPlain:
    def _prepare_descent(self, worker, sent):
        worker.process_job(select_job(worker))
        worker.process_job(select_job(worker))
        return sent.pop_all()[-1]  # SELECT at depth 1

    def test_bp_chain_step_and_root_restart(self):
        worker, sent, _ = standalone_worker()
        depth1 = self._prepare_descent(worker, sent)
        worker.process_job(select_job(worker, depth1.path))  # sim at depth 1
        bp = sent.pop_all()[0]
        assert bp.kind is MessageKind.BACKPROP and bp.path == depth1.path
        worker.process_job(bp_job(worker, bp.path, bp.reward))
        (restart,) = sent.pop_all()
        # reward reached the root: a fresh SELECT goes out, no BP upward
        assert restart.kind is MessageKind.SELECT and len(restart.path) == 1
        root = worker.store.lookup(worker.zobrist.root_key, ())
        finished = root.child_by_action(depth1.path[0])
        assert finished.visits == 1  # the reward landed
        restarted = root.child_by_action(restart.path[0])
        assert restarted.inflight == 1  # the fresh descent holds one loss
        assert root.inflight == 1

    def test_virtual_loss_underflow_faults(self):
        worker, sent, _ = standalone_worker()
        depth1 = self._prepare_descent(worker, sent)
        worker.process_job(select_job(worker, depth1.path))
        bp = sent.pop_all()[0]
        worker.process_job(bp_job(worker, bp.path, bp.reward))
        sent.pop_all()
        with pytest.raises(ProtocolError):
            worker.process_job(bp_job(worker, bp.path, 0.0))

    def test_bp_into_missing_parent_faults(self):
        worker, _, _ = standalone_worker()
        with pytest.raises(ProtocolError):
            worker.process_job(bp_job(worker, (0, 1), 0.5))


class TestDepthFirstHistory:
    def test_root_job_has_empty_history(self):
        worker, sent, _ = standalone_worker(algorithm="tds-df-uct")
        worker.seed_initial_jobs()
        assert worker.jobq[0].history == EMPTY_HISTORY

    def test_history_grows_one_row_per_level(self):
        worker, sent, _ = standalone_worker(algorithm="tds-df-uct")
        worker.process_job(select_job(worker))
        sent.pop_all()
        worker.process_job(select_job(worker))
        (out,) = sent.pop_all()
        assert len(out.history) == 1
        assert out.history.rows[0].parent_key == worker.zobrist.root_key
        assert out.history.rows[0].chosen_action == out.path[0]

    def test_leaf_sim_removes_bottom_row(self):
        worker, sent, _ = standalone_worker(algorithm="tds-df-uct")
        worker.process_job(select_job(worker))
        sent.pop_all()
        worker.process_job(select_job(worker))
        descent = sent.pop_all()[0]
        worker.process_job(
            Job(MessageKind.SELECT, descent.path, descent.key, None, descent.history)
        )
        (bp,) = sent.pop_all()
        assert bp.kind is MessageKind.BACKPROP
        assert len(bp.history) == len(descent.history) - 1

    def test_bp_still_best_resumes_with_select(self):
        worker, sent, _ = standalone_worker(algorithm="tds-df-uct")
        for _ in range(2):
            worker.process_job(select_job(worker))
        descent = sent.pop_all()[-1]
        worker.process_job(
            Job(MessageKind.SELECT, descent.path, descent.key, None, descent.history)
        )
        bp = sent.pop_all()[0]
        worker.process_job(
            Job(MessageKind.BACKPROP, bp.path, bp.key, bp.reward, bp.history)
        )
        (out,) = sent.pop_all()
        # depth-1 parent == root's best or root branch: either way the unit
        # continues with a SELECT rather than producing a BP
        assert out.kind is MessageKind.SELECT

    def test_bp_dominated_parent_forwards_upward(self):
        worker, sent, zobrist = standalone_worker(
            algorithm="tds-df-uct",
            problem={"kind": "synthetic", "depth": 4, "branching": 3},
        )
        from mpmcts.history import HistoryRow, SiblingStat
        from mpmcts.tree import ChildEntry, NodeRecord

        # hand-build the parent record with one in-flight child
        parent_path = (0, 0)
        parent = NodeRecord(
            key=zobrist.key(parent_path), path=parent_path,
            wins=0.0, visits=2, own_sims=1, inflight=1, expanded=True,
            children=[
                ChildEntry(action=0, prior=0.5, wins=0.5, visits=1, inflight=1),
                ChildEntry(action=1, prior=0.5),
            ],
        )
        worker.store.write(parent)
        child_path = parent_path + (0,)
        dominating = history_append(
            history_append(
                EMPTY_HISTORY,
                HistoryRow(
                    zobrist.root_key, 0, zobrist.key((0,)),
                    (SiblingStat(0, 5.0, 5, 0), SiblingStat(1, -5.0, 5, 0)),
                ),
            ),
            HistoryRow(
                zobrist.key((0,)), 0, parent.key,
                # sibling (action 1) strictly dominates the on-path child
                (SiblingStat(0, -5.0, 5, 0), SiblingStat(1, 5.0, 5, 0)),
            ),
        )
        worker.process_job(
            Job(MessageKind.BACKPROP, child_path, zobrist.key(child_path), 0.1, dominating)
        )
        (out,) = sent.pop_all()
        assert out.kind is MessageKind.BACKPROP
        assert out.path == parent_path
        assert len(out.history) == len(dominating) - 1


class TestNodeResidentHistory:
    def test_leaf_stores_path_length_rows(self):
        worker, sent, _ = standalone_worker(algorithm="mp-mcts")
        for _ in range(2):
            worker.process_job(select_job(worker))
        descent = sent.pop_all()[-1]
        worker.process_job(
            Job(MessageKind.SELECT, descent.path, descent.key, None, descent.history)
        )
        record = worker.store.lookup(descent.key, descent.path)
        assert record.history is not None
        assert len(record.history) == len(descent.path)

    def test_interior_merges_incoming_rows(self):
        worker, sent, zobrist = standalone_worker(algorithm="mp-mcts")
        for _ in range(2):
            worker.process_job(select_job(worker))
        descent = sent.pop_all()[-1]
        worker.process_job(
            Job(MessageKind.SELECT, descent.path, descent.key, None, descent.history)
        )
        sent.pop_all()
        # a later crossing job carries a fresher snapshot of the same row
        from mpmcts.history import HistoryRow, SiblingStat

        fresh_entries = tuple(
            SiblingStat(row_entry.action, row_entry.w + 1.0, row_entry.v + 10, row_entry.t)
            for row_entry in descent.history.rows[0].entries
        )
        fresher = history_append(
            EMPTY_HISTORY,
            HistoryRow(
                zobrist.root_key,
                descent.history.rows[0].chosen_action,
                descent.history.rows[0].chosen_key,
                fresh_entries,
            ),
        )
        worker.process_job(
            Job(MessageKind.SELECT, descent.path, descent.key, None, fresher)
        )
        record = worker.store.lookup(descent.key, descent.path)
        merged = record.history.rows[0].entries
        assert all(entry.v >= 10 for entry in merged)

    def test_bp_test_reads_node_table_not_message(self):
        worker, sent, zobrist = standalone_worker(algorithm="mp-mcts")
        for _ in range(2):
            worker.process_job(select_job(worker))
        descent = sent.pop_all()[-1]
        worker.process_job(
            Job(MessageKind.SELECT, descent.path, descent.key, None, descent.history)
        )
        bp = sent.pop_all()[0]
        worker.process_job(
            Job(MessageKind.BACKPROP, bp.path, bp.key, bp.reward, bp.history)
        )
        (out,) = sent.pop_all()
        assert out.kind is MessageKind.SELECT  # root level always resumes
