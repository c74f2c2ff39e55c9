"""Deterministic single-process run driver over the simulated transport.

Per tick: deliver every due message, then let each worker (in id order)
drain its job queue; outgoing messages land at least one tick later, so
queues empty completely every tick and the whole execution is a pure
function of (config, seeds).

Run phases:

1. seed overload * workers root jobs on the root's home worker;
2. steady state -- every processed job emits exactly one message, keeping
   the in-flight unit count constant (asserted every tick);
3. budget exhausted -- workers stop replenishing at the root, in-flight
   chains drain to quiescence, every virtual-loss counter returns to zero;
4. worker 0 broadcasts STOP, workers answer REPORT with their counters and
   local best, worker 0 aggregates the run report.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from mpmcts.config import Algorithm, RunConfig
from mpmcts.metrics import WorkerCounters, emit_report, mean_sim_depth
from mpmcts.problems import build_problem
from mpmcts.transport import DeadlockError, SimTransport
from mpmcts.tree import Store, WorkerMap, ZobristTable
from mpmcts.wire import Message, MessageKind, canonical_dumps
from mpmcts.worker import Worker


@dataclass
class RunResult:
    report: dict
    counters: list[WorkerCounters]
    stores: list[Store]
    trace: list[tuple[int, tuple[int, ...], float]]
    transport: SimTransport
    conservation_checked: bool = True


class ConservationError(AssertionError):
    pass


@dataclass
class _Reports:
    collected: dict[int, Message] = field(default_factory=dict)


def run_distributed_sim(
    cfg: RunConfig,
    problem_factory=None,
    record_trace: bool = False,
    check_invariants: bool = True,
    codec_check: bool = False,
) -> RunResult:
    if cfg.transport != "sim":
        raise ValueError("run_distributed_sim drives the sim transport only")
    if cfg.algorithm is Algorithm.SEQUENTIAL:
        raise ValueError("the sequential oracle runs via mpmcts.sequential")

    max_depth, max_branching = cfg.derived_dimensions()
    zobrist = ZobristTable(cfg.seed, max_depth, max_branching)
    wmap = WorkerMap(cfg.workers)
    transport = SimTransport(
        cfg.workers,
        latency=cfg.latency,
        jitter=cfg.jitter,
        seed=cfg.seed,
        codec_check=codec_check,
        record_trace=record_trace,
    )

    def make_send(transport: SimTransport):
        def send(kind, src, dest, path, key, reward=None, history=None,
                 child_stats=None, best_found=None):
            transport.send(
                Message(
                    kind=kind,
                    src=src,
                    dest=dest,
                    seq=transport.next_seq(src),
                    key=key,
                    path=path,
                    reward=reward,
                    child_stats=child_stats,
                    history=history,
                    best_found=best_found,
                )
            )
        return send

    if problem_factory is None:
        problem_factory = lambda: build_problem(cfg.problem, cfg.seed)  # noqa: E731
    workers = []
    trace: list[tuple[int, tuple[int, ...], float]] = []
    sink = (lambda wid, path, reward: trace.append((wid, path, reward))) if record_trace else None
    for wid in range(cfg.workers):
        wproblem = problem_factory()
        workers.append(
            Worker(
                worker_id=wid,
                cfg=cfg,
                problem=wproblem,
                zobrist=zobrist,
                wmap=wmap,
                send=make_send(transport),
                now=lambda: transport.now,
                trace_sink=sink,
            )
        )

    root_home = wmap.home(zobrist.root_key)
    workers[root_home].seed_initial_jobs()
    in_flight_target = cfg.overload * cfg.workers

    reports = _Reports()
    stopping = False
    stop_sent = False

    def total_sims() -> int:
        return sum(w.counters.simulations_done for w in workers)

    def budget_reached() -> bool:
        if cfg.budget_sims is not None:
            return total_sims() >= cfg.budget_sims
        assert cfg.budget_ticks is not None
        return transport.now >= cfg.budget_ticks

    def control_plane(worker: Worker, msg: Message) -> bool:
        if msg.kind is MessageKind.STOP:
            worker.stopping = True
            worker.counters.nodes_stored = len(worker.store)
            transport.send(
                Message(
                    kind=MessageKind.REPORT,
                    src=worker.worker_id,
                    dest=0,
                    seq=transport.next_seq(worker.worker_id),
                    child_stats=_counters_obj(worker.counters),
                    best_found=(
                        (worker.best_reward, worker.best_solution)
                        if worker.best_reward is not None
                        else None
                    ),
                )
            )
            return True
        if msg.kind is MessageKind.REPORT:
            reports.collected[msg.src] = msg
            return True
        return False

    while True:
        active = [False] * cfg.workers
        for worker in workers:
            for msg in transport.poll_receive(worker.worker_id):
                active[worker.worker_id] = True
                if not control_plane(worker, msg):
                    worker.on_message(msg)
        for worker in workers:
            while worker.jobq:
                active[worker.worker_id] = True
                worker.process_job(worker.jobq.popleft())

        if not stopping and budget_reached():
            stopping = True
            for worker in workers:
                worker.stopping = True

        if check_invariants and not stopping:
            _check_in_flight(transport, workers, in_flight_target)

        if transport.pending() == 0:
            if not stopping:
                raise DeadlockError(
                    f"quiescent before budget at t={transport.now}: "
                    f"sent={dict(transport.sent)}"
                )
            if not stop_sent:
                if check_invariants:
                    _check_quiescent_losses(workers)
                stop_sent = True
                for dest in range(cfg.workers):
                    transport.send(
                        Message(
                            kind=MessageKind.STOP,
                            src=0,
                            dest=dest,
                            seq=transport.next_seq(0),
                        )
                    )
            elif len(reports.collected) == cfg.workers:
                break
            else:
                raise DeadlockError("stop/report exchange stalled")
        if transport.pending():
            now = transport.now
            gap = transport.advance() - now
            for worker in workers:
                if not active[worker.worker_id]:
                    worker.counters.idle_time += gap

    counters = [_counters_from_obj(reports.collected[wid].child_stats)
                for wid in range(cfg.workers)]
    best = _best_of(reports)
    report = {
        "config": cfg.to_dict(),
        "valid": True,
        "time_unit": "ticks",
        "total_time": transport.now,
        "best_reward": best[0],
        "best_solution": best[1],
        "totals": {
            "simulations": sum(c.simulations_done for c in counters),
            "select_sent": transport.sent[MessageKind.SELECT],
            "bp_sent": transport.sent[MessageKind.BACKPROP],
            "select_received": transport.received[MessageKind.SELECT],
            "bp_received": transport.received[MessageKind.BACKPROP],
            "nodes_stored": sum(c.nodes_stored for c in counters),
            "mean_sim_depth": mean_sim_depth(counters),
        },
        "per_worker": [_counters_obj(c) for c in counters],
    }
    if check_invariants:
        _check_counter_conservation(transport, counters)
        for worker in workers:
            for record in worker.store:
                record.check_aggregates()
        for c in counters:
            c.check()
    return RunResult(
        report=report,
        counters=counters,
        stores=[w.store for w in workers],
        trace=trace,
        transport=transport,
        conservation_checked=check_invariants,
    )


def _check_in_flight(transport: SimTransport, workers, target: int) -> None:
    kinds = transport.pending_kinds()
    in_flight = (
        kinds[MessageKind.SELECT]
        + kinds[MessageKind.BACKPROP]
        + sum(len(w.jobq) for w in workers)
    )
    if in_flight != target:
        raise ConservationError(
            f"in-flight units {in_flight} != overload*workers {target} "
            f"at t={transport.now}"
        )


def _check_quiescent_losses(workers) -> None:
    for worker in workers:
        for record in worker.store:
            if record.inflight != 0:
                raise ConservationError(
                    f"virtual loss {record.inflight} left at {record.path}"
                )
            for child in record.children:
                if child.inflight != 0:
                    raise ConservationError(
                        f"virtual loss {child.inflight} left at "
                        f"{record.path} child {child.action}"
                    )


def _check_counter_conservation(transport: SimTransport, counters) -> None:
    recv_select = sum(c.select_received for c in counters)
    recv_bp = sum(c.bp_received for c in counters)
    if recv_select != transport.sent[MessageKind.SELECT]:
        raise ConservationError(
            f"SELECT sent {transport.sent[MessageKind.SELECT]} != received {recv_select}"
        )
    if recv_bp != transport.sent[MessageKind.BACKPROP]:
        raise ConservationError(
            f"BACKPROP sent {transport.sent[MessageKind.BACKPROP]} != received {recv_bp}"
        )


def _counters_obj(c: WorkerCounters) -> dict:
    return {
        "worker": c.worker_id,
        "select_received": c.select_received,
        "bp_received": c.bp_received,
        "simulations_done": c.simulations_done,
        "nodes_stored": c.nodes_stored,
        "idle_time": c.idle_time,
        "depth_histogram": {str(k): v for k, v in sorted(c.depth_histogram.items())},
        "best_timeline": [[t, r] for t, r in c.best_timeline],
    }


def _counters_from_obj(obj: dict) -> WorkerCounters:
    return WorkerCounters(
        worker_id=obj["worker"],
        select_received=obj["select_received"],
        bp_received=obj["bp_received"],
        simulations_done=obj["simulations_done"],
        nodes_stored=obj["nodes_stored"],
        idle_time=obj["idle_time"],
        depth_histogram={int(k): v for k, v in obj["depth_histogram"].items()},
        best_timeline=[(t, r) for t, r in obj["best_timeline"]],
    )


def _best_of(reports: _Reports) -> tuple[float | None, str]:
    best_reward: float | None = None
    best_solution = ""
    for wid in sorted(reports.collected):
        found = reports.collected[wid].best_found
        if found is None:
            continue
        reward, solution = found
        if best_reward is None or reward > best_reward:
            best_reward, best_solution = reward, solution
    return best_reward, best_solution


def write_run_outputs(result: RunResult, out_dir: str) -> None:
    """Report + metrics files; byte-identical across reruns of the same
    config and seeds."""
    os.makedirs(out_dir, exist_ok=True)
    summary = emit_report(result.counters, out_dir, result.report["time_unit"])
    report = dict(result.report)
    report["summary"] = summary
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(canonical_dumps(report))
        fh.write("\n")
    if result.report["config"].get("dump_tree"):
        for wid, store in enumerate(result.stores):
            path = os.path.join(out_dir, f"tree_worker{wid}.txt")
            with open(path, "w") as fh:
                fh.write("\n".join(store.dump_lines()))
                fh.write("\n")
