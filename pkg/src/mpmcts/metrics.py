"""Per-worker instrumentation and report files.

Counters are strictly worker-local during a run; aggregation happens once,
at report time.  Emitted files are plain CSV with documented headers (and a
``time_unit`` field carried in the summary), chosen so that parsing them
reproduces the in-memory counters exactly.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field


@dataclass
class WorkerCounters:
    worker_id: int
    select_received: int = 0
    bp_received: int = 0
    simulations_done: int = 0
    nodes_stored: int = 0
    idle_time: float = 0
    depth_histogram: dict[int, int] = field(default_factory=dict)
    best_timeline: list[tuple[float, float]] = field(default_factory=list)

    def record_simulation(self, depth: int) -> None:
        self.simulations_done += 1
        self.depth_histogram[depth] = self.depth_histogram.get(depth, 0) + 1

    def note_best(self, now: float, reward: float) -> None:
        self.best_timeline.append((now, reward))

    def check(self) -> None:
        total = sum(self.depth_histogram.values())
        if total != self.simulations_done:
            raise AssertionError(
                f"worker {self.worker_id}: depth histogram sums to {total}, "
                f"simulations_done is {self.simulations_done}"
            )
        rewards = [r for _, r in self.best_timeline]
        if rewards != sorted(rewards):
            raise AssertionError(f"worker {self.worker_id}: best timeline decreased")


def estimate_history_memory(
    c_bytes: float, depth: float, branching: float, nodes_per_second: float, seconds: float
) -> float:
    """Extra bytes per worker for keeping sibling-statistic rows in nodes:
    the plain product of entry size, tree depth, mean branching, node
    creation rate, and elapsed time."""
    return c_bytes * depth * branching * nodes_per_second * seconds


def mean_sim_depth(counters: list[WorkerCounters]) -> float:
    sims = sum(c.simulations_done for c in counters)
    if sims == 0:
        return 0.0
    weighted = sum(d * n for c in counters for d, n in c.depth_histogram.items())
    return weighted / sims


def median_sim_depth(counters: list[WorkerCounters]) -> float:
    merged: dict[int, int] = {}
    for c in counters:
        for depth, count in c.depth_histogram.items():
            merged[depth] = merged.get(depth, 0) + count
    total = sum(merged.values())
    if total == 0:
        return 0.0
    seen = 0
    for depth in sorted(merged):
        seen += merged[depth]
        if 2 * seen >= total:
            return float(depth)
    return float(max(merged))


COUNTERS_HEADER = [
    "worker",
    "select_received",
    "bp_received",
    "simulations_done",
    "nodes_stored",
    "idle_time",
]
DEPTH_HEADER = ["worker", "depth", "count"]
TIMELINE_HEADER = ["worker", "time", "best_reward"]


def emit_report(counters: list[WorkerCounters], out_dir: str, time_unit: str) -> dict:
    """Write counters.csv, depth_histogram.csv, best_timeline.csv; returns
    the aggregate summary (written by the caller into the run report)."""
    os.makedirs(out_dir, exist_ok=True)

    with open(os.path.join(out_dir, "counters.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COUNTERS_HEADER)
        for c in counters:
            writer.writerow(
                [
                    c.worker_id,
                    c.select_received,
                    c.bp_received,
                    c.simulations_done,
                    c.nodes_stored,
                    repr(c.idle_time),
                ]
            )

    with open(os.path.join(out_dir, "depth_histogram.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DEPTH_HEADER)
        for c in counters:
            for depth in sorted(c.depth_histogram):
                writer.writerow([c.worker_id, depth, c.depth_histogram[depth]])

    with open(os.path.join(out_dir, "best_timeline.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMELINE_HEADER)
        for c in counters:
            for when, reward in c.best_timeline:
                writer.writerow([c.worker_id, repr(when), repr(reward)])

    sims = sum(c.simulations_done for c in counters)
    bp = sum(c.bp_received for c in counters)
    return {
        "time_unit": time_unit,
        "workers": len(counters),
        "simulations": sims,
        "select_received": sum(c.select_received for c in counters),
        "bp_received": bp,
        "nodes_stored": sum(c.nodes_stored for c in counters),
        "bp_per_simulation": bp / sims if sims else 0.0,
        "mean_sim_depth": mean_sim_depth(counters),
        "median_sim_depth": median_sim_depth(counters),
    }


def _parse_number(text: str) -> float | int:
    return int(text) if text.lstrip("-").isdigit() else float(text)


def load_counters(out_dir: str) -> list[WorkerCounters]:
    """Inverse of emit_report; used by the round-trip tests and by plotting
    helpers."""
    by_worker: dict[int, WorkerCounters] = {}
    with open(os.path.join(out_dir, "counters.csv"), newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            wid = int(row["worker"])
            by_worker[wid] = WorkerCounters(
                worker_id=wid,
                select_received=int(row["select_received"]),
                bp_received=int(row["bp_received"]),
                simulations_done=int(row["simulations_done"]),
                nodes_stored=int(row["nodes_stored"]),
                idle_time=_parse_number(row["idle_time"]),
            )
    with open(os.path.join(out_dir, "depth_histogram.csv"), newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            counters = by_worker[int(row["worker"])]
            counters.depth_histogram[int(row["depth"])] = int(row["count"])
    with open(os.path.join(out_dir, "best_timeline.csv"), newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            counters = by_worker[int(row["worker"])]
            counters.best_timeline.append(
                (_parse_number(row["time"]), float(row["best_reward"]))
            )
    return [by_worker[wid] for wid in sorted(by_worker)]
