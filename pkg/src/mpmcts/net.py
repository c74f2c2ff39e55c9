"""Real transport: a full mesh of point-to-point TCP streams.

The manifest file lists one ``worker_id host:port`` per line.  Every worker
binds its own port; worker i dials every lower id and accepts from every
higher id, identifying itself with a 4-byte id preamble plus a config
fingerprint (workers with mismatched configs abort instead of silently
computing different node keys).  Worker 0 coordinates a startup barrier:
each peer sends READY, worker 0 answers GO to all, then Message frames
begin.

Budgeting runs on wall seconds at worker 0, which broadcasts STOP; each
worker finishes the job in hand, drops the rest of its queue, answers with
a REPORT carrying its counters and local best, then drains its sockets
until worker 0 closes them.
"""

from __future__ import annotations

import hashlib
import os
import selectors
import socket
import struct
import time

from mpmcts.config import RunConfig
from mpmcts.engine import _best_of, _counters_from_obj, _counters_obj, _Reports
from mpmcts.metrics import mean_sim_depth
from mpmcts.problems import build_problem
from mpmcts.tree import WorkerMap, ZobristTable
from mpmcts.wire import (
    FrameDecoder,
    Message,
    MessageKind,
    TransportFault,
    encode,
)
from mpmcts.worker import Worker

_ID = struct.Struct(">I")
_READY = b"RDY1"
_GO = b"GO!1"
_CONNECT_TIMEOUT = 30.0


def parse_manifest(path: str) -> dict[int, tuple[str, int]]:
    peers: dict[int, tuple[str, int]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            wid_text, addr = line.split()
            host, port_text = addr.rsplit(":", 1)
            peers[int(wid_text)] = (host, int(port_text))
    if sorted(peers) != list(range(len(peers))):
        raise ValueError(f"manifest ids must be 0..{len(peers) - 1}, got {sorted(peers)}")
    return peers


def config_fingerprint(cfg: RunConfig) -> bytes:
    return hashlib.blake2b(cfg.canonical().encode(), digest_size=8).digest()


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise TransportFault("peer closed during handshake")
        buf += chunk
    return buf


class NetTransport:
    def __init__(self, worker_id: int, manifest: dict[int, tuple[str, int]], cfg: RunConfig):
        self.worker_id = worker_id
        self.manifest = manifest
        self.worker_count = len(manifest)
        self.fingerprint = config_fingerprint(cfg)
        self._seq = 0
        self._peers: dict[int, socket.socket] = {}
        self._decoders: dict[int, FrameDecoder] = {}
        self._loopback: list[Message] = []
        self._selector = selectors.DefaultSelector()
        self.closed = False

    def establish(self) -> None:
        host, port = self.manifest[self.worker_id]
        # MPMCTS_BIND overrides the listen address (e.g. 0.0.0.0 behind NAT);
        # peers still dial the manifest address
        bind_host = os.environ.get("MPMCTS_BIND", host)
        listener = socket.create_server((bind_host, port), backlog=self.worker_count)
        deadline = time.monotonic() + _CONNECT_TIMEOUT
        for peer in range(self.worker_id):
            self._peers[peer] = self._dial(peer, deadline)
        for _ in range(self.worker_id + 1, self.worker_count):
            conn, _ = listener.accept()
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            (peer,) = _ID.unpack(_recv_exact(conn, _ID.size))
            theirs = _recv_exact(conn, len(self.fingerprint))
            if theirs != self.fingerprint:
                raise TransportFault(f"config fingerprint mismatch with worker {peer}")
            self._peers[peer] = conn
        listener.close()
        self._barrier()
        for peer, sock in self._peers.items():
            sock.setblocking(False)
            self._decoders[peer] = FrameDecoder()
            self._selector.register(sock, selectors.EVENT_READ, peer)

    def _dial(self, peer: int, deadline: float) -> socket.socket:
        host, port = self.manifest[peer]
        while True:
            try:
                sock = socket.create_connection((host, port), timeout=2.0)
                break
            except OSError:
                if time.monotonic() > deadline:
                    raise TransportFault(f"could not reach worker {peer} at {host}:{port}")
                time.sleep(0.05)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(_CONNECT_TIMEOUT)
        sock.sendall(_ID.pack(self.worker_id) + self.fingerprint)
        return sock

    def _barrier(self) -> None:
        if self.worker_id == 0:
            for peer, sock in self._peers.items():
                got = _recv_exact(sock, len(_READY))
                if got != _READY:
                    raise TransportFault(f"bad READY from worker {peer}: {got!r}")
            for sock in self._peers.values():
                sock.sendall(_GO)
        else:
            zero = self._peers[0]
            zero.sendall(_READY)
            got = _recv_exact(zero, len(_GO))
            if got != _GO:
                raise TransportFault(f"bad GO: {got!r}")

    def next_seq(self, src: int) -> int:
        self._seq += 1
        return self._seq

    def send(self, msg: Message) -> None:
        if msg.dest == self.worker_id:
            self._loopback.append(msg)
            return
        try:
            self._peers[msg.dest].sendall(encode(msg))
        except OSError as exc:
            raise TransportFault(f"send to worker {msg.dest} failed: {exc}") from exc

    def poll_receive(self, timeout: float = 0.01) -> list[Message]:
        out, self._loopback = self._loopback, []
        for key, _ in self._selector.select(timeout):
            peer = key.data
            sock = key.fileobj
            try:
                data = sock.recv(1 << 16)
            except BlockingIOError:
                continue
            except OSError as exc:
                raise TransportFault(f"recv from worker {peer} failed: {exc}") from exc
            if not data:
                raise TransportFault(f"worker {peer} closed its stream")
            out.extend(self._decoders[peer].feed(data))
        return out

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        for sock in self._peers.values():
            try:
                sock.close()
            except OSError:
                pass
        self._selector.close()


def run_worker_net(cfg: RunConfig, worker_id: int, out_dir: str | None) -> int:
    """One process = one worker.  Worker 0 budgets the run, aggregates
    REPORTs, and writes the outputs."""
    manifest = parse_manifest(cfg.manifest)
    if cfg.workers != len(manifest):
        raise ValueError(
            f"config says {cfg.workers} workers, manifest has {len(manifest)}"
        )
    transport = NetTransport(worker_id, manifest, cfg)
    transport.establish()
    max_depth, max_branching = cfg.derived_dimensions()
    zobrist = ZobristTable(cfg.seed, max_depth, max_branching)
    wmap = WorkerMap(cfg.workers)

    def send(kind, src, dest, path=(), key=0, reward=None, history=None,
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

    start = time.monotonic()
    worker = Worker(
        worker_id=worker_id,
        cfg=cfg,
        problem=build_problem(cfg.problem, cfg.seed),
        zobrist=zobrist,
        wmap=wmap,
        send=send,
        now=lambda: time.monotonic() - start,
    )
    if wmap.home(zobrist.root_key) == worker_id:
        worker.seed_initial_jobs()

    reports = _Reports()
    reported = False
    stop_broadcast = False
    hard_deadline = start + cfg.budget_secs * 3 + 60  # never hang on a lost STOP
    try:
        while True:
            if time.monotonic() > hard_deadline:
                raise TransportFault("run overshot its hard deadline")
            if (
                worker_id == 0
                and not stop_broadcast
                and time.monotonic() - start >= cfg.budget_secs
            ):
                stop_broadcast = True
                for dest in range(cfg.workers):
                    send(MessageKind.STOP, src=0, dest=dest)
            try:
                messages = transport.poll_receive(timeout=0.005)
            except TransportFault:
                if reported and worker_id != 0:
                    break  # worker 0 tore the mesh down after aggregation
                raise
            for msg in messages:
                if msg.kind is MessageKind.STOP:
                    worker.stopping = True
                elif msg.kind is MessageKind.REPORT:
                    reports.collected[msg.src] = msg
                elif not worker.stopping:
                    worker.on_message(msg)
            if worker.stopping and not reported:
                worker.jobq.clear()  # drop queued jobs, report what we have
                worker.counters.nodes_stored = len(worker.store)
                send(
                    MessageKind.REPORT,
                    src=worker_id,
                    dest=0,
                    child_stats=_counters_obj(worker.counters),
                    best_found=(
                        (worker.best_reward, worker.best_solution)
                        if worker.best_reward is not None
                        else None
                    ),
                )
                reported = True
            if worker.jobq:
                worker.process_job(worker.jobq.popleft())
            if worker_id == 0 and reported and len(reports.collected) == cfg.workers:
                break
        if worker_id == 0:
            _write_net_report(cfg, reports, out_dir, time.monotonic() - start)
    finally:
        transport.close()
    return 0


def _write_net_report(cfg: RunConfig, reports: _Reports, out_dir: str | None, elapsed: float) -> None:
    from mpmcts.engine import write_run_outputs  # local import, avoids a cycle

    counters = [
        _counters_from_obj(reports.collected[wid].child_stats)
        for wid in sorted(reports.collected)
    ]
    best = _best_of(reports)
    report = {
        "config": cfg.to_dict(),
        "valid": True,
        "time_unit": "seconds",
        "total_time": elapsed,
        "best_reward": best[0],
        "best_solution": best[1],
        "totals": {
            "simulations": sum(c.simulations_done for c in counters),
            "nodes_stored": sum(c.nodes_stored for c in counters),
            "mean_sim_depth": mean_sim_depth(counters),
        },
        "per_worker": [_counters_obj(c) for c in counters],
    }
    if out_dir:
        result = _NetResult(report, counters)
        write_run_outputs(result, out_dir)


class _NetResult:
    def __init__(self, report: dict, counters) -> None:
        self.report = report
        self.counters = counters
        self.stores = []
