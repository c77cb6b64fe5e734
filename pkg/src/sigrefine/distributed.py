"""Distributed signature refinement over W workers.

Each worker owns a contiguous range of the encoded states together with
their outgoing edges. An initialization phase tells every state which
workers hold a predecessor of it (its in-set); afterwards each round every
worker hashes the signatures of its states, ships the new ids to the
in-set of each state (UPD), routes every id to the one worker that counts
it (COUNT), and all workers agree on the global number of distinct ids
with an all-to-all sum. Refinement stops when that number stops growing.
"""

from __future__ import annotations

import hashlib
import json
import os
import resource
import struct
import subprocess
import sys
import tempfile
import threading
import time
from array import array
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .encoding import EncodedCoalgebra
from .errors import MonoidOverflow, ProtocolError
from .functor import parse_functor, pretty, sort_layouts
from .refine import Partition, RefineResult
from .signature import canonical_bytes, compute_signature, hash_id
from .transport import (
    COUNT,
    DONE,
    INEDGE,
    PHASE_INIT,
    PHASE_REFINE,
    PHASE_RESULT,
    RESULT,
    SUMPART,
    UPD,
    InProcessNetwork,
    Message,
    TcpTransport,
    free_ports,
    write_roster,
)

RESULT_CHUNK = 4096
EXIT_OVERFLOW = 3
_LOW64 = (1 << 64) - 1


@dataclass(frozen=True)
class StateSplit:
    """Contiguous ranges of ``range(n_prime)``; the first ``n_prime % W`` get one extra state."""

    n_prime: int
    workers: int

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("need at least one worker")

    def range_of(self, w: int) -> range:
        base, extra = divmod(self.n_prime, self.workers)
        lo = w * base + min(w, extra)
        return range(lo, lo + base + (1 if w < extra else 0))

    def owner(self, s: int) -> int:
        base, extra = divmod(self.n_prime, self.workers)
        cut = extra * (base + 1)
        if s < cut:
            return s // (base + 1)
        return extra + (s - cut) // base


def split_states(n_prime: int, workers: int) -> list[range]:
    split = StateSplit(n_prime, workers)
    return [split.range_of(w) for w in range(workers)]


def counter_of(sig_id: int, workers: int) -> int:
    """The worker that counts ``sig_id``: its low 64 bits modulo ``workers``."""
    return (sig_id & _LOW64) % workers


# -- worker input ------------------------------------------------------------------


@dataclass
class WorkerInput:
    """The slice of an encoded coalgebra owned by one worker.

    Indices into ``f1_index`` and ``offsets`` are local (``s - lo``); edge
    targets are global state ids.
    """

    worker: int
    workers: int
    n: int
    n_prime: int
    lo: int
    hi: int
    term_text: str
    f1_table: list
    f1_index: array
    labels: list
    offsets: array
    edge_labels: array
    edge_targets: array

    def __post_init__(self):
        self.sorts = sort_layouts(parse_functor(self.term_text))

    def f1(self, s: int):
        return self.f1_table[self.f1_index[s]]

    @property
    def size(self) -> int:
        return self.hi - self.lo


def slice_input(c: EncodedCoalgebra, workers: int) -> list[WorkerInput]:
    split = StateSplit(c.n_prime, workers)
    term_text = pretty(c.term)
    out = []
    for w in range(workers):
        r = split.range_of(w)
        f1_ids: dict[int, int] = {}
        label_ids: dict[int, int] = {}
        f1_index = array("q", (f1_ids.setdefault(c.f1_index[s], len(f1_ids)) for s in r))
        base = c.offsets[r.start]
        end = c.offsets[r.stop]
        offsets = array("q", (c.offsets[s] - base for s in range(r.start, r.stop + 1)))
        edge_labels = array("q", (label_ids.setdefault(a, len(label_ids)) for a in c.edge_labels[base:end]))
        out.append(
            WorkerInput(
                worker=w,
                workers=workers,
                n=c.n,
                n_prime=c.n_prime,
                lo=r.start,
                hi=r.stop,
                term_text=term_text,
                f1_table=[c.f1_table[i] for i in f1_ids],
                f1_index=f1_index,
                labels=[c.labels[i] for i in label_ids],
                offsets=offsets,
                edge_labels=edge_labels,
                edge_targets=array("q", c.edge_targets[base:end]),
            )
        )
    return out


# -- worker --------------------------------------------------------------------------


def _bits(bitmap: bytearray):
    """Indices of the set bits of ``bitmap``, ascending."""
    for byte_index, byte in enumerate(bitmap):
        while byte:
            low = byte & -byte
            yield (byte_index << 3) | (low.bit_length() - 1)
            byte ^= low


class _SlotView:
    """A worker input whose edge targets are slots into the worker's block list."""

    def __init__(self, inp: WorkerInput, slots: array):
        self.sorts = inp.sorts
        self.labels = inp.labels
        self.offsets = inp.offsets
        self.edge_labels = inp.edge_labels
        self.edge_targets = slots
        self.f1 = inp.f1


@dataclass
class RoundTrace:
    round: int
    counted: int
    upd_sent: int
    count_sent: int
    total: int


@dataclass
class WorkerReport:
    worker: int
    iterations: int
    history: list[int]
    rounds: list[RoundTrace]
    in_set_total: int
    inedge_sent: int
    peak_rss: int
    blocks: list[int] | None = None

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["rounds"] = [r.__dict__ for r in self.rounds]
        return d

    @classmethod
    def from_json(cls, d: dict) -> WorkerReport:
        d = dict(d)
        d["rounds"] = [RoundTrace(**r) for r in d["rounds"]]
        return cls(**d)


def peak_rss() -> int:
    """Peak resident set size of this process in bytes.

    Prefers the address-space high-water mark from procfs: the rusage
    maximum survives exec, so a spawned worker would report its parent's peak.
    """
    try:
        with open("/proc/self/status", encoding="ascii") as fh:
            for line in fh:
                if line.startswith("VmHWM:"):
                    return int(line.split()[1]) * 1024
    except OSError:
        pass
    kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return kb if sys.platform == "darwin" else kb * 1024


class _Worker:
    def __init__(self, inp: WorkerInput, transport, timeout: float | None):
        if transport.size != inp.workers:
            raise ProtocolError(f"worker {inp.worker}: transport has {transport.size} workers, input expects {inp.workers}")
        self.inp = inp
        self.net = transport
        self.me = inp.worker
        self.W = inp.workers
        self.split = StateSplit(inp.n_prime, inp.workers)
        self.timeout = timeout
        self.stash: list[Message] = []

    def send(self, kind, dst, data):
        self.net.send(Message(kind, self.me, dst, data))

    def gather(self, belongs, handle, finished):
        """Handle messages of the current phase until ``finished()``.

        Messages that belong to a later phase are stashed in arrival order
        and replayed when that phase starts; per-pair FIFO makes the
        sender's own phase markers enough to tell the two apart.
        """
        if self.stash:
            kept = []
            for msg in self.stash:
                if not finished() and belongs(msg):
                    handle(msg)
                else:
                    kept.append(msg)
            self.stash = kept
        while not finished():
            msg = self.net.recv(self.timeout)
            if belongs(msg):
                handle(msg)
            else:
                self.stash.append(msg)

    def replay(self, belongs, handle):
        """Handle stashed messages that belong to the phase just started."""
        kept = []
        for msg in self.stash:
            if belongs(msg):
                handle(msg)
            else:
                kept.append(msg)
        self.stash = kept

    def poll(self, belongs, handle):
        """Handle whatever has already arrived, without blocking."""
        while (msg := self.net.poll()) is not None:
            if belongs(msg):
                handle(msg)
            else:
                self.stash.append(msg)

    def run(self) -> WorkerReport:
        inp, me, W = self.inp, self.me, self.W
        lo, hi, size = inp.lo, inp.hi, inp.size
        owner = self.split.owner

        # initialization: one INEDGE per distinct edge target, then learn the in-sets
        seen = bytearray((inp.n_prime + 7) // 8)
        for t in inp.edge_targets:
            seen[t >> 3] |= 1 << (t & 7)
        targets = array("q", _bits(seen))
        del seen
        for t in targets:
            self.send(INEDGE, owner(t), (t,))
        for w in range(W):
            self.send(DONE, w, (PHASE_INIT, 0))
        remote = array("q", (t for t in targets if not lo <= t < hi))
        inedge_sent = len(targets)
        del targets
        in_sets = [0] * size
        done = [0]
        done_mask = [0]

        def init_belongs(msg):
            if msg.kind == DONE and msg.data[0] == PHASE_INIT:
                return True
            return msg.kind == INEDGE and not done_mask[0] >> msg.src & 1

        def init_handle(msg):
            if msg.kind == DONE:
                done[0] += 1
                done_mask[0] |= 1 << msg.src
                return
            s = msg.data[0]
            if not lo <= s < hi:
                raise ProtocolError(f"worker {me}: INEDGE for state {s} it does not own")
            in_sets[s - lo] |= 1 << msg.src

        self.gather(init_belongs, init_handle, lambda: done[0] == W)
        shared: dict[int, tuple] = {}
        in_lists = [shared.get(mask) or shared.setdefault(mask, tuple(w for w in range(W) if mask >> w & 1)) for mask in in_sets]
        del in_sets, shared
        in_set_total = sum(len(x) for x in in_lists)

        # successors resolved to slots: owned states first, then remote targets in id order
        view = _SlotView(inp, array("q", (t - lo if lo <= t < hi else size + bisect_left(remote, t) for t in inp.edge_targets)))
        blocks: list[int] = [0] * (size + len(remote))
        n_remote = len(remote)

        history: list[int] = []
        traces: list[RoundTrace] = []
        size_old, size_new = -1, (1 if inp.n_prime else 0)
        rnd = 0
        while size_old != size_new:
            rnd += 1
            counting: set[int] = set()
            canon: dict[int, int] = {}
            fresh = [0] * size
            incoming = [None] * n_remote
            received = [0]
            done = [0]
            done_mask = [0]

            def round_belongs(msg, rnd=rnd):
                kind = msg.kind
                if kind == DONE:
                    if msg.data[0] != PHASE_REFINE:
                        return False
                    if msg.data[1] < rnd:
                        raise ProtocolError(f"worker {me}: stale DONE for round {msg.data[1]} in round {rnd}")
                    return msg.data[1] == rnd
                return kind in (UPD, COUNT) and not done_mask[0] >> msg.src & 1

            def round_handle(msg):
                kind = msg.kind
                if kind == UPD:
                    s, sig_id = msg.data
                    if lo <= s < hi:
                        if msg.src != me:
                            raise ProtocolError(f"worker {me}: UPD for owned state {s} from worker {msg.src}")
                        return
                    j = bisect_left(remote, s)
                    if j == n_remote or remote[j] != s:
                        raise ProtocolError(f"worker {me}: UPD for unknown state {s}")
                    if incoming[j] is not None:
                        raise ProtocolError(f"worker {me}: second UPD for state {s} in round {rnd}")
                    incoming[j] = canon.setdefault(sig_id, sig_id)
                    received[0] += 1
                elif kind == COUNT:
                    sig_id = msg.data[0]
                    if counter_of(sig_id, W) != me:
                        raise ProtocolError(f"worker {me}: COUNT routed to the wrong worker")
                    counting.add(sig_id)
                else:
                    done[0] += 1
                    done_mask[0] |= 1 << msg.src

            # replay messages of this round that arrived during the last barrier
            self.replay(round_belongs, round_handle)
            upd_sent = 0
            for i in range(size):
                sig_id = hash_id(canonical_bytes(compute_signature(view, i, blocks)))
                sig_id = fresh[i] = canon.setdefault(sig_id, sig_id)
                s = lo + i
                for w in in_lists[i]:
                    self.send(UPD, w, (s, sig_id))
                upd_sent += len(in_lists[i])
                self.send(COUNT, counter_of(sig_id, W), (sig_id,))
                if i & 255 == 255:
                    self.poll(round_belongs, round_handle)
            for w in range(W):
                self.send(DONE, w, (PHASE_REFINE, rnd))
            self.gather(round_belongs, round_handle, lambda: done[0] == W)
            if received[0] != n_remote:
                raise ProtocolError(f"worker {me}: {n_remote - received[0]} remote successors not updated in round {rnd}")
            blocks[:size] = fresh
            blocks[size:] = incoming
            del fresh, incoming, canon
            total = self.distrib_sum(len(counting), rnd)
            traces.append(RoundTrace(rnd, len(counting), upd_sent, size, total))
            history.append(total)
            size_old, size_new = size_new, total

        blocks = self.collect([(s, blocks[s - lo]) for s in range(lo, min(hi, inp.n))])
        return WorkerReport(
            worker=me,
            iterations=len(history),
            history=history,
            rounds=traces,
            in_set_total=in_set_total,
            inedge_sent=inedge_sent,
            peak_rss=peak_rss(),
            blocks=blocks,
        )

    def distrib_sum(self, local: int, rnd: int) -> int:
        """All-to-all exchange of partial sums; returning is also a barrier."""
        for w in range(self.W):
            self.send(SUMPART, w, (rnd, local))
        acc = [0, 0]

        def belongs(msg):
            if msg.kind != SUMPART:
                return False
            if msg.data[0] != rnd:
                raise ProtocolError(f"worker {self.me}: SUMPART for round {msg.data[0]} during round {rnd}")
            return True

        def handle(msg):
            acc[0] += 1
            acc[1] += msg.data[1]

        self.gather(belongs, handle, lambda: acc[0] == self.W)
        return acc[1]

    def collect(self, fragment):
        """Send owned original states' ids to worker 0; worker 0 renumbers and acknowledges."""
        for start in range(0, max(len(fragment), 1), RESULT_CHUNK):
            self.send(RESULT, 0, (tuple(fragment[start : start + RESULT_CHUNK]),))
        if self.me != 0:
            got = [False]
            self.gather(
                lambda m: m.kind == DONE and m.data[0] == PHASE_RESULT,
                lambda m: got.__setitem__(0, True),
                lambda: got[0],
            )
            self.net.flush()
            return None
        ids = [None] * self.inp.n
        seen = [0]

        def handle(msg):
            for s, sig_id in msg.data[0]:
                if not 0 <= s < self.inp.n or ids[s] is not None:
                    raise ProtocolError(f"worker 0: bad RESULT entry for state {s}")
                ids[s] = sig_id
                seen[0] += 1

        # every worker sends at least one (possibly empty) RESULT message
        senders = [0]

        def handle_counted(msg):
            senders[0] |= 1 << msg.src
            handle(msg)

        full = (1 << self.W) - 1
        self.gather(lambda m: m.kind == RESULT, handle_counted, lambda: seen[0] == self.inp.n and senders[0] == full)
        for w in range(1, self.W):
            self.send(DONE, w, (PHASE_RESULT, 0))
        self.net.flush()
        return list(Partition.from_ids(ids).block_of)


def run_worker(inp: WorkerInput, transport, timeout: float | None = None) -> WorkerReport:
    """Run every phase of one worker; worker 0's report carries the final partition."""
    return _Worker(inp, transport, timeout).run()


# -- orchestration ------------------------------------------------------------------


@dataclass
class DistributedResult(RefineResult):
    reports: list[WorkerReport] = field(default_factory=list, repr=False)

    @property
    def peak_rss_per_worker(self) -> list[int]:
        return [r.peak_rss for r in self.reports]


def _combine(reports: list[WorkerReport]) -> DistributedResult:
    reports = sorted(reports, key=lambda r: r.worker)
    first = reports[0]
    for r in reports[1:]:
        if r.history != first.history:
            raise ProtocolError(f"workers 0 and {r.worker} disagree on partition sizes")
    blocks = first.blocks or []
    return DistributedResult(
        partition=Partition(tuple(blocks), len(set(blocks))),
        iterations=first.iterations,
        history=list(first.history),
        reports=reports,
    )


def orchestrate(
    c: EncodedCoalgebra,
    workers: int,
    backend: str = "inproc",
    seed: int = 0,
    burst: int = 4,
    timeout: float | None = 600.0,
    workdir=None,
    roster=None,
) -> DistributedResult:
    """Minimize ``c`` with ``workers`` workers and gather the result at worker 0.

    ``inproc`` runs every worker as a thread over the in-process network
    with scheduler seed ``seed``; ``tcp`` runs one OS process per worker on
    localhost (at the addresses of ``roster`` when given).
    """
    if backend == "inproc":
        return _run_inproc(slice_input(c, workers), seed, burst, timeout)
    if backend == "tcp":
        with tempfile.TemporaryDirectory(dir=workdir) as tmp:
            manifest = write_slices(c, workers, tmp)
            return run_tcp_cluster(manifest, roster=roster, timeout=timeout)
    raise ValueError(f"unknown backend {backend!r}")


def _run_inproc(inputs: list[WorkerInput], seed: int, burst: int, timeout: float | None) -> DistributedResult:
    W = len(inputs)
    net = InProcessNetwork(W, seed=seed, burst=burst)
    reports: list[WorkerReport | None] = [None] * W
    errors: list[BaseException] = []

    def body(i):
        try:
            reports[i] = run_worker(inputs[i], net.endpoint(i), timeout)
        except BaseException as exc:  # noqa: BLE001 - re-raised by the orchestrator
            errors.append(exc)
            net.abort(exc)

    if W == 1:
        body(0)
    else:
        threads = [threading.Thread(target=body, args=(i,), daemon=True) for i in range(W)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if errors:
        raise errors[0]
    return _combine(reports)


# -- slice files --------------------------------------------------------------------

SLICE_MAGIC = b"SGRS"
SLICE_VERSION = 1
_SLICE_HEAD = struct.Struct("<4sBIIQQQQ")

_V_NONE, _V_FALSE, _V_TRUE, _V_INT, _V_STR, _V_FRAC, _V_TUPLE = range(7)


def _put_value(out: bytearray, v):
    if v is None:
        out.append(_V_NONE)
    elif v is True or v is False:
        out.append(_V_TRUE if v else _V_FALSE)
    elif isinstance(v, int):
        out.append(_V_INT)
        _put_int(out, v)
    elif isinstance(v, str):
        raw = v.encode("utf-8")
        out.append(_V_STR)
        out += struct.pack("<I", len(raw)) + raw
    elif isinstance(v, Fraction):
        out.append(_V_FRAC)
        _put_int(out, v.numerator)
        _put_int(out, v.denominator)
    elif isinstance(v, tuple):
        out.append(_V_TUPLE)
        out += struct.pack("<I", len(v))
        for x in v:
            _put_value(out, x)
    else:
        raise TypeError(f"cannot serialize {v!r}")


def _put_int(out: bytearray, v: int):
    raw = abs(v).to_bytes((abs(v).bit_length() + 7) // 8, "little")
    out.append(1 if v < 0 else 0)
    out += struct.pack("<I", len(raw)) + raw


def _get_int(data, i):
    neg = data[i]
    (k,) = struct.unpack_from("<I", data, i + 1)
    v = int.from_bytes(data[i + 5 : i + 5 + k], "little")
    return (-v if neg else v), i + 5 + k


def _get_value(data, i):
    tag = data[i]
    i += 1
    if tag == _V_NONE:
        return None, i
    if tag in (_V_FALSE, _V_TRUE):
        return tag == _V_TRUE, i
    if tag == _V_INT:
        return _get_int(data, i)
    if tag == _V_STR:
        (k,) = struct.unpack_from("<I", data, i)
        return bytes(data[i + 4 : i + 4 + k]).decode("utf-8"), i + 4 + k
    if tag == _V_FRAC:
        num, i = _get_int(data, i)
        den, i = _get_int(data, i)
        return Fraction(num, den), i
    if tag == _V_TUPLE:
        (k,) = struct.unpack_from("<I", data, i)
        i += 4
        items = []
        for _ in range(k):
            x, i = _get_value(data, i)
            items.append(x)
        return tuple(items), i
    raise ValueError(f"bad value tag {tag} at offset {i - 1}")


def _put_array(out: bytearray, a: array):
    if sys.byteorder != "little":
        a = array(a.typecode, a)
        a.byteswap()
    out += struct.pack("<Q", len(a))
    out += a.tobytes()


def _get_array(data, i):
    (k,) = struct.unpack_from("<Q", data, i)
    i += 8
    a = array("q")
    a.frombytes(data[i : i + 8 * k])
    if sys.byteorder != "little":
        a.byteswap()
    return a, i + 8 * k


def encode_slice(inp: WorkerInput) -> bytes:
    """Binary slice: fixed header, functor text, output and label tables, CSR arrays."""
    out = bytearray(_SLICE_HEAD.pack(SLICE_MAGIC, SLICE_VERSION, inp.worker, inp.workers, inp.n, inp.n_prime, inp.lo, inp.hi))
    _put_value(out, inp.term_text)
    _put_value(out, tuple(inp.f1_table))
    _put_value(out, tuple(inp.labels))
    for a in (inp.f1_index, inp.offsets, inp.edge_labels, inp.edge_targets):
        _put_array(out, a)
    return bytes(out)


def decode_slice(data: bytes) -> WorkerInput:
    magic, version, worker, workers, n, n_prime, lo, hi = _SLICE_HEAD.unpack_from(data, 0)
    if magic != SLICE_MAGIC or version != SLICE_VERSION:
        raise ProtocolError("not a slice file")
    i = _SLICE_HEAD.size
    term_text, i = _get_value(data, i)
    f1_table, i = _get_value(data, i)
    labels, i = _get_value(data, i)
    arrays = []
    for _ in range(4):
        a, i = _get_array(data, i)
        arrays.append(a)
    if i != len(data):
        raise ProtocolError("trailing bytes in slice file")
    return WorkerInput(worker, workers, n, n_prime, lo, hi, term_text, list(f1_table), arrays[0], list(labels), *arrays[1:])


def write_slices(c: EncodedCoalgebra, workers: int, directory) -> Path:
    """Write one slice per worker plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for inp in slice_input(c, workers):
        data = encode_slice(inp)
        name = f"slice-{inp.worker}.bin"
        (directory / name).write_bytes(data)
        entries.append({"file": name, "sha256": hashlib.sha256(data).hexdigest(), "states": inp.size})
    manifest = {
        "workers": workers,
        "n": c.n,
        "n_prime": c.n_prime,
        "m": c.m,
        "term": pretty(c.term),
        "names": list(c.names),
        "slices": entries,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return path


def load_slice(manifest_path, worker: int, workers: int) -> tuple[dict, WorkerInput]:
    """Read and verify this worker's slice; any mismatch is a protocol error."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest["workers"] != workers:
        raise ProtocolError(f"checksum mismatch: manifest is for {manifest['workers']} workers, roster has {workers}")
    if not 0 <= worker < workers:
        raise ProtocolError(f"worker id {worker} out of range for {workers} workers")
    entry = manifest["slices"][worker]
    data = (manifest_path.parent / entry["file"]).read_bytes()
    if hashlib.sha256(data).hexdigest() != entry["sha256"]:
        raise ProtocolError(f"checksum mismatch for slice {entry['file']}")
    inp = decode_slice(data)
    if inp.worker != worker or inp.workers != workers:
        raise ProtocolError("checksum mismatch: slice header does not match worker id")
    return manifest, inp


def run_tcp_worker(manifest_path, worker: int, roster, timeout: float | None = 600.0) -> WorkerReport:
    _, inp = load_slice(manifest_path, worker, len(roster))
    transport = TcpTransport(worker, roster)
    try:
        return run_worker(inp, transport, timeout)
    finally:
        transport.close()


def run_tcp_cluster(manifest_path, roster=None, timeout: float | None = 600.0, host: str = "127.0.0.1") -> DistributedResult:
    """Spawn one local worker process per slice and combine their reports.

    Without a ``roster`` file the workers listen on free localhost ports.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    W = manifest["workers"]
    work = manifest_path.parent
    if roster is None:
        roster = work / "roster.txt"
        write_roster(roster, [(host, p) for p in free_ports(W, host)])
    env = dict(os.environ)
    src_root = str(Path(__file__).resolve().parent.parent)
    env["PYTHONPATH"] = src_root + (os.pathsep + env["PYTHONPATH"] if env.get("PYTHONPATH") else "")
    procs = []
    logs = []
    for w in range(W):
        cmd = [sys.executable, "-m", "sigrefine", "worker", "--manifest", str(manifest_path), "--id", str(w), "--roster", str(roster), "--report", str(work / f"report-{w}.json")]
        log = open(work / f"worker-{w}.log", "wb")
        logs.append(log)
        procs.append(subprocess.Popen(cmd, env=env, stdout=subprocess.DEVNULL, stderr=log))
    deadline = None if timeout is None else time.monotonic() + timeout
    try:
        # a failed worker would leave its peers blocked, so stop everyone on the first failure
        while any(p.poll() is None for p in procs):
            if any(p.returncode not in (None, 0) for p in procs):
                break
            if deadline is not None and time.monotonic() > deadline:
                raise ProtocolError("TCP cluster timed out")
            time.sleep(0.02)
    finally:
        for p in procs:
            if p.poll() is None:
                p.kill()
                p.wait()
        for log in logs:
            log.close()
    failures = []
    overflow = False
    for w, p in enumerate(procs):
        if p.returncode != 0:
            overflow |= p.returncode == EXIT_OVERFLOW
            err = (work / f"worker-{w}.log").read_text(encoding="utf-8", errors="replace").strip()
            failures.append(f"worker {w} exited {p.returncode}: {err}")
    if failures:
        raise (MonoidOverflow if overflow else ProtocolError)("; ".join(failures))
    reports = [WorkerReport.from_json(json.loads((work / f"report-{w}.json").read_text(encoding="utf-8"))) for w in range(W)]
    return _combine(reports)
