import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigrefine.errors import ProtocolError
from sigrefine.transport import (
    COUNT,
    DONE,
    INEDGE,
    RESULT,
    SUMPART,
    UPD,
    InProcessNetwork,
    Message,
    TcpTransport,
    decode,
    encode,
    free_ports,
    read_roster,
    split_frames,
    write_roster,
)

ids = st.integers(0, 2**128 - 1)
states = st.integers(0, 2**64 - 1)
workers = st.integers(0, 2**32 - 1)

messages = st.one_of(
    st.builds(lambda s, d, x: Message(INEDGE, s, d, (x,)), workers, workers, states),
    st.builds(lambda s, d, p, r: Message(DONE, s, d, (p, r)), workers, workers, st.integers(0, 2), st.integers(0, 2**32 - 1)),
    st.builds(lambda s, d, x, h: Message(UPD, s, d, (x, h)), workers, workers, states, ids),
    st.builds(lambda s, d, h: Message(COUNT, s, d, (h,)), workers, workers, ids),
    st.builds(lambda s, d, r, v: Message(SUMPART, s, d, (r, v)), workers, workers, st.integers(0, 2**32 - 1), states),
    st.builds(
        lambda s, d, pairs: Message(RESULT, s, d, (tuple(pairs),)),
        workers,
        workers,
        st.lists(st.tuples(states, ids), max_size=5),
    ),
)


@given(messages)
def test_wire_round_trip(msg):
    assert decode(encode(msg)) == msg


@given(st.lists(messages, max_size=8), st.integers(0, 40))
def test_frames_split_at_any_boundary(msgs, cut):
    raw = b"".join(encode(m) for m in msgs)
    buf = bytearray(raw[:cut])
    got = split_frames(buf)
    buf += raw[cut:]
    got += split_frames(buf)
    assert got == msgs
    assert not buf


def test_upd_frame_layout():
    frame = encode(Message(UPD, 1, 2, (7, 1)))
    assert frame == bytes.fromhex("21000000" "03" "01000000" "02000000") + (7).to_bytes(8, "little") + (1).to_bytes(16, "little")


def test_truncated_frame_is_rejected():
    frame = encode(Message(COUNT, 0, 1, (5,)))
    with pytest.raises(ProtocolError):
        decode(frame[:-1])


def test_unknown_tag_is_rejected():
    frame = bytearray(encode(Message(COUNT, 0, 1, (5,))))
    frame[4] = 99
    with pytest.raises(ProtocolError):
        decode(bytes(frame))


@given(st.integers(2, 5), st.integers(0, 1000), st.integers(1, 6), st.integers(1, 30))
def test_scheduler_keeps_per_pair_order(size, seed, burst, per_sender):
    net = InProcessNetwork(size, seed=seed, burst=burst)
    ends = [net.endpoint(i) for i in range(size)]
    for src in range(size):
        for k in range(per_sender):
            ends[src].send(Message(SUMPART, src, 0, (k, src)))
        ends[src].flush()
    got = [ends[0].recv(timeout=1) for _ in range(size * per_sender)]
    for src in range(size):
        assert [m.data[0] for m in got if m.src == src] == list(range(per_sender))
    assert ends[0].poll() is None


def test_scheduler_interleaves_differently_per_seed():
    orders = set()
    for seed in range(8):
        net = InProcessNetwork(3, seed=seed, burst=2)
        ends = [net.endpoint(i) for i in range(3)]
        for src in range(3):
            for k in range(6):
                ends[src].send(Message(SUMPART, src, 0, (k, 0)))
            ends[src].flush()
        orders.add(tuple(ends[0].recv(1).src for _ in range(18)))
    assert len(orders) > 1


def test_self_send_and_timeout():
    net = InProcessNetwork(1)
    end = net.endpoint(0)
    end.send(Message(DONE, 0, 0, (0, 0)))
    assert end.recv(timeout=1) == Message(DONE, 0, 0, (0, 0))
    with pytest.raises(ProtocolError):
        end.recv(timeout=0.05)


def test_abort_wakes_receivers():
    net = InProcessNetwork(2)
    end = net.endpoint(1)
    errors = []

    def wait():
        try:
            end.recv(timeout=10)
        except ProtocolError as exc:
            errors.append(exc)

    t = threading.Thread(target=wait)
    t.start()
    net.abort(RuntimeError("boom"))
    t.join(5)
    assert errors and "aborted" in str(errors[0])


def test_roster_round_trip(tmp_path):
    path = tmp_path / "roster.txt"
    write_roster(path, [("127.0.0.1", 5000), ("localhost", 5001)])
    assert read_roster(path) == [("127.0.0.1", 5000), ("localhost", 5001)]


def test_tcp_mesh_delivers_in_order():
    size = 3
    roster = [("127.0.0.1", p) for p in free_ports(size)]
    transports: list = [None] * size

    def connect(i):
        transports[i] = TcpTransport(i, roster, connect_timeout=10)

    threads = [threading.Thread(target=connect, args=(i,)) for i in range(size)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(15)
    try:
        for src in range(size):
            for dst in range(size):
                for k in range(50):
                    transports[src].send(Message(UPD, src, dst, (k, 2**100 + k)))
            transports[src].flush()
        for dst in range(size):
            got = [transports[dst].recv(timeout=5) for _ in range(50 * size)]
            for src in range(size):
                assert [m.data for m in got if m.src == src] == [(k, 2**100 + k) for k in range(50)]
            assert transports[dst].poll() is None
    finally:
        # closing waits for every peer to finish sending, so all sides close together
        closers = [threading.Thread(target=t.close) for t in transports if t is not None]
        for t in closers:
            t.start()
        for t in closers:
            t.join(15)
