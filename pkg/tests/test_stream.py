import json
import socket
import threading
import time

import numpy as np
import pytest

from fbgforce.core import NOMINAL_CALIB, NOMINAL_TEMP, WavelengthSample, compensated_force, convert_arrays
from fbgforce.errors import BindError, ConnectError, ProtocolError
from fbgforce.sensorsim import RigProfile, SyntheticSensorConfig, live_rig_source, simulate_rig
from fbgforce.streamio import serve_stream, subscribe
from fbgforce.streamio.stream import encode_frame, encode_hello

CFG = SyntheticSensorConfig(rng_seed=11)


@pytest.fixture(scope="module")
def short_trace():
    return simulate_rig(CFG, RigProfile(cycle_count=1)).slice(slice(0, 2000))


def fake_server(lines: list[bytes]):
    """One-shot TCP server that sends raw lines and closes."""
    srv = socket.create_server(("127.0.0.1", 0))

    def run():
        conn, _ = srv.accept()
        with conn:
            for line in lines:
                conn.sendall(line)
        srv.close()

    threading.Thread(target=run, daemon=True).start()
    return srv.getsockname()


def test_replay_is_bit_identical(short_trace):
    with serve_stream(short_trace, rate=50_000) as srv:
        with subscribe(srv.address) as sub:
            assert sub.channels == ("fbg1", "fbg2")
            assert sub.rate == 50_000
            got = list(sub)
        assert sub.ended
    assert len(got) == len(short_trace)
    assert [s.t for s in got] == short_trace.t.tolist()
    assert [s.lambda1 for s in got] == short_trace.lambda1.tolist()
    assert [s.lambda2 for s in got] == short_trace.lambda2.tolist()


def test_streamed_conversion_matches_batch(short_trace):
    batch = convert_arrays(short_trace.lambda1, short_trace.lambda2, CFG.baseline, NOMINAL_CALIB, NOMINAL_TEMP)
    with serve_stream(short_trace, rate=20_000) as srv:
        received = list(subscribe(srv.address))
    live = [compensated_force(s, CFG.baseline, NOMINAL_CALIB, NOMINAL_TEMP).force for s in received]
    assert np.array_equal(np.array(live), batch["force"])


def test_two_subscribers_identical(short_trace):
    with serve_stream(short_trace, rate=20_000, min_subscribers=2) as srv:
        subs = [subscribe(srv.address) for _ in range(2)]
        results = [None, None]

        def drain(i):
            results[i] = list(subs[i])

        threads = [threading.Thread(target=drain, args=(i,)) for i in range(2)]
        for th in threads:
            th.start()
        for th in threads:
            th.join(10)
    assert results[0] == results[1]
    assert len(results[0]) == len(short_trace)


def test_nominal_rate():
    with serve_stream(live_rig_source(CFG, RigProfile()), rate=100) as srv:
        sub = subscribe(srv.address)
        it = iter(sub)
        next(it)
        start = time.monotonic()
        n = 0
        for _ in it:
            if time.monotonic() - start > 1.0:
                break
            n += 1
        sub.close()
    assert 99 <= n <= 101


def test_slow_subscriber_disconnected():
    with serve_stream(live_rig_source(CFG, RigProfile()), rate=20_000, min_subscribers=2) as srv:
        slow = socket.socket()
        slow.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 4096)
        slow.connect(srv.address)
        fast = subscribe(srv.address)
        it = iter(fast)
        count = 0
        deadline = time.monotonic() + 20
        while not srv.stats.dropped_slow and time.monotonic() < deadline:
            next(it)
            count += 1
        # The remaining subscriber keeps receiving after the slow one is cut.
        for _ in range(2000):
            next(it)
        fast.close()
        slow.close()
    assert srv.stats.dropped_slow == 1
    assert count > 1000


def test_late_subscriber_after_end(short_trace):
    srv = serve_stream(short_trace.slice(slice(0, 10)), rate=10_000)
    assert len(list(subscribe(srv.address))) == 10
    assert srv.wait(5)
    with pytest.raises(ConnectError):
        subscribe(srv.address)
    srv.close()


def test_bind_error():
    blocker = socket.create_server(("127.0.0.1", 0))
    try:
        with pytest.raises(BindError):
            serve_stream([], port=blocker.getsockname()[1])
    finally:
        blocker.close()


def test_invalid_rate():
    with pytest.raises(ValueError):
        serve_stream([], rate=0)


def test_connect_error():
    s = socket.create_server(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    with pytest.raises(ConnectError):
        subscribe(f"127.0.0.1:{port}")
    with pytest.raises(ConnectError):
        subscribe("nonsense")


def test_malformed_frame_names_line():
    good = encode_frame(0, WavelengthSample(0.0, 1.0, 2.0))
    addr = fake_server([encode_hello(10.0), good, b"{not json\n"])
    sub = subscribe(addr)
    it = iter(sub)
    assert next(it) == WavelengthSample(0.0, 1.0, 2.0)
    with pytest.raises(ProtocolError) as err:
        next(it)
    assert err.value.line == "{not json"
    assert "{not json" in str(err.value)


@pytest.mark.parametrize("frame", [
    {"type": "frame", "t": 0.0, "wl": {"fbg1": 1.0}},
    {"type": "frame", "t": 0.0, "wl": {"fbg1": 1.0, "fbg2": 2.0, "fbg3": 3.0}},
    {"type": "frame", "t": "0", "wl": {"fbg1": 1.0, "fbg2": 2.0}},
    {"type": "frame", "t": 0.0, "wl": {"fbg1": -1.0, "fbg2": 2.0}},
    {"type": "bogus"},
    [1, 2],
])
def test_frame_validation(frame):
    addr = fake_server([encode_hello(10.0), (json.dumps(frame) + "\n").encode()])
    with pytest.raises(ProtocolError):
        list(subscribe(addr))


def test_non_monotone_frames():
    lines = [encode_hello(10.0), encode_frame(0, WavelengthSample(1.0, 1.0, 2.0)),
             encode_frame(1, WavelengthSample(0.5, 1.0, 2.0))]
    with pytest.raises(ProtocolError):
        list(subscribe(fake_server(lines)))


def test_version_mismatch_is_hard_error():
    hello = json.loads(encode_hello(10.0))
    hello["version"] = 99
    with pytest.raises(ProtocolError):
        subscribe(fake_server([(json.dumps(hello) + "\n").encode()]))


def test_clean_end_without_trailer():
    lines = [encode_hello(10.0), encode_frame(0, WavelengthSample(0.0, 1.0, 2.0))]
    sub = subscribe(fake_server(lines))
    assert len(list(sub)) == 1
    assert not sub.ended
