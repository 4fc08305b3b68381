"""Interrogator emulator: newline-delimited JSON frames over TCP.

Wire format (see docs/stream-schema.md): one ``hello`` line, then one
``frame`` line per sample, then an ``end`` line when the source is exhausted.
Floats are written with ``repr`` precision, so a subscriber receives the
exact doubles that were sent.
"""
from __future__ import annotations

import asyncio
import json
import logging
import math
import socket
import threading
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from ..core import WavelengthSample
from ..errors import BindError, ConnectError, ProtocolError
from ..trace import Trace

log = logging.getLogger(__name__)

STREAM_SCHEMA = "fbgforce.stream"
STREAM_VERSION = 1
CHANNELS = ("fbg1", "fbg2")
QUEUE_FRAMES = 1000
SEND_BUFFER_BYTES = 64 * 1024


def encode_hello(rate: float) -> bytes:
    msg = {"type": "hello", "schema": STREAM_SCHEMA, "version": STREAM_VERSION,
           "channels": list(CHANNELS), "rate_hz": float(rate), "units": {"t": "s", "wavelength": "pm"}}
    return (json.dumps(msg) + "\n").encode()


def encode_frame(seq: int, sample: WavelengthSample) -> bytes:
    msg = {"type": "frame", "seq": seq, "t": sample.t,
           "wl": {CHANNELS[0]: sample.lambda1, CHANNELS[1]: sample.lambda2}}
    return (json.dumps(msg) + "\n").encode()


def encode_end(frames: int) -> bytes:
    return (json.dumps({"type": "end", "frames": frames}) + "\n").encode()


def _as_samples(source) -> Iterable[WavelengthSample]:
    if isinstance(source, Trace):
        return source.samples()
    return source


@dataclass
class StreamStats:
    frames: int = 0
    connected: int = 0
    dropped_slow: int = 0
    write_errors: int = 0
    finished: bool = False


class _Subscriber:
    def __init__(self, writer: asyncio.StreamWriter, queue_size: int):
        self.writer = writer
        self.queue: asyncio.Queue = asyncio.Queue(queue_size)
        self.closed = False

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.writer.close()


class StreamServer:
    """Handle for a running emulator; use :func:`serve_stream` to create one."""

    def __init__(self, source, host: str, port: int, rate: float,
                 min_subscribers: int, queue_size: int):
        if not rate > 0 or not math.isfinite(rate):
            raise ValueError("rate must be a positive finite number")
        self.rate = float(rate)
        self.min_subscribers = min_subscribers
        self.queue_size = queue_size
        self.stats = StreamStats()
        self._source = iter(_as_samples(source))
        self._host, self._port = host, port
        self._subs: list[_Subscriber] = []
        self._writers: set[asyncio.Task] = set()
        self._ready = threading.Event()
        self._done = threading.Event()
        self._error: BaseException | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._stop: asyncio.Event | None = None
        self._thread = threading.Thread(target=self._run, name="fbg-stream", daemon=True)
        self.address: tuple[str, int] | None = None

    # -- lifecycle (caller thread) --

    def start(self) -> "StreamServer":
        self._thread.start()
        self._ready.wait()
        if self._error is not None:
            raise self._error
        return self

    def close(self, timeout: float = 5.0) -> None:
        if self._loop is not None and not self._done.is_set():
            self._loop.call_soon_threadsafe(self._stop.set)
        self._thread.join(timeout)

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the source is exhausted and every subscriber is closed."""
        return self._done.wait(timeout)

    def __enter__(self) -> "StreamServer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def port(self) -> int:
        return self.address[1]

    # -- service thread --

    def _run(self) -> None:
        try:
            asyncio.run(self._main())
        except BaseException as exc:  # surfaced through start() when early
            if not self._ready.is_set():
                self._error = exc
            else:
                log.exception("stream service failed")
        finally:
            self._ready.set()
            self._done.set()

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop = asyncio.Event()
        self._have_subs = asyncio.Event()
        try:
            server = await asyncio.start_server(self._on_connect, self._host, self._port)
        except OSError as exc:
            raise BindError(f"cannot bind {self._host}:{self._port}: {exc}") from exc
        self.address = server.sockets[0].getsockname()[:2]
        self._ready.set()
        async with server:
            broadcast = asyncio.create_task(self._broadcast())
            stop = asyncio.create_task(self._stop.wait())
            await asyncio.wait({broadcast, stop}, return_when=asyncio.FIRST_COMPLETED)
            server.close()
            if not broadcast.done():
                broadcast.cancel()
                for sub in list(self._subs):
                    sub.close()
                for task in self._writers:
                    task.cancel()
            await asyncio.gather(broadcast, return_exceptions=True)
            stop.cancel()
            await asyncio.gather(*list(self._writers), return_exceptions=True)

    async def _on_connect(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        sock = writer.get_extra_info("socket")
        if sock is not None:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, SEND_BUFFER_BYTES)
        sub = _Subscriber(writer, self.queue_size)
        writer.write(encode_hello(self.rate))
        if self.stats.finished:
            writer.write(encode_end(self.stats.frames))
            sub.close()
            return
        self._subs.append(sub)
        self.stats.connected += 1
        if len(self._subs) >= self.min_subscribers:
            self._have_subs.set()
        task = asyncio.current_task()
        self._writers.add(task)
        try:
            await self._pump(sub)
        finally:
            self._writers.discard(task)

    async def _pump(self, sub: _Subscriber) -> None:
        try:
            while not sub.closed:
                line = await sub.queue.get()
                if line is None:
                    break
                sub.writer.write(line)
                await sub.writer.drain()
        except (ConnectionError, OSError):
            if not sub.closed:
                self.stats.write_errors += 1
        finally:
            if sub in self._subs:
                self._subs.remove(sub)
            sub.close()

    def _offer(self, line: bytes) -> None:
        for sub in list(self._subs):
            if sub.closed:
                continue
            try:
                sub.queue.put_nowait(line)
            except asyncio.QueueFull:
                log.warning("disconnecting slow subscriber (%d frames queued)", sub.queue.qsize())
                self.stats.dropped_slow += 1
                self._subs.remove(sub)
                sub.close()

    async def _broadcast(self) -> None:
        if self.min_subscribers > 0:
            await self._have_subs.wait()
        period = 1.0 / self.rate
        start = self._loop.time()
        seq = 0
        for sample in self._source:
            due = start + seq * period
            delay = due - self._loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            elif seq % 256 == 0:
                await asyncio.sleep(0)
            self._offer(encode_frame(seq, sample))
            seq += 1
            self.stats.frames = seq
        self.stats.finished = True
        end = encode_end(seq)
        for sub in list(self._subs):
            try:
                sub.queue.put_nowait(end)
                sub.queue.put_nowait(None)
            except asyncio.QueueFull:
                self.stats.dropped_slow += 1
                self._subs.remove(sub)
                sub.close()
        await asyncio.gather(*list(self._writers), return_exceptions=True)


def serve_stream(source: Trace | Iterable[WavelengthSample], port: int = 0, rate: float = 100.0,
                 host: str = "127.0.0.1", min_subscribers: int = 1,
                 queue_size: int = QUEUE_FRAMES) -> StreamServer:
    """Start replaying ``source`` to TCP subscribers and return the handle.

    Broadcasting begins once ``min_subscribers`` clients are connected, so a
    replay is not lost before anyone listens.  ``port=0`` picks a free port.
    """
    return StreamServer(source, host, port, rate, min_subscribers, queue_size).start()


# -- client ---------------------------------------------------------------------

def _parse_address(address) -> tuple[str, int]:
    if isinstance(address, tuple):
        return address[0], int(address[1])
    host, _, port = str(address).rpartition(":")
    if not host or not port.isdigit():
        raise ConnectError(f"address must be host:port, got {address!r}")
    return host, int(port)


def _number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


@dataclass
class Handshake:
    schema: str
    version: int
    channels: tuple[str, ...]
    rate_hz: float
    raw: dict = field(repr=False, default_factory=dict)


class StreamSubscription:
    """Single-consumer iterator over the samples of one connection."""

    def __init__(self, address, timeout: float = 10.0, expected_version: int = STREAM_VERSION):
        host, port = _parse_address(address)
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._file = self._sock.makefile("rb")
        self.ended = False
        self.frames = 0
        self.handshake = self._read_handshake(expected_version)

    def _readline(self) -> str | None:
        try:
            raw = self._file.readline()
        except OSError as exc:
            raise ConnectError(f"connection lost: {exc}") from exc
        if not raw:
            return None
        return raw.decode("utf-8", errors="replace").rstrip("\r\n")

    def _decode(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError("malformed line", line) from None
        if not isinstance(msg, dict) or "type" not in msg:
            raise ProtocolError("line is not a typed object", line)
        return msg

    def _read_handshake(self, expected_version: int) -> Handshake:
        line = self._readline()
        if line is None:
            self.close()
            raise ConnectError("connection closed before handshake")
        msg = self._decode(line)
        if msg.get("type") != "hello" or msg.get("schema") != STREAM_SCHEMA:
            raise ProtocolError("expected hello handshake", line)
        if msg.get("version") != expected_version:
            raise ProtocolError(
                f"schema version {msg.get('version')!r} does not match {expected_version}", line
            )
        channels = msg.get("channels")
        if not isinstance(channels, list) or tuple(channels) != CHANNELS:
            raise ProtocolError(f"unsupported channel list {channels!r}", line)
        if not _number(msg.get("rate_hz")) or msg["rate_hz"] <= 0:
            raise ProtocolError("handshake rate_hz must be positive", line)
        return Handshake(msg["schema"], msg["version"], tuple(channels), float(msg["rate_hz"]), msg)

    @property
    def channels(self) -> tuple[str, ...]:
        return self.handshake.channels

    @property
    def rate(self) -> float:
        return self.handshake.rate_hz

    def __iter__(self) -> Iterator[WavelengthSample]:
        prev_t = -math.inf
        try:
            while True:
                line = self._readline()
                if line is None:
                    return
                msg = self._decode(line)
                kind = msg["type"]
                if kind == "end":
                    self.ended = True
                    return
                if kind != "frame":
                    raise ProtocolError(f"unexpected message type {kind!r}", line)
                t, wl = msg.get("t"), msg.get("wl")
                if not _number(t) or not isinstance(wl, dict) or set(wl) != set(self.channels):
                    raise ProtocolError("frame does not match handshake channels", line)
                if not t > prev_t:
                    raise ProtocolError("frame time is not increasing", line)
                l1, l2 = (wl[c] for c in self.channels)
                if not (_number(l1) and _number(l2)) or l1 <= 0 or l2 <= 0:
                    raise ProtocolError("wavelengths must be positive numbers", line)
                prev_t = t
                self.frames += 1
                yield WavelengthSample(float(t), float(l1), float(l2))
        finally:
            self.close()

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "StreamSubscription":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def subscribe(address, timeout: float = 10.0) -> StreamSubscription:
    """Connect to an emulator; iterate the result for :class:`WavelengthSample`."""
    return StreamSubscription(address, timeout)
