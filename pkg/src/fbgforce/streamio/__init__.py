"""File formats, characterization persistence and the stream emulator."""
from .files import (
    CharacterizationFile,
    atomic_write_text,
    load_characterization,
    parse_trace,
    read_trace,
    store_characterization,
    task_log_to_csv,
    trace_to_csv,
    write_trace,
)
from .stream import StreamServer, StreamSubscription, serve_stream, subscribe

__all__ = [
    "CharacterizationFile", "atomic_write_text", "load_characterization", "parse_trace",
    "read_trace", "store_characterization", "task_log_to_csv", "trace_to_csv", "write_trace",
    "StreamServer", "StreamSubscription", "serve_stream", "subscribe",
]
