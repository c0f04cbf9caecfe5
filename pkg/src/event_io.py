"""
Event stream files.

CSV:
    # {"width": 64, "height": 64, ...}      metadata, JSON on one comment line
    t,x,y,p,t_prev
    0.000123456,12,30,1,0.000000000

Binary (little-endian):
    8 bytes   magic b"EVBLUR\\0\\0"
    u32       format version
    u32       length of the JSON metadata block
    ...       JSON metadata
    records   f64 t, u16 x, u16 y, i8 p, f64 t_prev  (21 bytes each)

The binary form round-trips exactly. CSV keeps 9 decimals of each time.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.errors import EventFileParseError, InvalidArgumentError
from src.event_core import EVENT_DTYPE, EventStream

logger = logging.getLogger(__name__)

MAGIC = b"EVBLUR\x00\x00"
VERSION = 1
HEADER = struct.Struct('<8sII')
CSV_COLUMNS = "t,x,y,p,t_prev"
COORD_MAX = np.iinfo(np.uint16).max

PathLike = Union[str, Path]


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt is None:
        fmt = 'csv' if path.suffix.lower() == '.csv' else 'bin'
    if fmt not in ('csv', 'bin'):
        raise InvalidArgumentError(f"unknown event format '{fmt}' (use csv or bin)")
    return fmt


def _stream_from_meta(meta: dict, events: np.ndarray, path: str, **where) -> EventStream:
    try:
        return EventStream(
            width=int(meta['width']),
            height=int(meta['height']),
            duration=float(meta['duration']),
            events=events,
            fingerprint=str(meta.get('fingerprint', '')),
            t_start=float(meta.get('t_start', 0.0)),
        )
    except KeyError as e:
        raise EventFileParseError(f"metadata is missing {e}", path, **where)
    except InvalidArgumentError as e:
        raise EventFileParseError(str(e), path, **where)


# ==================== Binary ====================

def _write_bin(stream: EventStream, path: Path) -> None:
    meta = json.dumps(stream.header(), sort_keys=True).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(HEADER.pack(MAGIC, VERSION, len(meta)))
        f.write(meta)
        f.write(np.ascontiguousarray(stream.events, dtype=EVENT_DTYPE).tobytes())


def _read_bin(path: Path) -> EventStream:
    data = path.read_bytes()
    name = str(path)

    if len(data) < HEADER.size:
        raise EventFileParseError("file is shorter than the header", name, offset=0)
    magic, version, meta_len = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise EventFileParseError("not an event file (bad magic)", name, offset=0)
    if version != VERSION:
        raise EventFileParseError(f"unsupported version {version}", name, offset=8)

    meta_end = HEADER.size + meta_len
    if meta_end > len(data):
        raise EventFileParseError("metadata block is truncated", name, offset=HEADER.size)
    try:
        meta = json.loads(data[HEADER.size:meta_end].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise EventFileParseError(f"bad metadata: {e}", name, offset=HEADER.size)

    payload = len(data) - meta_end
    if payload % EVENT_DTYPE.itemsize:
        complete = payload // EVENT_DTYPE.itemsize
        raise EventFileParseError(
            f"trailing partial record ({payload % EVENT_DTYPE.itemsize} bytes)",
            name, offset=meta_end + complete * EVENT_DTYPE.itemsize)

    events = np.frombuffer(data, dtype=EVENT_DTYPE, offset=meta_end).copy()
    bad = np.nonzero((events['p'] != 1) & (events['p'] != -1))[0]
    if bad.size:
        raise EventFileParseError(f"polarity {events['p'][bad[0]]} is not +-1", name,
                                  offset=meta_end + int(bad[0]) * EVENT_DTYPE.itemsize)

    return _stream_from_meta(meta, events, name, offset=HEADER.size)


# ==================== CSV ====================

def _write_csv(stream: EventStream, path: Path) -> None:
    with open(path, 'w') as f:
        f.write('# ' + json.dumps(stream.header(), sort_keys=True) + '\n')
        f.write(CSV_COLUMNS + '\n')
        for e in stream.events:
            f.write(f"{e['t']:.9f},{e['x']},{e['y']},{e['p']},{e['t_prev']:.9f}\n")


def _read_csv(path: Path) -> EventStream:
    name = str(path)
    meta = None
    header_seen = False
    rows = []

    with open(path, 'rb') as f:
        for lineno, raw in enumerate(f, start=1):
            try:
                line = raw.decode('utf-8').strip()
            except UnicodeDecodeError as e:
                raise EventFileParseError(f"not valid UTF-8: {e}", name, line=lineno)
            if not line:
                continue
            if line.startswith('#'):
                if meta is None:
                    try:
                        meta = json.loads(line[1:].strip())
                    except json.JSONDecodeError as e:
                        raise EventFileParseError(f"bad metadata: {e}", name, line=lineno)
                continue
            if not header_seen:
                if line.replace(' ', '') != CSV_COLUMNS:
                    raise EventFileParseError(
                        f"expected header '{CSV_COLUMNS}', got '{line}'", name, line=lineno)
                header_seen = True
                continue

            fields = line.split(',')
            if len(fields) != 5:
                raise EventFileParseError(
                    f"expected 5 fields, got {len(fields)}", name, line=lineno)
            try:
                t, x, y, p, t_prev = (float(fields[0]), int(fields[1]), int(fields[2]),
                                      int(fields[3]), float(fields[4]))
            except ValueError as e:
                raise EventFileParseError(str(e), name, line=lineno)
            if p not in (-1, 1):
                raise EventFileParseError(f"polarity {p} is not +-1", name, line=lineno)
            if not (0 <= x <= COORD_MAX and 0 <= y <= COORD_MAX):
                raise EventFileParseError(
                    f"pixel ({x}, {y}) outside 0..{COORD_MAX}", name, line=lineno)
            rows.append((t, x, y, p, t_prev))

    if meta is None:
        raise EventFileParseError("missing metadata comment line", name, line=1)
    if not header_seen:
        raise EventFileParseError("missing column header", name, line=1)

    events = np.array(rows, dtype=EVENT_DTYPE) if rows else np.zeros(0, dtype=EVENT_DTYPE)
    return _stream_from_meta(meta, events, name, line=1)


# ==================== Public API ====================

def write_events(stream: EventStream, path: PathLike, fmt: Optional[str] = None) -> Path:
    """
    Write a stream as CSV or binary; the format follows the extension by default.

    Returns:
        the path written
    """
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if fmt == 'csv':
        _write_csv(stream, path)
    else:
        _write_bin(stream, path)
    logger.info("Wrote %d events to %s (%s)", len(stream), path, fmt)
    return path


def read_events(path: PathLike, fmt: Optional[str] = None) -> EventStream:
    """
    Read a stream written by write_events.

    Raises:
        EventFileParseError: malformed file, with line (CSV) or byte offset (binary)
    """
    path = Path(path)
    fmt = _infer_format(path, fmt)
    stream = _read_csv(path) if fmt == 'csv' else _read_bin(path)
    logger.debug("Read %d events from %s", len(stream), path)
    return stream
