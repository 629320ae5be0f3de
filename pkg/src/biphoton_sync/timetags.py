"""Time-tag records, local clock models, and the record file format.

Detection events carry integer femtosecond timestamps against a local,
unsynchronized clock.  Physics upstream is computed in real-valued
picoseconds; conversion to the integer grid happens exactly once, when a
clock records an event.  Streams are exchanged between stations as "BPTT"
files (the classical channel of the protocol); encoding is bit-exact and
CRC-protected.

File layout, little-endian:

    magic    4s   b"BPTT"
    version  u16  1
    clock_id u8
    swap     u8   0 = plate at 0 degrees, 1 = plate at 45 degrees
    res      u16  clock quantization step, ps
    duration u32  run length, seconds (rounded up)
    count    u64  number of records
    records  count * { timestamp i64 (fs), channel u8, pad u8[7] }
    crc      u32  CRC32 over everything above
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .channel import SwapState
from .errors import (
    ChecksumError,
    DecodeError,
    MagicMismatchError,
    NonMonotoneTimestampsError,
    RangeError,
    TruncatedPayloadError,
    UnsupportedVersionError,
    ValidationError,
)

FS_PER_PS = 1000
CHANNEL_D1 = 1
CHANNEL_D2 = 2

_MAGIC = b"BPTT"
_VERSION = 1
_HEADER = struct.Struct("<4sHBBHIQ")
_RECORD_DTYPE = np.dtype([("timestamp_fs", "<i8"), ("channel", "u1"), ("pad", "u1", (7,))])
_I64_MIN = np.iinfo(np.int64).min
_I64_MAX = np.iinfo(np.int64).max


class TimeTag(NamedTuple):
    timestamp_fs: int
    channel: int


@dataclass(frozen=True)
class ClockModel:
    """A local time base: constant offset, linear drift, and quantization.

    The offset and drift are applied to every reading this clock records;
    resolution is the step of the timing electronics (integer ps so grid
    values are exact in femtoseconds).
    """

    offset_ps: float = 0.0
    drift_ps_per_s: float = 0.0
    resolution_ps: int = 3

    def __post_init__(self):
        if not isinstance(self.resolution_ps, int) or isinstance(self.resolution_ps, bool):
            raise ValidationError("resolution_ps must be an integer number of picoseconds")
        if not 1 <= self.resolution_ps <= 0xFFFF:
            raise ValidationError(f"resolution_ps must be in [1, 65535], got {self.resolution_ps}")


def apply_clock(true_time_ps, clock: ClockModel):
    """Record a true time (ps) through a clock: offset, drift, then rounding
    to the clock's grid (half-to-even), returned as integer femtoseconds.

    Accepts scalars or arrays; raises RangeError if the result leaves the
    64-bit femtosecond range.
    """
    true_ps = np.asarray(true_time_ps, dtype=np.float64)
    recorded_ps = true_ps + clock.offset_ps + clock.drift_ps_per_s * (true_ps * 1e-12)
    grid_fs = clock.resolution_ps * FS_PER_PS
    steps = np.rint(recorded_ps * (FS_PER_PS / grid_fs))
    if np.any(np.abs(steps) > _I64_MAX / grid_fs):
        raise RangeError("recorded timestamp overflows 64-bit femtoseconds")
    out = steps.astype(np.int64) * grid_fs
    return out if out.ndim else int(out)


@dataclass(frozen=True, eq=False)
class TagStream:
    """An immutable, time-ordered sequence of detection tags plus the header
    fields that travel with it on the wire.

    Generation metadata (seed, scenario digest) is carried for bookkeeping
    but is not part of the file format, so it is excluded from equality.
    """

    clock_id: int
    swap_state: SwapState
    resolution_ps: int
    duration_s: int
    timestamps_fs: np.ndarray
    channels: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.ascontiguousarray(self.timestamps_fs, dtype=np.int64)
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        if ts.ndim != 1 or ch.ndim != 1 or ts.shape != ch.shape:
            raise ValidationError("timestamps and channels must be 1-d arrays of equal length")
        if ts.size > 1 and np.any(np.diff(ts) < 0):
            raise NonMonotoneTimestampsError("stream timestamps must be nondecreasing")
        if not 0 <= self.clock_id <= 0xFF:
            raise ValidationError(f"clock_id must fit in a byte, got {self.clock_id}")
        if not isinstance(self.swap_state, SwapState):
            raise ValidationError("swap_state must be a SwapState")
        if not 1 <= self.resolution_ps <= 0xFFFF:
            raise ValidationError("resolution_ps must be in [1, 65535]")
        if not 0 <= self.duration_s <= 0xFFFFFFFF:
            raise ValidationError("duration_s must fit in u32")
        ts.setflags(write=False)
        ch.setflags(write=False)
        object.__setattr__(self, "timestamps_fs", ts)
        object.__setattr__(self, "channels", ch)

    def __len__(self) -> int:
        return int(self.timestamps_fs.size)

    def __iter__(self) -> Iterator[TimeTag]:
        for t, c in zip(self.timestamps_fs, self.channels):
            yield TimeTag(int(t), int(c))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TagStream):
            return NotImplemented
        return (
            self.clock_id == other.clock_id
            and self.swap_state == other.swap_state
            and self.resolution_ps == other.resolution_ps
            and self.duration_s == other.duration_s
            and np.array_equal(self.timestamps_fs, other.timestamps_fs)
            and np.array_equal(self.channels, other.channels)
        )


def shift_stream(stream: TagStream, delta_ps: float) -> TagStream:
    """Translate every timestamp by delta (ps, quantized to integer fs)."""
    delta_fs = int(np.rint(delta_ps * FS_PER_PS))
    if len(stream):
        lo = int(stream.timestamps_fs[0]) + delta_fs
        hi = int(stream.timestamps_fs[-1]) + delta_fs
        if lo < _I64_MIN or hi > _I64_MAX:
            raise RangeError("shift would overflow 64-bit femtoseconds")
    return TagStream(
        clock_id=stream.clock_id,
        swap_state=stream.swap_state,
        resolution_ps=stream.resolution_ps,
        duration_s=stream.duration_s,
        timestamps_fs=stream.timestamps_fs + np.int64(delta_fs),
        channels=stream.channels,
        metadata=dict(stream.metadata),
    )


def encode_stream(stream: TagStream) -> bytes:
    """Serialize a stream to the BPTT wire format (header, records, CRC)."""
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        stream.clock_id,
        stream.swap_state.value,
        stream.resolution_ps,
        stream.duration_s,
        len(stream),
    )
    records = np.zeros(len(stream), dtype=_RECORD_DTYPE)
    records["timestamp_fs"] = stream.timestamps_fs
    records["channel"] = stream.channels
    payload = header + records.tobytes()
    return payload + struct.pack("<I", zlib.crc32(payload))


def decode_stream(data: bytes) -> TagStream:
    """Parse BPTT bytes back into a TagStream.

    Raises a distinct DecodeError subclass for each failure mode: wrong
    magic, unsupported version, size/count mismatch, CRC mismatch, and
    non-monotone timestamps.
    """
    if len(data) < _HEADER.size + 4:
        raise TruncatedPayloadError(f"file too short ({len(data)} bytes) for a BPTT header")
    magic, version, clock_id, swap_raw, resolution_ps, duration_s, count = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise MagicMismatchError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    expected = _HEADER.size + count * _RECORD_DTYPE.itemsize + 4
    if len(data) != expected:
        raise TruncatedPayloadError(
            f"file is {len(data)} bytes but {count} records imply {expected}"
        )
    (crc_stored,) = struct.unpack_from("<I", data, expected - 4)
    if zlib.crc32(data[: expected - 4]) != crc_stored:
        raise ChecksumError("CRC32 mismatch")
    if swap_raw not in (SwapState.PLATE0.value, SwapState.PLATE45.value):
        raise DecodeError(f"invalid swap_state byte {swap_raw}")
    records = np.frombuffer(data, dtype=_RECORD_DTYPE, count=count, offset=_HEADER.size)
    timestamps = records["timestamp_fs"]
    if count > 1 and np.any(np.diff(timestamps) < 0):
        raise NonMonotoneTimestampsError("record timestamps are not nondecreasing")
    return TagStream(
        clock_id=clock_id,
        swap_state=SwapState(swap_raw),
        resolution_ps=resolution_ps,
        duration_s=duration_s,
        timestamps_fs=timestamps.copy(),
        channels=records["channel"].copy(),
    )


def write_stream(stream: TagStream, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_stream(stream))


def read_stream(path) -> TagStream:
    with open(path, "rb") as fh:
        return decode_stream(fh.read())
