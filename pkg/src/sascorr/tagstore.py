"""RTG1 binary time-tag format: the interchange boundary between simulation
and analysis.

Layout, little-endian throughout:

    offset  size  field
    0       4     magic  b"RTG1"
    4       4     version, uint32, currently 1
    8       8     rep_period_ps, uint64
    16      8     record_count, uint64
    24      32    digest: SHA-256 over bytes [0, 24) plus the whole body
    56      16*N  records

    record: uint64 timestamp_ps | uint8 channel | uint8 flags | 6 zero bytes

Channel 0 is Stokes, channel 1 anti-Stokes; flags are reserved and zero.
Within each channel timestamps are non-decreasing; the global record order is
whatever the writer supplied and is preserved exactly, so write(read(f))
reproduces f byte for byte.  The digest makes the file self-validating: the
reader recomputes it, and any single corrupted byte is rejected.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CHANNEL_STOKES",
    "CHANNEL_ANTISTOKES",
    "HEADER_SIZE",
    "RECORD_SIZE",
    "RECORD_DTYPE",
    "TagFileHeader",
    "TagStream",
    "TagFormatError",
    "BadMagic",
    "UnsupportedVersion",
    "TruncatedBody",
    "OutOfOrder",
    "BadChannel",
    "DigestMismatch",
    "write_tags",
    "read_tags",
    "write_stream",
    "read_stream",
]

MAGIC = b"RTG1"
VERSION = 1
HEADER_SIZE = 56
RECORD_SIZE = 16
CHANNEL_STOKES = 0
CHANNEL_ANTISTOKES = 1

RECORD_DTYPE = np.dtype(
    {
        "names": ["timestamp_ps", "channel", "flags"],
        "formats": ["<u8", "u1", "u1"],
        "offsets": [0, 8, 9],
        "itemsize": RECORD_SIZE,
    }
)


class TagFormatError(ValueError):
    """Malformed RTG1 data; ``offset`` is the first offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class BadMagic(TagFormatError):
    pass


class UnsupportedVersion(TagFormatError):
    pass


class TruncatedBody(TagFormatError):
    pass


class OutOfOrder(TagFormatError):
    pass


class BadChannel(TagFormatError):
    pass


class DigestMismatch(TagFormatError):
    pass


@dataclass(frozen=True)
class TagFileHeader:
    rep_period_ps: int
    record_count: int
    digest: bytes = b""

    def __post_init__(self) -> None:
        if not 0 < self.rep_period_ps < 2**64:
            raise ValueError("rep_period_ps must fit in a positive uint64")
        if not 0 <= self.record_count < 2**64:
            raise ValueError("record_count must fit in a uint64")
        if self.digest and len(self.digest) != 32:
            raise ValueError("digest must be 32 bytes when present")


@dataclass(frozen=True)
class TagStream:
    """Per-channel sorted timestamp arrays (uint64 picoseconds)."""

    stokes: np.ndarray
    antistokes: np.ndarray
    rep_period_ps: int

    def __post_init__(self) -> None:
        for name in ("stokes", "antistokes"):
            arr = getattr(self, name)
            if arr.dtype != np.uint64:
                object.__setattr__(self, name, arr.astype(np.uint64))

    @property
    def n_tags(self) -> int:
        return len(self.stokes) + len(self.antistokes)

    def to_records(self) -> np.ndarray:
        """Interleave both channels into one record array sorted by
        (timestamp, channel); per-channel order is preserved."""
        n_s, n_a = len(self.stokes), len(self.antistokes)
        rec = np.zeros(n_s + n_a, dtype=RECORD_DTYPE)
        ts = np.concatenate([self.stokes, self.antistokes])
        ch = np.concatenate(
            [
                np.zeros(n_s, dtype=np.uint8),
                np.ones(n_a, dtype=np.uint8),
            ]
        )
        order = np.lexsort((ch, ts))
        rec["timestamp_ps"] = ts[order]
        rec["channel"] = ch[order]
        return rec

    @classmethod
    def from_records(cls, records: np.ndarray, rep_period_ps: int) -> "TagStream":
        ch = records["channel"]
        return cls(
            stokes=records["timestamp_ps"][ch == CHANNEL_STOKES].copy(),
            antistokes=records["timestamp_ps"][ch == CHANNEL_ANTISTOKES].copy(),
            rep_period_ps=rep_period_ps,
        )


def _as_record_array(records) -> np.ndarray:
    if isinstance(records, np.ndarray) and records.dtype == RECORD_DTYPE:
        return records
    rec = np.zeros(len(records), dtype=RECORD_DTYPE)
    for i, item in enumerate(records):
        ts, ch = item[0], item[1]
        flags = item[2] if len(item) > 2 else 0
        rec[i] = (ts, ch, flags)
    return rec


def _validate_records(records: np.ndarray) -> None:
    ch = records["channel"]
    bad = np.nonzero((ch != CHANNEL_STOKES) & (ch != CHANNEL_ANTISTOKES))[0]
    if bad.size:
        raise BadChannel(
            f"channel {ch[bad[0]]} is not 0 or 1",
            HEADER_SIZE + RECORD_SIZE * int(bad[0]) + 8,
        )
    badflag = np.nonzero(records["flags"] != 0)[0]
    if badflag.size:
        raise TagFormatError(
            "flags bytes are reserved and must be 0",
            HEADER_SIZE + RECORD_SIZE * int(badflag[0]) + 9,
        )
    for channel in (CHANNEL_STOKES, CHANNEL_ANTISTOKES):
        idx = np.nonzero(ch == channel)[0]
        ts = records["timestamp_ps"][idx]
        drops = np.nonzero(ts[1:] < ts[:-1])[0]
        if drops.size:
            raise OutOfOrder(
                f"channel {channel} timestamps decrease",
                HEADER_SIZE + RECORD_SIZE * int(idx[drops[0] + 1]),
            )


def _digest(header_prefix: bytes, body: bytes) -> bytes:
    h = hashlib.sha256()
    h.update(header_prefix)
    h.update(body)
    return h.digest()


def _header_prefix(rep_period_ps: int, record_count: int) -> bytes:
    return (
        MAGIC
        + VERSION.to_bytes(4, "little")
        + int(rep_period_ps).to_bytes(8, "little")
        + int(record_count).to_bytes(8, "little")
    )


def write_tags(path, header: TagFileHeader, records) -> TagFileHeader:
    """Validate and write records; returns the header actually written
    (with the computed digest).  Output is byte-identical for identical
    input."""
    rec = _as_record_array(records)
    if header.record_count != len(rec):
        raise ValueError(
            f"header.record_count = {header.record_count} but {len(rec)} records given"
        )
    _validate_records(rec)
    prefix = _header_prefix(header.rep_period_ps, len(rec))
    body = rec.tobytes()
    digest = _digest(prefix, body)
    with open(path, "wb") as fh:
        fh.write(prefix)
        fh.write(digest)
        fh.write(body)
    return TagFileHeader(
        rep_period_ps=header.rep_period_ps, record_count=len(rec), digest=digest
    )


def read_tags(path) -> tuple[TagFileHeader, np.ndarray]:
    """Read and fully validate an RTG1 file.

    Checks, in order: magic, version, body length against record_count,
    digest, channel values, per-channel timestamp ordering.  Each failure
    names the first offending byte offset.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE:
        raise TruncatedBody(
            f"file is {len(blob)} bytes, shorter than the {HEADER_SIZE}-byte header",
            len(blob),
        )
    if blob[0:4] != MAGIC:
        raise BadMagic(f"bad magic {blob[0:4]!r}, expected {MAGIC!r}", 0)
    version = int.from_bytes(blob[4:8], "little")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}, expected {VERSION}", 4)
    rep_period_ps = int.from_bytes(blob[8:16], "little")
    record_count = int.from_bytes(blob[16:24], "little")
    digest = blob[24:56]
    body = blob[HEADER_SIZE:]
    if len(body) != record_count * RECORD_SIZE:
        offset = HEADER_SIZE + min(len(body), record_count * RECORD_SIZE)
        raise TruncatedBody(
            f"body is {len(body)} bytes, expected {record_count * RECORD_SIZE} "
            f"for {record_count} records",
            offset,
        )
    if rep_period_ps == 0:
        raise TagFormatError("rep_period_ps must be positive", 8)
    expected = _digest(blob[0:24], body)
    if digest != expected:
        raise DigestMismatch("stored digest does not match file contents", 24)
    records = np.frombuffer(body, dtype=RECORD_DTYPE).copy()
    _validate_records(records)
    header = TagFileHeader(
        rep_period_ps=rep_period_ps, record_count=record_count, digest=digest
    )
    return header, records


def write_stream(path, stream: TagStream) -> TagFileHeader:
    records = stream.to_records()
    header = TagFileHeader(rep_period_ps=stream.rep_period_ps, record_count=len(records))
    return write_tags(path, header, records)


def read_stream(path) -> TagStream:
    header, records = read_tags(path)
    return TagStream.from_records(records, rep_period_ps=header.rep_period_ps)
