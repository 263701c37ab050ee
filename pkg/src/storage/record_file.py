#!/usr/bin/env python3
"""
Record File Component
Binary little-endian container for measurement records

Layout: a fixed header (magic, version, unit convention, seed, state digest,
payload digest, shot count, gain) followed by packed 25-byte shots.
"""

import sys
import struct
import hashlib
import logging
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from measurement.measurement import CONVENTION, MeasurementRecord, RecordMeta
from utils.errors import RecordFormatError

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MAGIC = b'MBNL'
FORMAT_VERSION = 1
HEADER = struct.Struct('<4sH8sQ32s32sQd')
SHOT_DTYPE = np.dtype([
    ('alice_quad', 'u1'),
    ('alice_value', '<f8'),
    ('bob_x', '<f8'),
    ('bob_p', '<f8'),
])

PathLike = Union[str, Path]


def record_to_bytes(record: MeasurementRecord) -> bytes:
    packed = np.empty(len(record), dtype=SHOT_DTYPE)
    packed['alice_quad'] = record.alice_quad
    packed['alice_value'] = record.alice_value
    packed['bob_x'] = record.bob_x
    packed['bob_p'] = record.bob_p
    return packed.tobytes()


def _records_from_array(packed: np.ndarray, meta: RecordMeta) -> MeasurementRecord:
    return MeasurementRecord(
        alice_quad=packed['alice_quad'].copy(),
        alice_value=packed['alice_value'].copy(),
        bob_x=packed['bob_x'].copy(),
        bob_p=packed['bob_p'].copy(),
        meta=meta,
    )


class RecordWriter:
    """Streaming writer; the header is rewritten with count and digest on close"""

    def __init__(self, path: PathLike, seed: int, state_digest: bytes = b'', gain: float = 1.0):
        self.path = Path(path)
        self.seed = int(seed)
        self.state_digest = (state_digest or b'').ljust(32, b'\0')[:32]
        self.gain = float(gain)
        self.n_shots = 0
        self._hash = hashlib.sha256()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self._handle = open(self.path, 'wb')
        except OSError as e:
            raise RecordFormatError(f"Cannot open {self.path} for writing: {e}") from e
        self._handle.write(self._header(b'\0' * 32))

    def _header(self, payload_digest: bytes) -> bytes:
        return HEADER.pack(MAGIC, FORMAT_VERSION, CONVENTION.encode('ascii'), self.seed,
                           self.state_digest, payload_digest, self.n_shots, self.gain)

    def write(self, record: MeasurementRecord):
        payload = record_to_bytes(record)
        self._hash.update(payload)
        self._handle.write(payload)
        self.n_shots += len(record)

    def close(self) -> str:
        """Finalize the header; returns the payload digest as hex"""
        digest = self._hash.digest()
        self._handle.seek(0)
        self._handle.write(self._header(digest))
        self._handle.close()
        logger.info(f"Wrote {self.n_shots} shots to {self.path}")
        return digest.hex()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self._handle.close()


def write_record(path: PathLike, record: MeasurementRecord, state_digest: bytes = b'') -> str:
    """
    Write a complete record to disk

    Args:
        path: Output file
        record: Record to store
        state_digest: SHA-256 of the source state

    Returns:
        Hex payload digest
    """
    writer = RecordWriter(path, record.meta.seed, state_digest, record.meta.gain)
    try:
        writer.write(record)
    except Exception:
        writer._handle.close()
        raise
    return writer.close()


def read_header(path: PathLike) -> dict:
    path = Path(path)
    try:
        with open(path, 'rb') as f:
            raw = f.read(HEADER.size)
    except OSError as e:
        raise RecordFormatError(f"Cannot read {path}: {e}") from e
    if len(raw) != HEADER.size:
        raise RecordFormatError(f"{path} is too short to hold a record header")
    magic, version, convention, seed, state_digest, payload_digest, n_shots, gain = HEADER.unpack(raw)
    if magic != MAGIC:
        raise RecordFormatError(f"{path} is not a record file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise RecordFormatError(f"Unsupported record format version {version}")
    return {
        'convention': convention.rstrip(b'\0').decode('ascii', errors='replace'),
        'seed': seed,
        'state_digest': state_digest.hex(),
        'payload_digest': payload_digest.hex(),
        'n_shots': n_shots,
        'gain': gain,
    }


def _meta_from_header(path: Path, header: dict) -> RecordMeta:
    return RecordMeta(source=str(path), seed=header['seed'], n_requested=header['n_shots'],
                      convention=header['convention'], gain=header['gain'],
                      rescaled=header['gain'] != 1.0, state_digest=header['state_digest'])


def read_meta(path: PathLike) -> RecordMeta:
    """Record metadata from the file header alone"""
    return _meta_from_header(Path(path), read_header(path))


def iter_record_chunks(path: PathLike, chunk_shots: int = 1 << 20,
                       verify: bool = True) -> Iterator[MeasurementRecord]:
    """Read a record file chunk by chunk, verifying the payload digest at the end"""
    path = Path(path)
    header = read_header(path)
    meta = _meta_from_header(path, header)
    expected = header['n_shots'] * SHOT_DTYPE.itemsize
    if path.stat().st_size != HEADER.size + expected:
        raise RecordFormatError(
            f"{path} payload size mismatch: header declares {header['n_shots']} shots")
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        f.seek(HEADER.size)
        while True:
            raw = f.read(chunk_shots * SHOT_DTYPE.itemsize)
            if not raw:
                break
            digest.update(raw)
            yield _records_from_array(np.frombuffer(raw, dtype=SHOT_DTYPE), meta)
    if verify and digest.hexdigest() != header['payload_digest']:
        raise RecordFormatError(f"{path} payload digest mismatch")


def read_record(path: PathLike, verify: bool = True) -> MeasurementRecord:
    """
    Load a whole record file

    Args:
        path: Record file
        verify: Check the payload digest

    Returns:
        MeasurementRecord with metadata from the header
    """
    path = Path(path)
    header = read_header(path)
    chunks = list(iter_record_chunks(path, verify=verify))
    meta = _meta_from_header(path, header)
    if not chunks:
        return MeasurementRecord(np.empty(0, np.uint8), np.empty(0), np.empty(0), np.empty(0), meta)
    return MeasurementRecord.concatenate(chunks, meta=meta)


def payload_digest(path: PathLike) -> Optional[str]:
    return read_header(path)['payload_digest']
