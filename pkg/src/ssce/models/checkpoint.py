"""Binary checkpoint format and transfer-learning initialization.

Layout (all integers little-endian)::

    b"SSCE" | u32 version | u32 meta_len | meta (UTF-8 JSON) | u32 n_records
    n_records x ( u16 name_len | name | u8 dtype_bytes (4 or 8) | u8 ndim
                  | ndim x u32 dim | u64 count | count x float )
    u32 crc32 of every preceding byte

Values are stored as float64 by default, which makes a save/load round trip
bit-exact; ``precision="f32"`` halves the file size and widens on load.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"SSCE"
VERSION = 1
OPTIM_PREFIX = "optim/"


class CheckpointError(Exception):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CorruptRecordError(CheckpointError):
    pass


class ChecksumMismatchError(CheckpointError):
    pass


class TransferError(Exception):
    pass


@dataclass
class Checkpoint:
    arch_id: str
    records: dict[str, np.ndarray]
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    version: int = VERSION


def _encode_record(name: str, arr: np.ndarray, dtype: str) -> bytes:
    raw = name.encode("utf-8")
    arr = np.asarray(arr, dtype=np.float64)
    head = struct.pack("<H", len(raw)) + raw
    head += struct.pack("<BB", 8 if dtype == "f8" else 4, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    head += struct.pack("<Q", arr.size)
    return head + arr.astype("<" + dtype).tobytes()


def save_checkpoint(
    model,
    path,
    optimizer=None,
    metadata: dict | None = None,
    precision: str = "f64",
) -> None:
    """Write ``model``'s parameters and buffers (and optional optimizer state)."""
    dtype = {"f64": "f8", "f32": "f4"}[precision]
    records = list(model.state_dict().items())
    if optimizer is not None:
        records += [(OPTIM_PREFIX + k, v) for k, v in optimizer.state_arrays().items()]
    meta = {"arch_id": model.arch_id, "metadata": metadata or {}}
    if optimizer is not None:
        meta["optimizer"] = optimizer.kind
    meta_raw = json.dumps(meta, sort_keys=True).encode("utf-8")
    body = MAGIC + struct.pack("<II", VERSION, len(meta_raw)) + meta_raw + struct.pack("<I", len(records))
    body += b"".join(_encode_record(n, a, dtype) for n, a in records)
    body += struct.pack("<I", zlib.crc32(body))
    Path(path).write_bytes(body)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptRecordError(f"truncated file while reading {what} at byte {self.pos}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise CorruptRecordError(f"{path}: not a checkpoint (bad magic)")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {VERSION}")
    (meta_len,) = r.unpack("<I", "metadata length")
    try:
        meta = json.loads(r.take(meta_len, "metadata").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptRecordError(f"{path}: unreadable metadata ({exc})") from None
    (n_records,) = r.unpack("<I", "record count")
    records: dict[str, np.ndarray] = {}
    optim: dict[str, np.ndarray] = {}
    for i in range(n_records):
        (name_len,) = r.unpack("<H", f"record {i} name length")
        try:
            name = r.take(name_len, f"record {i} name").decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptRecordError(f"record {i}: name is not UTF-8") from None
        width, ndim = r.unpack("<BB", f"record '{name}' header")
        if width not in (4, 8):
            raise CorruptRecordError(f"record '{name}': unknown value width {width}")
        shape = r.unpack(f"<{ndim}I", f"record '{name}' shape")
        (count,) = r.unpack("<Q", f"record '{name}' length")
        if count != int(np.prod(shape, dtype=np.int64)):
            raise CorruptRecordError(f"record '{name}': {count} values do not fill shape {shape}")
        raw = r.take(count * width, f"record '{name}' values")
        arr = np.frombuffer(raw, dtype="<f8" if width == 8 else "<f4").astype(np.float64).reshape(shape)
        target = optim if name.startswith(OPTIM_PREFIX) else records
        key = name[len(OPTIM_PREFIX) :] if target is optim else name
        if key in target:
            raise CorruptRecordError(f"duplicate record name '{name}'")
        target[key] = arr
    body_end = r.pos
    (crc,) = r.unpack("<I", "checksum")
    if r.pos != len(buf):
        raise CorruptRecordError(f"{len(buf) - r.pos} trailing bytes after checksum")
    if zlib.crc32(buf[:body_end]) != crc:
        raise ChecksumMismatchError(f"{path}: checksum mismatch")
    return Checkpoint(meta.get("arch_id", ""), records, optim, meta.get("metadata", {}), version)


def apply_checkpoint(model, ckpt: Checkpoint) -> None:
    """Load every record into ``model``; architectures must match exactly."""
    if ckpt.arch_id != model.arch_id:
        raise CheckpointError(f"architecture mismatch: checkpoint '{ckpt.arch_id}' vs model '{model.arch_id}'")
    model.load_state_dict(ckpt.records, strict=True)


@dataclass
class TransferReport:
    copied: list[str]
    skipped: list[tuple[str, str]]

    @property
    def skipped_names(self) -> list[str]:
        return [n for n, _ in self.skipped]


def transfer_init(model, source: Checkpoint, allow_empty: bool = False) -> TransferReport:
    """Copy every source record whose name and shape match a target entry.

    Target entries without a match keep their fresh initialization and are
    listed in ``skipped`` together with the reason.
    """
    params = dict(model.named_parameters())
    buffers = dict(model.named_buffers())
    copied, skipped = [], []
    for name in list(params) + list(buffers):
        target = params[name].data if name in params else buffers[name]
        src = source.records.get(name)
        if src is None:
            skipped.append((name, "absent in source"))
        elif src.shape != target.shape:
            skipped.append((name, f"shape {src.shape} != {target.shape}"))
        else:
            copied.append(name)
    if not copied and not allow_empty:
        raise TransferError(
            f"no parameter of '{model.arch_id}' matches source '{source.arch_id}' by name and shape"
        )
    for name in copied:
        target = params[name].data if name in params else buffers[name]
        target[...] = source.records[name]
    return TransferReport(copied, skipped)
