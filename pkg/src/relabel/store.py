"""Single-file binary container for sparse label maps, with random access.

Layout (all integers little-endian):

    magic "RLBL" | u16 version=1 | u8 quant | u8 value_mode
    | u16 H | u16 W | u32 C | u16 k | u64 record_count
    manifest: record_count * (u16 id_len | id UTF-8 | u64 offset | u64 length)
    records:  per pixel in row-major order, k*u16 class indices
              followed by k quantized values

Offsets are absolute file positions. The reader memory-maps the file, so any
number of concurrent readers can share one open store; writing is a one-shot
exclusive operation (no appends).
"""

from __future__ import annotations

import mmap
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import FormatError, UnknownImageError
from .quant import values_from_wire, values_to_wire
from .types import QuantFormat, SparseLabelMap, ValueMode

__all__ = [
    "LabelStore",
    "read_store",
    "write_store",
    "storage_cost",
    "StorageCost",
    "STORE_MAGIC",
    "STORE_VERSION",
    "STORE_HEADER_BYTES",
    "MANIFEST_ENTRY_FIXED_BYTES",
    "CLASS_INDEX_BYTES",
]

STORE_MAGIC = b"RLBL"
STORE_VERSION = 1

_HEADER = struct.Struct("<4sHBBHHIHQ")
_MANIFEST_TAIL = struct.Struct("<QQ")
_ID_LEN = struct.Struct("<H")

STORE_HEADER_BYTES = _HEADER.size  # 26
MANIFEST_ENTRY_FIXED_BYTES = _ID_LEN.size + _MANIFEST_TAIL.size  # 18 + id bytes
CLASS_INDEX_BYTES = 2  # u16 class indices


def _record_nbytes(height: int, width: int, k: int, quant: QuantFormat) -> int:
    return height * width * k * (CLASS_INDEX_BYTES + quant.value_bytes)


def _encode_record(m: SparseLabelMap) -> bytes:
    pixels = m.height * m.width
    idx = np.ascontiguousarray(m.indices, dtype="<u2").view(np.uint8).reshape(pixels, -1)
    val = values_to_wire(m.values, m.quant).reshape(pixels, -1)
    return np.hstack([idx, val]).tobytes()


class LabelStore:
    """Read-only, memory-mapped access to a label-map store file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._file = open(self.path, "rb")
        try:
            self._mmap = mmap.mmap(self._file.fileno(), 0, access=mmap.ACCESS_READ)
        except ValueError:
            self._file.close()
            raise FormatError(f"{self.path}: empty or unreadable file") from None
        try:
            self._parse()
        except Exception:
            self.close()
            raise

    def _parse(self) -> None:
        buf = self._mmap
        if len(buf) < STORE_HEADER_BYTES:
            raise FormatError(f"{self.path}: truncated header")
        magic, version, quant_code, mode_code, h, w, c, k, count = _HEADER.unpack_from(buf, 0)
        if magic != STORE_MAGIC:
            raise FormatError(f"{self.path}: bad magic {magic!r}")
        if version != STORE_VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")
        try:
            self.quant = QuantFormat(quant_code)
            self.value_mode = ValueMode(mode_code)
        except ValueError:
            raise FormatError(f"{self.path}: unknown quant/value-mode code") from None
        if h < 1 or w < 1 or c < 1 or not 1 <= k <= c:
            raise FormatError(f"{self.path}: inconsistent dimensions H={h} W={w} C={c} k={k}")
        self.height, self.width, self.num_classes, self.k = h, w, c, k

        expected = _record_nbytes(h, w, k, self.quant)
        pos = STORE_HEADER_BYTES
        index: dict[str, tuple[int, int]] = {}
        ids: list[str] = []
        prev_end = 0
        for _ in range(count):
            if pos + _ID_LEN.size > len(buf):
                raise FormatError(f"{self.path}: truncated manifest")
            (id_len,) = _ID_LEN.unpack_from(buf, pos)
            pos += _ID_LEN.size
            if pos + id_len + _MANIFEST_TAIL.size > len(buf):
                raise FormatError(f"{self.path}: truncated manifest")
            try:
                image_id = bytes(buf[pos : pos + id_len]).decode("utf-8")
            except UnicodeDecodeError:
                raise FormatError(f"{self.path}: manifest id is not valid UTF-8") from None
            pos += id_len
            offset, length = _MANIFEST_TAIL.unpack_from(buf, pos)
            pos += _MANIFEST_TAIL.size
            if image_id in index:
                raise FormatError(f"{self.path}: duplicate image id {image_id!r}")
            if length != expected:
                raise FormatError(
                    f"{self.path}: record length {length} != expected {expected} for {image_id!r}"
                )
            if offset < pos or offset + length > len(buf) or offset < prev_end:
                raise FormatError(f"{self.path}: record for {image_id!r} out of bounds or overlapping")
            prev_end = offset + length
            index[image_id] = (offset, length)
            ids.append(image_id)
        self._index = index
        self._ids = ids

    @property
    def image_ids(self) -> Sequence[str]:
        return tuple(self._ids)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self._ids)

    def get_map(self, image_id: str) -> SparseLabelMap:
        """Decode one record; random access, no other record is touched.

        The returned map owns its data and stays valid after close().
        """
        if self._mmap is None:
            raise ValueError("store handle is closed")
        try:
            offset, length = self._index[image_id]
        except KeyError:
            raise UnknownImageError(f"image id {image_id!r} not in store {self.path}") from None
        raw = np.frombuffer(self._mmap, dtype=np.uint8, count=length, offset=offset)
        pixels = self.height * self.width
        per_pixel = self.k * (CLASS_INDEX_BYTES + self.quant.value_bytes)
        rec = raw.reshape(pixels, per_pixel)
        idx_bytes = self.k * CLASS_INDEX_BYTES
        indices = (
            np.ascontiguousarray(rec[:, :idx_bytes])
            .view("<u2")
            .reshape(self.height, self.width, self.k)
            .astype(np.uint16)
        )
        values = values_from_wire(np.ascontiguousarray(rec[:, idx_bytes:]).reshape(-1), self.quant)
        return SparseLabelMap(
            indices=indices,
            values=values.reshape(self.height, self.width, self.k),
            num_classes=self.num_classes,
            quant=self.quant,
            value_mode=self.value_mode,
        )

    def close(self) -> None:
        if getattr(self, "_mmap", None) is not None:
            self._mmap.close()
            self._mmap = None  # type: ignore[assignment]
        if getattr(self, "_file", None) is not None:
            self._file.close()
            self._file = None  # type: ignore[assignment]

    def __enter__(self) -> "LabelStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def read_store(path: str | Path) -> LabelStore:
    return LabelStore(path)


def write_store(maps: Iterable[tuple[str, SparseLabelMap]], path: str | Path) -> LabelStore:
    """Write (image_id, map) pairs to a new store file and reopen it.

    All maps must share H, W, C, k, quant, and value mode; ids must be
    unique. Existing files are replaced atomically (write + rename).
    """
    items = list(maps)
    if not items:
        raise ValueError("cannot write an empty store")
    first = items[0][1]
    shape = (first.height, first.width, first.num_classes, first.k, first.quant, first.value_mode)
    seen: set[str] = set()
    for image_id, m in items:
        if (m.height, m.width, m.num_classes, m.k, m.quant, m.value_mode) != shape:
            raise ValueError(f"heterogeneous map shape/format for image {image_id!r}")
        if image_id in seen:
            raise ValueError(f"duplicate image id {image_id!r}")
        seen.add(image_id)

    h, w, c, k, quant, mode = shape
    id_blobs = [image_id.encode("utf-8") for image_id, _ in items]
    for image_id, blob in zip((i for i, _ in items), id_blobs):
        if len(blob) > 0xFFFF:
            raise ValueError(f"image id too long: {image_id!r}")

    record_len = _record_nbytes(h, w, k, quant)
    manifest_len = sum(MANIFEST_ENTRY_FIXED_BYTES + len(b) for b in id_blobs)
    offset = STORE_HEADER_BYTES + manifest_len

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(
            _HEADER.pack(
                STORE_MAGIC, STORE_VERSION, int(quant), int(mode), h, w, c, k, len(items)
            )
        )
        for blob in id_blobs:
            f.write(_ID_LEN.pack(len(blob)))
            f.write(blob)
            f.write(_MANIFEST_TAIL.pack(offset, record_len))
            offset += record_len
        for _, m in items:
            f.write(_encode_record(m))
    tmp.replace(path)
    return read_store(path)


@dataclass(frozen=True)
class StorageCost:
    """Exact byte arithmetic for a label-map layout."""

    payload_bytes: int
    overhead_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.payload_bytes + self.overhead_bytes


def storage_cost(
    num_images: int,
    height: int,
    width: int,
    *,
    quant: QuantFormat,
    num_classes: int | None = None,
    top_k: int | None = None,
    id_bytes: int = 16,
) -> StorageCost:
    """Bytes needed to hold label maps for a dataset.

    Dense layout (``num_classes`` given): a raw value array, no container,
    payload = N*H*W*C*bytes(quant) and zero overhead. Sparse layout
    (``top_k`` given): per pixel k u16 indices plus k values, payload =
    N*H*W*k*(bytes(quant)+2); overhead = the 26-byte store header plus one
    manifest entry (18 bytes + assumed id length) per image. Python
    integers are unbounded, so the arithmetic is exact at any scale.
    """
    if num_images < 1 or height < 1 or width < 1:
        raise ValueError("counts must be positive")
    if (num_classes is None) == (top_k is None):
        raise ValueError("give exactly one of num_classes (dense) or top_k (sparse)")
    if num_classes is not None:
        if num_classes < 1:
            raise ValueError("num_classes must be positive")
        payload = num_images * height * width * num_classes * quant.value_bytes
        return StorageCost(payload_bytes=payload, overhead_bytes=0)
    assert top_k is not None
    if top_k < 1:
        raise ValueError("top_k must be positive")
    payload = num_images * height * width * top_k * (quant.value_bytes + CLASS_INDEX_BYTES)
    overhead = STORE_HEADER_BYTES + num_images * (MANIFEST_ENTRY_FIXED_BYTES + id_bytes)
    return StorageCost(payload_bytes=payload, overhead_bytes=overhead)
