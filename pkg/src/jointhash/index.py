"""Packed-bit code table with exact Hamming-distance ranking.

Distances are computed by XOR + popcount over 64-bit words. Pad bits beyond
the code length are zero by construction (enforced when the table is built),
so the inner loop needs no masking.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError
from .model import WORD_BITS, packed_words

TABLE_MAGIC = b"HTBL"
TABLE_VERSION = 1
_TABLE_HEADER = struct.Struct("<4sHII")

_U32_MAX = 2**32 - 1


def _pad_is_zero(codes: np.ndarray, bits: int) -> bool:
    rem = bits % WORD_BITS
    if rem == 0 or codes.size == 0:
        return True
    used = np.uint64((1 << rem) - 1)
    pad = codes[:, -1] & ~used
    return not np.any(pad)


@dataclass
class CodeTable:
    """Parallel arrays of packed codes, item ids, and labels."""

    codes: np.ndarray
    ids: np.ndarray
    labels: np.ndarray
    predicted: np.ndarray
    code_bits: int

    def __post_init__(self):
        self.codes = np.ascontiguousarray(self.codes, dtype=np.uint64)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.predicted = np.asarray(self.predicted, dtype=np.int64)
        if self.codes.ndim != 2:
            raise DimensionError("codes must be a 2-D array of packed words")
        n = self.codes.shape[0]
        if not (self.ids.shape == self.labels.shape == self.predicted.shape == (n,)):
            raise DimensionError("ids, labels, and predicted must have one row per code")
        if self.codes.shape[1] != packed_words(self.code_bits):
            raise DimensionError(
                f"{self.codes.shape[1]} words cannot hold {self.code_bits}-bit codes"
            )
        if not _pad_is_zero(self.codes, self.code_bits):
            raise ValueError("pad bits beyond the code length must be zero")

    def __len__(self) -> int:
        return self.codes.shape[0]


@dataclass
class Ranking:
    """rank_all output: parallel arrays sorted by ascending distance."""

    ids: np.ndarray
    distances: np.ndarray
    labels: np.ndarray
    predicted: np.ndarray
    order: np.ndarray

    def __len__(self) -> int:
        return self.ids.shape[0]

    def head(self, k: int) -> "Ranking":
        return Ranking(self.ids[:k], self.distances[:k], self.labels[:k],
                       self.predicted[:k], self.order[:k])


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Number of disagreeing bit positions between two packed codes."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    if a.shape != b.shape:
        raise DimensionError(f"packed codes differ in shape: {a.shape} vs {b.shape}")
    return int(np.bitwise_count(a ^ b).sum())


def _distances(query: np.ndarray, codes: np.ndarray) -> np.ndarray:
    q = np.asarray(query, dtype=np.uint64)
    if q.shape != (codes.shape[1],):
        raise DimensionError(
            f"query has {q.shape[-1] if q.ndim else 0} words, table rows have "
            f"{codes.shape[1]}"
        )
    return np.bitwise_count(codes ^ q).sum(axis=1, dtype=np.int64)


def rank_all(query: np.ndarray, table: CodeTable) -> Ranking:
    """Every table item ordered by ascending distance; ties keep table order."""
    d = _distances(query, table.codes)
    order = np.argsort(d, kind="stable")
    return Ranking(
        ids=table.ids[order],
        distances=d[order],
        labels=table.labels[order],
        predicted=table.predicted[order],
        order=order,
    )


def radius_search(query: np.ndarray, table: CodeTable, radius: int) -> set[int]:
    """Ids of all items within the given Hamming radius."""
    if not 0 <= radius <= table.code_bits:
        raise ValueError(
            f"radius must lie in [0, {table.code_bits}], got {radius}"
        )
    d = _distances(query, table.codes)
    return set(table.ids[d <= radius].tolist())


def top_k(query: np.ndarray, table: CodeTable, k: int) -> Ranking:
    """First k entries of rank_all."""
    if not 1 <= k <= len(table):
        raise ValueError(f"k must lie in [1, {len(table)}], got {k}")
    return rank_all(query, table).head(k)


def save_code_table(table: CodeTable, path) -> None:
    for name, arr in (("ids", table.ids), ("labels", table.labels),
                      ("predicted", table.predicted)):
        if arr.size and (arr.min() < 0 or arr.max() > _U32_MAX):
            raise ValueError(f"{name} must fit in unsigned 32-bit integers")
    blob = bytearray()
    blob += _TABLE_HEADER.pack(TABLE_MAGIC, TABLE_VERSION, len(table),
                               table.code_bits)
    blob += np.ascontiguousarray(table.codes, dtype="<u8").tobytes()
    for arr in (table.ids, table.labels, table.predicted):
        blob += arr.astype("<u4").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_code_table(path) -> CodeTable:
    raw = Path(path).read_bytes()
    if len(raw) < _TABLE_HEADER.size:
        raise FormatError(f"{path}: truncated code-table header")
    magic, version, n, bits = _TABLE_HEADER.unpack_from(raw, 0)
    if magic != TABLE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != TABLE_VERSION:
        raise FormatError(f"{path}: unsupported code-table version {version}")
    words = packed_words(bits)
    expected = _TABLE_HEADER.size + 8 * n * words + 3 * 4 * n
    if len(raw) != expected:
        raise FormatError(
            f"{path}: file length {len(raw)} does not match header "
            f"(expected {expected} bytes)"
        )
    offset = _TABLE_HEADER.size
    codes = np.frombuffer(raw, dtype="<u8", count=n * words,
                          offset=offset).reshape(n, words).copy()
    offset += 8 * n * words
    u32 = []
    for _ in range(3):
        u32.append(np.frombuffer(raw, dtype="<u4", count=n,
                                 offset=offset).astype(np.int64))
        offset += 4 * n
    return CodeTable(codes=codes, ids=u32[0], labels=u32[1], predicted=u32[2],
                     code_bits=bits)
