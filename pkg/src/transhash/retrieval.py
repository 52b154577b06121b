"""Sign thresholding, packed Hamming distance and exhaustive Hamming ranking."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_types import CodeTable, Modality
from .network import Tower, forward
from .numerics import as_matrix


def pack_bits(bits) -> CodeTable:
    """Pack a boolean (n, b) array into 64-bit words, most significant bit first."""
    bits = np.asarray(bits, dtype=bool)
    if bits.ndim != 2 or bits.shape[1] < 1:
        raise ValueError(f"expected an (n, b) bit array with b >= 1, got shape {bits.shape}")
    n, b = bits.shape
    n_words = -(-b // 64)
    padded = np.zeros((n, n_words * 64), dtype=bool)
    padded[:, :b] = bits
    by = np.packbits(padded, axis=1, bitorder="big").reshape(n, n_words, 8)
    words = by.view(">u8").reshape(n, n_words).astype(np.uint64)
    return CodeTable(b, words)


def unpack_bits(table: CodeTable) -> np.ndarray:
    """Inverse of :func:`pack_bits`: boolean (n, b) array."""
    big = table.words.astype(">u8").view(np.uint8).reshape(len(table), -1)
    return np.unpackbits(big, axis=1, bitorder="big")[:, :table.bits].astype(bool)


def to_signs(table: CodeTable) -> np.ndarray:
    return np.where(unpack_bits(table), 1, -1).astype(np.int64)


def binarize(z) -> CodeTable:
    """h = sgn(z) with sgn(0) = -1, packed."""
    z = as_matrix(z, "z")
    if not np.all(np.isfinite(z)):
        raise ValueError("cannot binarize non-finite activations")
    return pack_bits(z > 0)


def encode(tower: Tower, features) -> CodeTable:
    return binarize(forward(tower, features).z)


def hamming_distance(a, b, bits: int) -> int:
    """Popcount of XOR over the significant bits of two packed codes (word arrays)."""
    a = np.atleast_1d(np.asarray(a, dtype=np.uint64))
    b = np.atleast_1d(np.asarray(b, dtype=np.uint64))
    n_words = -(-bits // 64)
    if a.shape != (n_words,) or b.shape != (n_words,):
        raise ValueError(f"code widths {a.shape} and {b.shape} do not match {bits} bits")
    return int(np.bitwise_count(a ^ b).sum())


def hamming_matrix(queries: CodeTable, database: CodeTable) -> np.ndarray:
    if queries.bits != database.bits:
        raise ValueError(f"code widths differ: {queries.bits} vs {database.bits} bits")
    x = queries.words[:, None, :] ^ database.words[None, :, :]
    return np.bitwise_count(x).sum(axis=2, dtype=np.int64)


@dataclass(frozen=True)
class HammingIndex:
    codes: CodeTable
    modality: Modality | None = None
    ids: tuple | None = None

    def __post_init__(self):
        if self.ids is not None and len(self.ids) != len(self.codes):
            raise ValueError("ids length differs from code count")

    def __len__(self) -> int:
        return len(self.codes)

    def item_id(self, pos: int):
        return pos if self.ids is None else self.ids[pos]


def rank_positions(queries: CodeTable, index: HammingIndex) -> tuple[np.ndarray, np.ndarray]:
    """Ranked database positions and distances for every query.

    Ordered by distance, ties broken by ascending database position.
    """
    d = hamming_matrix(queries, index.codes)
    order = np.argsort(d, axis=1, kind="stable")
    return order, np.take_along_axis(d, order, axis=1)


def rank_database(query_code, index: HammingIndex) -> list[tuple[object, int]]:
    """Full Hamming ranking of the index for one query as ``(item id, distance)``."""
    if len(index) == 0:
        return []
    words = np.atleast_2d(np.asarray(query_code, dtype=np.uint64))
    q = CodeTable(index.codes.bits, words)
    order, dist = rank_positions(q, index)
    return [(index.item_id(int(p)), int(dd)) for p, dd in zip(order[0], dist[0])]


def save_codes(table: CodeTable, path) -> None:
    rows = unpack_bits(table)
    lines = [f"{len(table)} {table.bits}"]
    lines.extend("".join("1" if v else "0" for v in r) for r in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def load_codes(path) -> CodeTable:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty code file")
    head = lines[0].split()
    try:
        n, b = (int(v) for v in head)
    except ValueError:
        raise ValueError(f"{path}: line 1 must be 'n b', got {lines[0]!r}") from None
    if n < 0 or b < 1:
        raise ValueError(f"{path}: invalid header {lines[0]!r}")
    body = lines[1:]
    while body and not body[-1].strip() and len(body) > n:
        body.pop()
    if len(body) != n:
        raise ValueError(f"{path}: header declares {n} codes, found {len(body)}")
    bits = np.zeros((n, b), dtype=bool)
    for r, line in enumerate(body):
        line = line.strip()
        if len(line) != b or set(line) - {"0", "1"}:
            raise ValueError(f"{path}: line {r + 2} is not a {b}-character 0/1 string")
        bits[r] = np.frombuffer(line.encode(), dtype=np.uint8) == ord("1")
    if n == 0:
        return CodeTable(b, np.zeros((0, -(-b // 64)), dtype=np.uint64))
    return pack_bits(bits)
