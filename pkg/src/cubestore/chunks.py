"""Chunk-offset compression.

The array is cut into rectangular chunks. A chunk whose density exceeds the
threshold is stored dense (every slot plus a one-bit emptiness mask); every
other chunk keeps only ``(offsetInChunk, value)`` pairs. Offsets use the same
dimension-1-fastest linearization as the whole array, restricted to the
chunk's own (possibly truncated) shape.

Chunks holding no cell are not materialized; :meth:`ChunkStore.chunk`
returns an empty sparse chunk for them.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from math import prod
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import DomainError
from .relation import EncodedRelation, RelationSchema, delinearize_many, linearize

DEFAULT_EDGE = 16
DEFAULT_THRESHOLD = Fraction(2, 5)


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass(frozen=True)
class ChunkSpec:
    shape: tuple[int, ...]
    chunk_shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(c) for c in self.shape))
        object.__setattr__(self, "chunk_shape", tuple(int(e) for e in self.chunk_shape))
        if len(self.shape) != len(self.chunk_shape):
            raise DomainError("chunk shape must have one edge per dimension")
        for c, e in zip(self.shape, self.chunk_shape):
            if not 1 <= e <= c:
                raise DomainError(f"chunk edge {e} outside [1, {c}]")

    @classmethod
    def default(cls, shape: Sequence[int], edge: int = DEFAULT_EDGE) -> "ChunkSpec":
        return cls(tuple(shape), tuple(min(edge, c) for c in shape))

    @property
    def grid(self) -> tuple[int, ...]:
        return tuple(-(-c // e) for c, e in zip(self.shape, self.chunk_shape))

    @property
    def chunk_count(self) -> int:
        return prod(self.grid)

    @property
    def max_slots(self) -> int:
        return prod(self.chunk_shape)

    def chunk_dims(self, chunk_id: int) -> tuple[int, ...]:
        """True shape of a chunk, truncated at the array border."""
        out = []
        for c, e, g in zip(self.shape, self.chunk_shape, self.grid):
            chunk_id, gi = divmod(chunk_id, g)
            out.append(min(e, c - gi * e))
        return tuple(out)


@dataclass(eq=False)
class DenseChunk:
    dims: tuple[int, ...]
    values: np.ndarray  # one slot per cell, zero where empty
    mask: np.ndarray  # bool, True where nonempty

    @property
    def slots(self) -> int:
        return int(self.values.size)

    @property
    def nonempty(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __post_init__(self):
        self._v, self._m = memoryview(self.values), memoryview(self.mask)

    def get(self, offset: int):
        return self._v[offset] if self._m[offset] else None

    def nbytes(self, offset_width: int) -> int:
        return self.slots * self.values.dtype.itemsize + (self.slots + 7) // 8


@dataclass(eq=False)
class SparseChunk:
    dims: tuple[int, ...]
    offsets: np.ndarray
    values: np.ndarray

    @property
    def slots(self) -> int:
        return prod(self.dims)

    @property
    def nonempty(self) -> int:
        return int(self.offsets.size)

    def __post_init__(self):
        self._o, self._v = memoryview(self.offsets), memoryview(self.values)

    def get(self, offset: int):
        i = bisect_left(self._o, offset)
        if i < len(self._o) and self._o[i] == offset:
            return self._v[i]
        return None

    def nbytes(self, offset_width: int) -> int:
        return self.nonempty * (offset_width + self.values.dtype.itemsize)


Chunk = Union[DenseChunk, SparseChunk]


def offset_width_for(slots: int) -> int:
    for w in (1, 2, 4):
        if slots - 1 < 2 ** (8 * w):
            return w
    raise DomainError(f"chunk of {slots} slots needs offsets wider than 4 bytes")


@dataclass(eq=False)
class ChunkStore:
    schema: RelationSchema
    spec: ChunkSpec
    chunks: dict[int, Chunk]
    threshold: Fraction = DEFAULT_THRESHOLD
    offset_width: int = field(init=False)

    def __post_init__(self):
        self.threshold = _as_fraction(self.threshold)
        self.offset_width = offset_width_for(self.spec.max_slots)

    def chunk(self, chunk_id: int) -> Chunk:
        if not 0 <= chunk_id < self.spec.chunk_count:
            raise DomainError(f"chunk id {chunk_id} out of range")
        hit = self.chunks.get(chunk_id)
        if hit is None:
            dt = self.schema.measure.dtype
            return SparseChunk(self.spec.chunk_dims(chunk_id), np.empty(0, np.uint32), np.empty(0, dt))
        return hit

    def locate(self, idx: Sequence[int]) -> tuple[int, int]:
        """(chunk id, offset in chunk) of a multidimensional index."""
        linearize(idx, self.schema)  # range check
        cid, off = 0, 0
        stride_c, stride_o = 1, 1
        for j, (i, c, e, g) in enumerate(zip(idx, self.spec.shape, self.spec.chunk_shape, self.spec.grid)):
            gi, r = divmod(int(i), e)
            cid += gi * stride_c
            off += r * stride_o
            stride_c *= g
            stride_o *= min(e, c - gi * e)
        return cid, off

    def lookup(self, idx: Sequence[int]):
        cid, off = self.locate(idx)
        hit = self.chunks.get(cid)
        return None if hit is None else hit.get(off)

    def is_dense(self, chunk: Chunk) -> bool:
        return chunk.nonempty * self.threshold.denominator > self.threshold.numerator * chunk.slots

    @property
    def nbytes(self) -> int:
        return sum(c.nbytes(self.offset_width) for c in self.chunks.values())


def _chunk_coordinates(coords: np.ndarray, spec: ChunkSpec):
    edges = np.asarray(spec.chunk_shape, dtype=np.int64)
    shape = np.asarray(spec.shape, dtype=np.int64)
    gcoord, inner = np.divmod(coords, edges)
    true_dims = np.minimum(edges, shape - gcoord * edges)
    cid = np.zeros(coords.shape[0], dtype=np.int64)
    off = np.zeros(coords.shape[0], dtype=np.int64)
    sc, so = 1, np.ones(coords.shape[0], dtype=np.int64)
    for j, g in enumerate(spec.grid):
        cid += gcoord[:, j] * sc
        off += inner[:, j] * so
        sc *= g
        so = so * true_dims[:, j]
    return cid, off


def build_chunks(rel: EncodedRelation, spec: ChunkSpec | None = None, threshold=DEFAULT_THRESHOLD) -> ChunkStore:
    schema = rel.schema
    spec = spec or ChunkSpec.default(schema.shape)
    if spec.shape != schema.shape:
        raise DomainError(f"chunk spec shape {spec.shape} does not match schema {schema.shape}")
    threshold = _as_fraction(threshold)
    cid, off = _chunk_coordinates(rel.coords(), spec)
    order = np.lexsort((off, cid))
    cid, off, vals = cid[order], off[order], rel.values[order]
    bounds = np.flatnonzero(np.diff(cid)) + 1
    store = ChunkStore(schema, spec, {}, threshold)
    owidth = np.dtype(f"<u{store.offset_width}")
    for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, cid.size]):
        if lo == hi:
            continue
        c = int(cid[lo])
        dims = spec.chunk_dims(c)
        slots = prod(dims)
        count = int(hi - lo)
        if count * threshold.denominator > threshold.numerator * slots:
            values = np.zeros(slots, dtype=vals.dtype)
            mask = np.zeros(slots, dtype=bool)
            values[off[lo:hi]] = vals[lo:hi]
            mask[off[lo:hi]] = True
            store.chunks[c] = DenseChunk(dims, values, mask)
        else:
            store.chunks[c] = SparseChunk(dims, off[lo:hi].astype(owidth), vals[lo:hi].copy())
    return store


class ChunkStat(NamedTuple):
    chunk_id: int
    dense: bool
    slots: int
    nonempty: int
    density: Fraction
    nbytes: int


class ChunkSummary(NamedTuple):
    chunks: list[ChunkStat]
    empty_chunks: int
    nonempty: int
    nbytes: int
    dense_slots: int
    dense_nonempty: int


def chunk_stats(store: ChunkStore) -> ChunkSummary:
    """Per stored chunk: density and bytes; plus totals. Empty chunks cost nothing."""
    rows = []
    for cid in sorted(store.chunks):
        ch = store.chunks[cid]
        rows.append(
            ChunkStat(
                cid,
                isinstance(ch, DenseChunk),
                ch.slots,
                ch.nonempty,
                Fraction(ch.nonempty, ch.slots),
                ch.nbytes(store.offset_width),
            )
        )
    dense = [r for r in rows if r.dense]
    return ChunkSummary(
        rows,
        store.spec.chunk_count - len(rows),
        sum(r.nonempty for r in rows),
        sum(r.nbytes for r in rows),
        sum(r.slots for r in dense),
        sum(r.nonempty for r in dense),
    )


def lookup_all(store: ChunkStore, positions: np.ndarray):
    """Vectorized lookup of logical positions: (values, found mask)."""
    coords = delinearize_many(positions, store.schema)
    cid, off = _chunk_coordinates(coords, store.spec)
    vals = np.zeros(positions.size, dtype=store.schema.measure.dtype)
    found = np.zeros(positions.size, dtype=bool)
    order = np.argsort(cid, kind="stable")
    scid = cid[order]
    bounds = np.flatnonzero(np.diff(scid)) + 1
    for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, scid.size]):
        if lo == hi:
            continue
        ch = store.chunks.get(int(scid[lo]))
        if ch is None:
            continue
        sel = order[lo:hi]
        o = off[sel]
        if isinstance(ch, DenseChunk):
            found[sel] = ch.mask[o]
            vals[sel] = ch.values[o]
        else:
            i = np.searchsorted(ch.offsets, o)
            ok = i < ch.offsets.size
            ok[ok] = ch.offsets[i[ok]] == o[ok]
            found[sel] = ok
            vals[sel[ok]] = ch.values[i[ok]]
    vals[~found] = 0
    return vals, found
