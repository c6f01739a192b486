"""Relations, schemas, dictionary encoding and array linearization.

A relation over dimensions D_1..D_k is stored as the sorted list of its
nonempty cells, each identified by a 0-based one-dimensional index L.
Dimension 1 varies fastest::

    L = i_1 + c_1 * (i_2 + c_2 * (i_3 + ...))

A 1-based coordinate ``i`` is ``i - 1`` here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, IntegrityError, SchemaError

#: Width in bytes of a one-dimensional index.
INDEX_WIDTH = 8
MAX_TOTAL_CELLS = 2**63

_DTYPES = {
    ("integer", 8): np.dtype("<i8"),
    ("integer", 4): np.dtype("<i4"),
    ("real", 8): np.dtype("<f8"),
    ("real", 4): np.dtype("<f4"),
}


@dataclass(frozen=True)
class Dimension:
    name: str
    cardinality: int


@dataclass(frozen=True)
class Measure:
    name: str = "measure"
    width: int = 8
    kind: str = "integer"

    def __post_init__(self):
        if (self.kind, self.width) not in _DTYPES:
            raise SchemaError(
                f"unsupported measure {self.kind!r} of width {self.width}; "
                "kind must be 'integer' or 'real' and width 4 or 8"
            )

    @property
    def dtype(self) -> np.dtype:
        return _DTYPES[(self.kind, self.width)]


@dataclass(frozen=True)
class RelationSchema:
    """Dimension list plus measure. Every dimension is a key dimension."""

    dims: tuple[Dimension, ...]
    measure: Measure = Measure()

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if not self.dims:
            raise SchemaError("a schema needs at least one dimension")
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise SchemaError(f"dimension names must be unique: {names}")
        for d in self.dims:
            if int(d.cardinality) < 1:
                raise SchemaError(f"dimension {d.name!r} has cardinality {d.cardinality} < 1")
        if self.total_cells >= MAX_TOTAL_CELLS:
            raise SchemaError(
                f"total cell count {self.total_cells} does not fit an "
                f"{INDEX_WIDTH}-byte one-dimensional index"
            )

    @classmethod
    def from_shape(cls, shape: Sequence[int], measure: Measure = Measure(), names=None):
        names = names or [f"d{j + 1}" for j in range(len(shape))]
        return cls(tuple(Dimension(n, int(c)) for n, c in zip(names, shape)), measure)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(d.cardinality for d in self.dims)

    @property
    def k(self) -> int:
        return len(self.dims)

    @property
    def total_cells(self) -> int:
        return prod(d.cardinality for d in self.dims)

    @property
    def strides(self) -> tuple[int, ...]:
        out, acc = [], 1
        for c in self.shape:
            out.append(acc)
            acc *= c
        return tuple(out)


def linearize(idx: Sequence[int], schema: RelationSchema) -> int:
    """Map a 0-based multidimensional index to its one-dimensional index."""
    shape = schema.shape
    if len(idx) != len(shape):
        raise DomainError(f"index has {len(idx)} coordinates, schema has {len(shape)} dimensions")
    L = 0
    for j in range(len(shape) - 1, -1, -1):
        i = int(idx[j])
        if not 0 <= i < shape[j]:
            raise DomainError(
                f"coordinate {i} out of range [0, {shape[j]}) for dimension {schema.dims[j].name!r}"
            )
        L = L * shape[j] + i
    return L


def delinearize(L: int, schema: RelationSchema) -> tuple[int, ...]:
    """Inverse of :func:`linearize`."""
    L = int(L)
    if not 0 <= L < schema.total_cells:
        raise DomainError(f"one-dimensional index {L} out of range [0, {schema.total_cells})")
    out = []
    for c in schema.shape:
        L, i = divmod(L, c)
        out.append(i)
    return tuple(out)


def linearize_many(coords: np.ndarray, schema: RelationSchema) -> np.ndarray:
    """Vectorized :func:`linearize` over an ``(n, k)`` array of coordinates."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim != 2 or coords.shape[1] != schema.k:
        raise DomainError(f"expected an (n, {schema.k}) coordinate array, got {coords.shape}")
    shape = np.asarray(schema.shape, dtype=np.int64)
    bad = (coords < 0) | (coords >= shape)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DomainError(
            f"coordinate {coords[row, col]} out of range [0, {shape[col]}) "
            f"for dimension {schema.dims[col].name!r}"
        )
    return coords @ np.asarray(schema.strides, dtype=np.int64)


def delinearize_many(positions: np.ndarray, schema: RelationSchema) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size and (positions.min() < 0 or positions.max() >= schema.total_cells):
        raise DomainError("one-dimensional index out of range")
    out = np.empty((positions.size, schema.k), dtype=np.int64)
    rest = positions.copy()
    for j, c in enumerate(schema.shape):
        rest, out[:, j] = np.divmod(rest, c)
    return out


@dataclass(frozen=True)
class EncodedRelation:
    """Dictionary-encoded relation: nonempty cells sorted by one-dimensional index.

    ``dictionaries[j][i]`` is the raw value with ordinal ``i`` in dimension j.
    A dictionary may be shorter than its cardinality when the schema declares
    members that never occur in the data.
    """

    schema: RelationSchema
    dictionaries: tuple[tuple, ...]
    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=self.schema.measure.dtype)
        if pos.ndim != 1 or vals.shape != pos.shape:
            raise SchemaError("positions and values must be 1-d arrays of equal length")
        if pos.size:
            if pos[0] < 0 or pos[-1] >= self.schema.total_cells:
                raise DomainError("one-dimensional index out of range")
            if pos.size > 1 and not np.all(np.diff(pos) > 0):
                raise IntegrityError("cell positions must be strictly increasing")
        dicts = tuple(tuple(d) for d in self.dictionaries)
        if len(dicts) != self.schema.k:
            raise SchemaError("one dictionary per dimension required")
        for dim, d in zip(self.schema.dims, dicts):
            if len(d) > dim.cardinality:
                raise SchemaError(
                    f"dimension {dim.name!r} has {len(d)} values, declared cardinality {dim.cardinality}"
                )
            if len(set(d)) != len(d):
                raise SchemaError(f"dictionary of {dim.name!r} contains duplicates")
        pos.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dictionaries", dicts)

    @property
    def n(self) -> int:
        return int(self.positions.size)

    @classmethod
    def from_ordinals(cls, schema: RelationSchema, coords, values, dictionaries=None):
        """Build from an ``(n, k)`` ordinal array; rows may come in any order."""
        positions = linearize_many(coords, schema)
        order = np.argsort(positions, kind="stable")
        positions = positions[order]
        if positions.size > 1:
            dup = np.flatnonzero(np.diff(positions) == 0)
            if dup.size:
                key = delinearize(positions[dup[0]], schema)
                raise IntegrityError(f"duplicate key {key}", key=key)
        if dictionaries is None:
            dictionaries = tuple(tuple(range(c)) for c in schema.shape)
        values = np.asarray(values, dtype=schema.measure.dtype)[order]
        return cls(schema, dictionaries, positions, values)

    def coords(self) -> np.ndarray:
        return delinearize_many(self.positions, self.schema)

    def key_of(self, idx: Sequence[int]) -> tuple:
        """Raw dimension values of an ordinal index."""
        return tuple(d[i] for d, i in zip(self.dictionaries, idx))

    def ordinals_of(self, raw_key: Sequence) -> tuple[int, ...]:
        """Ordinals of raw dimension values; unknown values raise DomainError."""
        indexes = self.__dict__.get("_dict_index")
        if indexes is None:
            indexes = [{v: i for i, v in enumerate(d)} for d in self.dictionaries]
            object.__setattr__(self, "_dict_index", indexes)
        if len(raw_key) != self.schema.k:
            raise DomainError(f"key has {len(raw_key)} values, schema has {self.schema.k} dimensions")
        out = []
        for dim, lookup, v in zip(self.schema.dims, indexes, raw_key):
            if v not in lookup:
                raise DomainError(f"value {v!r} is not a member of dimension {dim.name!r}")
            out.append(lookup[v])
        return tuple(out)

    def update(self, idx: Sequence[int], value) -> "EncodedRelation":
        """Copy with the measure of one nonempty cell overwritten.

        Positions are shared, so headers built on ``self`` remain valid.
        Inserting a new cell is not supported.
        """
        L = linearize(idx, self.schema)
        p = int(np.searchsorted(self.positions, L))
        if p == self.n or self.positions[p] != L:
            raise DomainError(f"cell {tuple(idx)} is empty; only nonempty cells can be updated")
        vals = self.values.copy()
        vals[p] = value
        return EncodedRelation(self.schema, self.dictionaries, self.positions, vals)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Materialize (values, nonempty mask) over all cells. Small relations only."""
        vals = np.zeros(self.schema.total_cells, dtype=self.values.dtype)
        mask = np.zeros(self.schema.total_cells, dtype=bool)
        vals[self.positions] = self.values
        mask[self.positions] = True
        return vals, mask


@dataclass(frozen=True)
class DimensionDecl:
    """Declared dimension: name, optional cardinality, raw value type for CSV parsing."""

    name: str
    cardinality: int | None = None
    type: str = "str"


@dataclass(frozen=True)
class SchemaDecl:
    dims: tuple[DimensionDecl, ...]
    measure: Measure = Measure()

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))


def encode_columns(columns: Sequence[Iterable], measures: Iterable, decl: SchemaDecl) -> EncodedRelation:
    """Encode column-oriented data. Ordinals follow ascending raw-value order."""
    if len(columns) != len(decl.dims):
        raise SchemaError(f"expected {len(decl.dims)} dimension columns, got {len(columns)}")
    ordinals, dictionaries, dims = [], [], []
    for dd, col in zip(decl.dims, columns):
        arr = np.asarray(col if isinstance(col, np.ndarray) else list(col))
        uniq, inverse = np.unique(arr, return_inverse=True)
        card = len(uniq) if dd.cardinality is None else int(dd.cardinality)
        if len(uniq) > card:
            raise SchemaError(
                f"dimension {dd.name!r} has {len(uniq)} distinct values, declared cardinality {card}"
            )
        dims.append(Dimension(dd.name, card))
        dictionaries.append(tuple(uniq.tolist()))
        ordinals.append(inverse.reshape(-1))
    schema = RelationSchema(tuple(dims), decl.measure)
    n = len(ordinals[0]) if ordinals else 0
    coords = np.stack(ordinals, axis=1) if n else np.empty((0, schema.k), dtype=np.int64)
    values = np.asarray(measures if isinstance(measures, np.ndarray) else list(measures))
    if values.shape[0] != n:
        raise SchemaError("measure column length differs from dimension columns")
    try:
        return EncodedRelation.from_ordinals(schema, coords, values, tuple(dictionaries))
    except IntegrityError as exc:
        raw = tuple(d[i] for d, i in zip(dictionaries, exc.key))
        raise IntegrityError(f"duplicate key {raw}", key=raw) from None


def encode_relation(rows: Iterable[Sequence], decl: SchemaDecl) -> EncodedRelation:
    """Encode rows of ``(d_1, ..., d_k, measure)``."""
    k = len(decl.dims)
    rows = list(rows)
    for r, row in enumerate(rows):
        if len(row) != k + 1:
            raise SchemaError(f"row {r} has {len(row)} fields, expected {k + 1}")
    columns = [[row[j] for row in rows] for j in range(k)]
    return encode_columns(columns, [row[k] for row in rows], decl)


@dataclass(frozen=True)
class RelationStats:
    n: int
    total_cells: int
    runs: int
    density_exact: Fraction = field(repr=False)

    @property
    def density(self) -> float:
        return float(self.density_exact)


def count_runs(positions: np.ndarray) -> int:
    """Number of maximal blocks of consecutive positions."""
    if positions.size == 0:
        return 0
    return 1 + int(np.count_nonzero(np.diff(positions) != 1))


def stats(rel: EncodedRelation) -> RelationStats:
    if rel.n == 0:
        raise DomainError("density is undefined for an empty relation")
    total = rel.schema.total_cells
    return RelationStats(rel.n, total, count_runs(rel.positions), Fraction(rel.n, total))
