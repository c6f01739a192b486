"""Relations from CSV files or from a seeded generator with a chosen run count."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from math import prod
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, SchemaError
from .relation import (
    DimensionDecl,
    EncodedRelation,
    Measure,
    RelationSchema,
    SchemaDecl,
    encode_columns,
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Target geometry for :func:`gen_synthetic`.

    ``measure_range`` is an inclusive ``(low, high)`` range of integers drawn
    uniformly; ``None`` stores the constant 1 in every cell.
    """

    cardinalities: tuple[int, ...]
    n: int
    runs: int
    seed: int = 0
    measure_range: tuple[int, int] | None = None
    names: tuple[str, ...] | None = None

    @property
    def total_cells(self) -> int:
        return prod(self.cardinalities)

    def check(self) -> None:
        t = self.total_cells
        if not 1 <= self.n <= t:
            raise DomainError(f"infeasible spec: need 1 <= N <= total cells, got N={self.n}, total={t}")
        if not 1 <= self.runs <= self.n:
            raise DomainError(f"infeasible spec: need 1 <= runs <= N, got runs={self.runs}, N={self.n}")
        if self.n + self.runs - 1 > t:
            raise DomainError(
                f"infeasible spec: {self.runs} runs of {self.n} cells need N + runs - 1 <= total cells "
                f"({self.n + self.runs - 1} > {t})"
            )


def _composition(rng: np.random.Generator, total: int, parts: int) -> np.ndarray:
    """Uniformly random composition of ``total`` into ``parts`` positive integers."""
    if parts == 1:
        return np.array([total], dtype=np.int64)
    cuts = np.sort(rng.choice(total - 1, parts - 1, replace=False, shuffle=False).astype(np.int64) + 1)
    return np.diff(np.concatenate(([0], cuts, [total])))


def gen_synthetic(spec: SyntheticSpec) -> EncodedRelation:
    """Exactly ``spec.n`` cells in exactly ``spec.runs`` maximal runs.

    Runs are placed over the one-dimensional index space; dictionaries are the
    integers ``0..c-1``.
    """
    spec.check()
    rng = np.random.default_rng(spec.seed)
    n, runs, total = spec.n, spec.runs, spec.total_cells
    lengths = _composition(rng, n, runs)
    # runs - 1 inner gaps of at least one cell, leading and trailing gaps may be empty
    spare = total - n - (runs - 1)
    bins = _composition(rng, spare + runs + 1, runs + 1) - 1
    gaps = bins[1:runs] + 1
    lead = bins[0]
    starts = lead + np.concatenate(([0], np.cumsum(lengths[:-1] + gaps)))
    shift = starts - np.concatenate(([0], np.cumsum(lengths[:-1])))
    positions = np.arange(n, dtype=np.int64) + np.repeat(shift, lengths)

    if spec.measure_range is None:
        values = np.ones(n, dtype=np.int64)
    else:
        lo, hi = spec.measure_range
        values = rng.integers(lo, hi, size=n, endpoint=True, dtype=np.int64)
    schema = RelationSchema.from_shape(spec.cardinalities, Measure(), spec.names)
    return EncodedRelation(schema, tuple(tuple(range(c)) for c in schema.shape), positions, values)


def load_schema_decl(path) -> SchemaDecl:
    """Read a JSON schema manifest.

    ``{"dimensions": [{"name": "product", "cardinality": 200000, "type": "int"}, ...],
    "measure": {"name": "price", "kind": "real", "width": 8}}``
    """
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return schema_decl_from_dict(doc)


def schema_decl_from_dict(doc: dict) -> SchemaDecl:
    try:
        dims = tuple(
            DimensionDecl(d["name"], d.get("cardinality"), d.get("type", "str")) for d in doc["dimensions"]
        )
        m = doc.get("measure", {})
        measure = Measure(m.get("name", "measure"), int(m.get("width", 8)), m.get("kind", "integer"))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema manifest: {exc}") from None
    for d in dims:
        if d.type not in ("str", "int"):
            raise SchemaError(f"dimension {d.name!r}: type must be 'str' or 'int', got {d.type!r}")
    return SchemaDecl(dims, measure)


def schema_decl_to_dict(decl: SchemaDecl) -> dict:
    return {
        "dimensions": [
            {k: v for k, v in (("name", d.name), ("cardinality", d.cardinality), ("type", d.type)) if v is not None}
            for d in decl.dims
        ],
        "measure": {"name": decl.measure.name, "kind": decl.measure.kind, "width": decl.measure.width},
    }


def decl_for(rel: EncodedRelation) -> SchemaDecl:
    """Declaration that re-ingests an exported relation to the same encoding."""
    dims = []
    for dim, d in zip(rel.schema.dims, rel.dictionaries):
        kind = "int" if d and all(isinstance(v, int) for v in d) else "str"
        dims.append(DimensionDecl(dim.name, dim.cardinality, kind))
    return SchemaDecl(tuple(dims), rel.schema.measure)


def ingest_csv(path, decl: SchemaDecl) -> EncodedRelation:
    path = Path(path)
    names = [d.name for d in decl.dims]
    parse_dim = [int if d.type == "int" else str for d in decl.dims]
    parse_measure = int if decl.measure.kind == "integer" else float
    columns: list[list] = [[] for _ in names]
    measures = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [n for n in names + [decl.measure.name] if n not in header]
        if missing:
            raise SchemaError(f"{path}: line 1: header lacks columns {missing}")
        cols = [header.index(n) for n in names]
        mcol = header.index(decl.measure.name)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                for j, c in enumerate(cols):
                    columns[j].append(parse_dim[j](row[c]))
                measures.append(parse_measure(row[mcol]))
            except ValueError as exc:
                raise SchemaError(f"{path}: line {line}: {exc}") from None
    return encode_columns(columns, measures, decl)


def export_csv(rel: EncodedRelation, path) -> None:
    names = [d.name for d in rel.schema.dims]
    coords = rel.coords().tolist()
    vals = rel.values.tolist()
    real = rel.schema.measure.kind == "real"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + [rel.schema.measure.name])
        for idx, v in zip(coords, vals):
            w.writerow([*rel.key_of(idx), repr(float(v)) if real else int(v)])


def sample_relation(
    rng: np.random.Generator, shape: Sequence[int], density: float, measure: Measure = Measure()
) -> EncodedRelation:
    """Random relation with roughly the given density (at least one cell)."""
    schema = RelationSchema.from_shape(shape, measure)
    total = schema.total_cells
    n = max(1, min(total, int(round(density * total))))
    positions = np.sort(rng.choice(total, n, replace=False))
    if measure.kind == "integer":
        values = rng.integers(-1000, 1000, size=n)
    else:
        values = rng.normal(size=n)
    return EncodedRelation(schema, tuple(tuple(range(c)) for c in shape), positions, values)
