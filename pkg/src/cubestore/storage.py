"""Binary persistence.

Every file is ``envelope | meta | payload``. The 24-byte envelope is
``<4sHHIQI``: magic, format version, reserved zero, meta length, payload
length, CRC-32 of the payload. ``meta`` holds kind-specific fixed-width
fields; ``payload`` is the raw array data whose size is what the size
reports count. Everything is little-endian with no padding between array
elements. See ``docs/FORMAT.md`` for the per-kind layouts.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .chunks import ChunkSpec, ChunkStore, DenseChunk, SparseChunk
from .datagen import decl_for, schema_decl_from_dict, schema_decl_to_dict
from .errors import DomainError, FormatError
from .headers import OFFSET_DTYPES, BocHeader, LpcHeader, SchcHeader
from .relation import Dimension, EncodedRelation, Measure, RelationSchema
from .table import NULL_RID, PAGE_HEADER, BTree, TableRep, _Page

VERSION = 1
ENVELOPE = struct.Struct("<4sHHIQI")

MAGIC = {
    "dict": b"CSDI",
    "cells": b"CSCE",
    "schc": b"CSSC",
    "lpc": b"CSLP",
    "bocb": b"CSBB",
    "boco": b"CSBO",
    "chnk": b"CSCH",
    "rows": b"CSRW",
    "btree": b"CSBT",
}

_KIND_CODE = {"integer": 0, "real": 1}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}


def write_file(path, kind: str, meta: bytes, payload: bytes) -> int:
    """Write one enveloped file; returns the envelope+meta overhead in bytes."""
    env = ENVELOPE.pack(MAGIC[kind], VERSION, 0, len(meta), len(payload), zlib.crc32(payload))
    with open(path, "wb") as fh:
        fh.write(env)
        fh.write(meta)
        fh.write(payload)
    return ENVELOPE.size + len(meta)


def read_file(path, kind: str) -> tuple[bytes, bytes]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(path, 0, f"cannot read: {exc}") from None
    if len(raw) < ENVELOPE.size:
        raise FormatError(path, len(raw), "truncated envelope")
    magic, version, _, meta_len, payload_len, crc = ENVELOPE.unpack_from(raw)
    if magic != MAGIC[kind]:
        raise FormatError(path, 0, f"bad magic {magic!r}, expected {MAGIC[kind]!r}")
    if version != VERSION:
        raise FormatError(path, 4, f"unsupported version {version}")
    end = ENVELOPE.size + meta_len + payload_len
    if len(raw) < end:
        raise FormatError(path, len(raw), f"truncated file, expected {end} bytes")
    if len(raw) > end:
        raise FormatError(path, end, "trailing bytes after payload")
    meta = raw[ENVELOPE.size : ENVELOPE.size + meta_len]
    payload = raw[ENVELOPE.size + meta_len :]
    if zlib.crc32(payload) != crc:
        raise FormatError(path, ENVELOPE.size + meta_len, "payload checksum mismatch")
    return meta, payload


def _unpack(path, fmt: str, meta: bytes, offset: int = 0):
    try:
        return struct.unpack_from(fmt, meta, offset)
    except struct.error:
        raise FormatError(path, ENVELOPE.size + offset, "truncated metadata") from None


def _array(path, payload: bytes, dtype, count: int, offset: int = 0) -> np.ndarray:
    dtype = np.dtype(dtype)
    need = offset + count * dtype.itemsize
    if len(payload) < need:
        raise FormatError(path, offset, f"payload holds {len(payload)} bytes, need {need}")
    return np.frombuffer(payload, dtype=dtype, count=count, offset=offset).copy()


# dictionaries -----------------------------------------------------------------

_DICT_META = "<HQBQ"  # dimension index, cardinality, value type, count
_INT32, _INT64, _UTF8 = 0, 1, 2


def save_dictionary(path, j: int, cardinality: int, values: tuple) -> int:
    if all(isinstance(v, int) and not isinstance(v, bool) for v in values):
        arr = np.asarray(values, dtype=np.int64)
        if arr.size == 0 or (arr.min() >= -(2**31) and arr.max() < 2**31):
            vtype, payload = _INT32, arr.astype("<i4").tobytes()
        else:
            vtype, payload = _INT64, arr.astype("<i8").tobytes()
    elif all(isinstance(v, str) for v in values):
        vtype = _UTF8
        parts = []
        for v in values:
            b = v.encode("utf-8")
            parts.append(struct.pack("<I", len(b)) + b)
        payload = b"".join(parts)
    else:
        raise DomainError(f"dimension {j}: only int or str dictionary values can be stored")
    return write_file(path, "dict", struct.pack(_DICT_META, j, cardinality, vtype, len(values)), payload)


def load_dictionary(path) -> tuple[int, int, tuple]:
    meta, payload = read_file(path, "dict")
    j, card, vtype, count = _unpack(path, _DICT_META, meta)
    if vtype == _INT32:
        values = tuple(_array(path, payload, "<i4", count).tolist())
    elif vtype == _INT64:
        values = tuple(_array(path, payload, "<i8", count).tolist())
    elif vtype == _UTF8:
        out, off = [], 0
        for _ in range(count):
            (ln,) = _unpack(path, "<I", payload, off)
            if off + 4 + ln > len(payload):
                raise FormatError(path, off, "truncated string")
            out.append(payload[off + 4 : off + 4 + ln].decode("utf-8"))
            off += 4 + ln
        values = tuple(out)
    else:
        raise FormatError(path, ENVELOPE.size + 10, f"unknown value type {vtype}")
    return j, card, values


# cells and headers ------------------------------------------------------------


def save_cells(path, values: np.ndarray, measure: Measure) -> int:
    meta = struct.pack("<BBQ", _KIND_CODE[measure.kind], measure.width, values.size)
    return write_file(path, "cells", meta, np.ascontiguousarray(values, dtype=measure.dtype).tobytes())


def load_cells(path) -> tuple[Measure, np.ndarray]:
    meta, payload = read_file(path, "cells")
    kind, width, n = _unpack(path, "<BBQ", meta)
    measure = Measure(kind=_KIND_NAME.get(kind, "?"), width=width)
    return measure, _array(path, payload, measure.dtype, n)


def save_lpc(path, h: LpcHeader) -> int:
    meta = struct.pack("<QQB", h.n, h.total_cells, h.width)
    return write_file(path, "lpc", meta, h.positions.astype("<i8").tobytes())


def load_lpc(path) -> LpcHeader:
    meta, payload = read_file(path, "lpc")
    n, total, width = _unpack(path, "<QQB", meta)
    return LpcHeader(_array(path, payload, "<i8", n), total, width)


def save_schc(path, h: SchcHeader) -> int:
    meta = struct.pack("<QQQB", h.n, h.total_cells, h.runs, h.width)
    pairs = np.column_stack((h.starts, h.empties)).astype("<i8")
    return write_file(path, "schc", meta, pairs.tobytes())


def load_schc(path) -> SchcHeader:
    meta, payload = read_file(path, "schc")
    n, total, runs, width = _unpack(path, "<QQQB", meta)
    pairs = _array(path, payload, "<i8", 2 * runs).reshape(runs, 2)
    return SchcHeader(pairs[:, 0], pairs[:, 1], n, total, width)


_BOCB_META = "<QQIBBQ"  # n, total cells, block, index width, offset width, base count
_BOCO_META = "<QIB"  # n, block, offset width


def save_boc(base_path, offset_path, h: BocHeader) -> tuple[int, int]:
    meta = struct.pack(_BOCB_META, h.n, h.total_cells, h.block, h.width, h.offset_width, h.base.size)
    a = write_file(base_path, "bocb", meta, h.base.astype("<i8").tobytes())
    meta = struct.pack(_BOCO_META, h.n, h.block, h.offset_width)
    b = write_file(offset_path, "boco", meta, h.offsets.tobytes())
    return a, b


def load_boc(base_path, offset_path) -> BocHeader:
    meta, payload = read_file(base_path, "bocb")
    n, total, block, width, ow, nbase = _unpack(base_path, _BOCB_META, meta)
    base = _array(base_path, payload, "<i8", nbase)
    meta, payload = read_file(offset_path, "boco")
    n2, block2, ow2 = _unpack(offset_path, _BOCO_META, meta)
    if (n2, block2, ow2) != (n, block, ow):
        raise FormatError(offset_path, ENVELOPE.size, "offset file does not match its base file")
    if ow not in OFFSET_DTYPES:
        raise FormatError(offset_path, ENVELOPE.size + 12, f"bad offset width {ow}")
    if nbase != (n - 1) // block + 1:
        raise FormatError(base_path, ENVELOPE.size, "base count inconsistent with N and block")
    offsets = _array(offset_path, payload, OFFSET_DTYPES[ow], n)
    return BocHeader(base, offsets, block, total, width)


# chunk store ------------------------------------------------------------------

CHUNK_RECORD = struct.Struct("<QBI")  # chunk id, dense flag, nonempty count


def save_chunks(path, store: ChunkStore) -> int:
    k = store.schema.k
    m = store.schema.measure
    meta = struct.pack(
        f"<B{k}Q{k}IQQBBBQ",
        k,
        *store.spec.shape,
        *store.spec.chunk_shape,
        store.threshold.numerator,
        store.threshold.denominator,
        _KIND_CODE[m.kind],
        m.width,
        store.offset_width,
        len(store.chunks),
    )
    parts = []
    odt = np.dtype(f"<u{store.offset_width}")
    for cid in sorted(store.chunks):
        ch = store.chunks[cid]
        if isinstance(ch, DenseChunk):
            parts.append(CHUNK_RECORD.pack(cid, 1, ch.nonempty))
            parts.append(np.packbits(ch.mask, bitorder="little").tobytes())
            parts.append(ch.values.astype(m.dtype).tobytes())
        else:
            parts.append(CHUNK_RECORD.pack(cid, 0, ch.nonempty))
            parts.append(ch.offsets.astype(odt).tobytes())
            parts.append(ch.values.astype(m.dtype).tobytes())
    return write_file(path, "chnk", meta, b"".join(parts))


def chunk_payload_size(store: ChunkStore) -> int:
    return len(store.chunks) * CHUNK_RECORD.size + store.nbytes


def load_chunks(path) -> ChunkStore:
    meta, payload = read_file(path, "chnk")
    (k,) = _unpack(path, "<B", meta)
    fields = _unpack(path, f"<{k}Q{k}IQQBBBQ", meta, 1)
    shape, edges = fields[:k], fields[k : 2 * k]
    num, den, kind, width, ow, count = fields[2 * k :]
    measure = Measure(kind=_KIND_NAME.get(kind, "?"), width=width)
    schema = RelationSchema.from_shape(shape, measure)
    spec = ChunkSpec(shape, edges)
    store = ChunkStore(schema, spec, {}, Fraction(num, den))
    if store.offset_width != ow:
        raise FormatError(path, ENVELOPE.size, f"offset width {ow} inconsistent with chunk shape")
    odt = np.dtype(f"<u{ow}")
    off = 0
    for _ in range(count):
        if off + CHUNK_RECORD.size > len(payload):
            raise FormatError(path, ENVELOPE.size + len(meta) + off, "truncated chunk record")
        cid, dense, nonempty = CHUNK_RECORD.unpack_from(payload, off)
        off += CHUNK_RECORD.size
        dims = spec.chunk_dims(cid)
        slots = int(np.prod(dims))
        if dense:
            nmask = (slots + 7) // 8
            mask = np.unpackbits(_array(path, payload, np.uint8, nmask, off), count=slots, bitorder="little")
            off += nmask
            values = _array(path, payload, measure.dtype, slots, off)
            off += slots * measure.dtype.itemsize
            store.chunks[cid] = DenseChunk(dims, values, mask.astype(bool))
        else:
            offsets = _array(path, payload, odt, nonempty, off)
            off += nonempty * ow
            values = _array(path, payload, measure.dtype, nonempty, off)
            off += nonempty * measure.dtype.itemsize
            store.chunks[cid] = SparseChunk(dims, offsets, values)
    if off != len(payload):
        raise FormatError(path, ENVELOPE.size + len(meta) + off, "unexpected bytes after last chunk")
    return store


# row table and b-tree ---------------------------------------------------------


def _row_dtype(k: int, measure: Measure) -> np.dtype:
    return np.dtype([(f"k{j}", "<u4") for j in range(k)] + [("value", measure.dtype)])


def save_rows(path, t: TableRep) -> int:
    k, m = t.schema.k, t.schema.measure
    rows = np.empty(t.n, dtype=_row_dtype(k, m))
    for j in range(k):
        rows[f"k{j}"] = t.keys[:, j]
    rows["value"] = t.values
    meta = struct.pack("<BBBQ", k, _KIND_CODE[m.kind], m.width, t.n)
    return write_file(path, "rows", meta, rows.tobytes())


def load_rows(path, schema: RelationSchema) -> TableRep:
    meta, payload = read_file(path, "rows")
    k, kind, width, n = _unpack(path, "<BBBQ", meta)
    if k != schema.k or Measure(kind=_KIND_NAME.get(kind, "?"), width=width).dtype != schema.measure.dtype:
        raise FormatError(path, ENVELOPE.size, "row layout does not match the schema")
    rows = _array(path, payload, _row_dtype(k, schema.measure), n)
    keys = np.column_stack([rows[f"k{j}"] for j in range(k)]).astype("<u4")
    return TableRep(schema, keys, rows["value"].copy())


_BTREE_META = "<IBBHIIQQ"  # page size, key fields, rid width, capacity, root, page count, entries, rows/page


_RID = struct.Struct("<II")
_NULL = _RID.pack(*NULL_RID)


def save_btree(path, tree: BTree, rows_per_page: int) -> int:
    kb = tree.key_fields * 4
    buf = bytearray(tree.page_count * tree.page_size)
    for no, page in enumerate(tree.pages):
        parts = [struct.pack("<BH", 1 if page.leaf else 0, len(page.keys))]
        for key, rid in zip(page.keys, page.rids):
            parts.append(key.to_bytes(kb, "little"))
            parts.append(_RID.pack(*divmod(rid, rows_per_page)))
        if page.leaf:
            parts.append(_NULL * (len(page.keys) + 1))
        else:
            parts.extend(_RID.pack(c, 0) for c in page.children)
        blob = b"".join(parts)
        buf[no * tree.page_size : no * tree.page_size + len(blob)] = blob
    meta = struct.pack(
        _BTREE_META, tree.page_size, tree.key_fields, 8, tree.capacity, tree.root, tree.page_count, tree.size, rows_per_page
    )
    return write_file(path, "btree", meta, bytes(buf))


def load_btree(path) -> BTree:
    meta, payload = read_file(path, "btree")
    page_size, k, rid_width, capacity, root, count, size, rpp = _unpack(path, _BTREE_META, meta)
    if len(payload) != page_size * count:
        raise FormatError(path, ENVELOPE.size + len(meta), "page area size mismatch")
    tree = BTree(k, page_size)
    if tree.capacity != capacity or rid_width != 8:
        raise FormatError(path, ENVELOPE.size, "page geometry mismatch")
    kb = 4 * k
    entry = kb + 8
    pages = []
    for no in range(count):
        base = no * page_size
        leaf, n = struct.unpack_from("<BH", payload, base)
        if n > capacity:
            raise FormatError(path, ENVELOPE.size + len(meta) + base, f"page {no} claims {n} entries")
        at = base + PAGE_HEADER
        keys, rids = [], []
        for e in range(at, at + n * entry, entry):
            keys.append(int.from_bytes(payload[e : e + kb], "little"))
            pg, slot = _RID.unpack_from(payload, e + kb)
            rids.append(pg * rpp + slot)
        children = None
        if not leaf:
            at += n * entry
            children = [_RID.unpack_from(payload, at + 8 * c)[0] for c in range(n + 1)]
        pages.append(_Page(keys, rids, children))
    tree.pages = pages
    tree.root = root
    tree.size = size
    return tree


# whole builds -----------------------------------------------------------------

FILES = {
    "cells": "relation.cells",
    "schc": "relation.schc",
    "lpc": "relation.lpc",
    "bocb": "relation.bocb",
    "boco": "relation.boco",
    "chnk": "relation.chnk",
    "rows": "table.rows",
    "btree": "table.btree",
}
MANIFEST = "schema.json"


def dict_file(j: int) -> str:
    return f"dim{j + 1}.dict"


@dataclass(eq=False)
class Build:
    """A relation together with whichever representations were built for it."""

    relation: EncodedRelation
    schc: SchcHeader | None = None
    lpc: LpcHeader | None = None
    boc: BocHeader | None = None
    chunks: ChunkStore | None = None
    table: TableRep | None = None
    overhead: dict[str, int] = field(default_factory=dict)

    @property
    def representations(self) -> list[str]:
        names = ("schc", "lpc", "boc", "chunks", "table")
        return [n for n in names if getattr(self, n) is not None]


def save_build(build: Build, directory) -> dict[str, Path]:
    """Write every present representation; deterministic byte for byte."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rel = build.relation
    if build.schc is None and build.lpc is None and build.boc is None:
        raise DomainError("a build needs at least one position header to be persisted")
    written: dict[str, Path] = {}
    overhead: dict[str, int] = {}

    def put(name, fn, *args):
        p = d / name
        overhead[name] = fn(p, *args)
        written[name] = p

    for j, (dim, values) in enumerate(zip(rel.schema.dims, rel.dictionaries)):
        put(dict_file(j), save_dictionary, j, dim.cardinality, values)
    put(FILES["cells"], save_cells, rel.values, rel.schema.measure)
    if build.schc is not None:
        put(FILES["schc"], save_schc, build.schc)
    if build.lpc is not None:
        put(FILES["lpc"], save_lpc, build.lpc)
    if build.boc is not None:
        b, o = save_boc(d / FILES["bocb"], d / FILES["boco"], build.boc)
        overhead[FILES["bocb"]], overhead[FILES["boco"]] = b, o
        written[FILES["bocb"]], written[FILES["boco"]] = d / FILES["bocb"], d / FILES["boco"]
    if build.chunks is not None:
        put(FILES["chnk"], save_chunks, build.chunks)
    if build.table is not None:
        put(FILES["rows"], save_rows, build.table)
        if build.table.index is not None:
            put(FILES["btree"], save_btree, build.table.index, build.table.rows_per_page)
    manifest = schema_decl_to_dict(decl_for(rel))
    manifest["files"] = sorted(written)
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    build.overhead = overhead
    return written


def load_build(directory) -> Build:
    d = Path(directory)
    mpath = d / MANIFEST
    if not mpath.exists():
        raise FormatError(mpath, 0, "missing build manifest")
    doc = json.loads(mpath.read_text(encoding="utf-8"))
    decl = schema_decl_from_dict(doc)
    files = set(doc.get("files", []))

    dictionaries, dims = [], []
    for j, dd in enumerate(decl.dims):
        jj, card, values = load_dictionary(d / dict_file(j))
        if jj != j:
            raise FormatError(d / dict_file(j), ENVELOPE.size, f"dictionary is for dimension {jj}")
        dims.append(Dimension(dd.name, card))
        dictionaries.append(values)
    measure, values = load_cells(d / FILES["cells"])
    schema = RelationSchema(tuple(dims), decl.measure)
    if measure.dtype != schema.measure.dtype:
        raise FormatError(d / FILES["cells"], ENVELOPE.size, "measure type differs from the manifest")

    schc = load_schc(d / FILES["schc"]) if FILES["schc"] in files else None
    lpc = load_lpc(d / FILES["lpc"]) if FILES["lpc"] in files else None
    boc = load_boc(d / FILES["bocb"], d / FILES["boco"]) if FILES["bocb"] in files else None
    if lpc is not None:
        positions = lpc.positions
    elif boc is not None:
        positions = boc.base[np.arange(boc.n) // boc.block] + boc.offsets.astype(np.int64)
    elif schc is not None:
        lengths = np.diff(np.append(schc.physical_starts, schc.n))
        positions = np.arange(schc.n, dtype=np.int64) + np.repeat(schc.empties, lengths)
    else:
        raise FormatError(d, 0, "build holds no position header")
    rel = EncodedRelation(schema, tuple(dictionaries), positions, values)

    chunks = None
    if FILES["chnk"] in files:
        chunks = load_chunks(d / FILES["chnk"])
        chunks.schema = schema
    table = None
    if FILES["rows"] in files:
        table = load_rows(d / FILES["rows"], schema)
        if FILES["btree"] in files:
            table.index = load_btree(d / FILES["btree"])
    return Build(rel, schc, lpc, boc, chunks, table)


# size report ------------------------------------------------------------------


class ReportRow(NamedTuple):
    label: str
    file: str
    payload: int
    overhead: int


@dataclass
class SizeReport:
    table_rows: list[ReportRow]
    multi_rows: list[ReportRow]
    alternatives: list[ReportRow]

    @property
    def table_total(self) -> int:
        return sum(r.payload for r in self.table_rows)

    @property
    def multi_total(self) -> int:
        return sum(r.payload for r in self.multi_rows)

    @property
    def overhead_total(self) -> int:
        return sum(r.overhead for r in self.table_rows + self.multi_rows + self.alternatives)

    def to_text(self) -> str:
        lines = []
        w = max([len(r.label) for r in self.table_rows + self.multi_rows + self.alternatives] + [5]) + 2

        def block(title, rows, total=None):
            if not rows:
                return
            lines.append(title)
            for r in rows:
                lines.append(f"  {r.label:<{w}}{r.payload:>16,}")
            if total is not None:
                lines.append(f"  {'Total':<{w}}{total:>16,}")
            lines.append("")

        block("Table representation", self.table_rows, self.table_total)
        block("Multidimensional representation", self.multi_rows, self.multi_total)
        block("Alternative structures (not in totals)", self.alternatives)
        lines.append(f"Envelope and metadata overhead (all files): {self.overhead_total:,} bytes")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        out = ["section,file,payload_bytes,overhead_bytes"]
        for sec, rows in (("table", self.table_rows), ("multidimensional", self.multi_rows), ("alternative", self.alternatives)):
            for r in rows:
                out.append(f"{sec},{r.file},{r.payload},{r.overhead}")
        out.append(f"table,TOTAL,{self.table_total},")
        out.append(f"multidimensional,TOTAL,{self.multi_total},")
        return "\n".join(out) + "\n"


def _payload_overhead(path: Path) -> tuple[int, int]:
    with open(path, "rb") as fh:
        head = fh.read(ENVELOPE.size)
    if len(head) < ENVELOPE.size:
        raise FormatError(path, len(head), "truncated envelope")
    _, _, _, meta_len, payload_len, _ = ENVELOPE.unpack(head)
    return payload_len, ENVELOPE.size + meta_len


def representation_report(directory) -> SizeReport:
    """Per-file payload sizes laid out as table vs multidimensional representation.

    The multidimensional total is compressed array + header + dictionaries,
    using the base-offset header when present, else LPC, else SCHC.
    """
    d = Path(directory)
    mpath = d / MANIFEST
    if not mpath.exists():
        raise DomainError(f"{d}: nothing to report")
    doc = json.loads(mpath.read_text(encoding="utf-8"))
    files = set(doc.get("files", []))
    if not files:
        raise DomainError(f"{d}: nothing to report")

    def row(label, name):
        p, o = _payload_overhead(d / name)
        return ReportRow(label, name, p, o)

    table_rows = [row(lbl, FILES[n]) for lbl, n in (("Table", "rows"), ("B-tree index", "btree")) if FILES[n] in files]
    multi, alt = [], []
    if FILES["cells"] in files:
        multi.append(row("Compressed array", FILES["cells"]))
    headers = []
    if FILES["bocb"] in files:
        headers.append([row("Base array", FILES["bocb"]), row("Offset array", FILES["boco"])])
    if FILES["lpc"] in files:
        headers.append([row("LPC header", FILES["lpc"])])
    if FILES["schc"] in files:
        headers.append([row("SCHC header", FILES["schc"])])
    if headers:
        multi.extend(headers[0])
        for h in headers[1:]:
            alt.extend(h)
    j = 0
    while dict_file(j) in files:
        multi.append(row(f"Dimension {j + 1}", dict_file(j)))
        j += 1
    if FILES["chnk"] in files:
        alt.append(row("Chunk store", FILES["chnk"]))
    if not table_rows and not multi:
        raise DomainError(f"{d}: nothing to report")
    return SizeReport(table_rows, multi, alt)
