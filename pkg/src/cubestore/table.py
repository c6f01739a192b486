"""Row table with a paged B-tree index: the relational baseline.

Rows are fixed-width records of ``k`` little-endian uint32 ordinals followed
by the measure. The B-tree is a classic (not B+) tree on 4 KB pages: every
page holds ``count`` entries of ``(key, row RID)`` followed by ``count + 1``
child RIDs. Leaf pages carry the child slots too, filled with a null RID, so
leaf and internal pages share one layout and one capacity.

A key's integer form is its k ordinal fields read as one little-endian
integer, which puts dimension k in the most significant position. Comparing
these integers therefore orders rows exactly like the one-dimensional index.
"""

from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, IntegrityError
from .relation import EncodedRelation, RelationSchema

LOG = logging.getLogger(__name__)

PAGE_SIZE = 4096
PAGE_HEADER = 3  # u8 leaf flag, u16 entry count
KEY_FIELD = 4
RID_WIDTH = 8  # u32 page number, u32 slot
NULL_RID = (0xFFFFFFFF, 0xFFFFFFFF)


def page_capacity(key_fields: int, page_size: int = PAGE_SIZE, rid_width: int = RID_WIDTH) -> int:
    entry = key_fields * KEY_FIELD + 2 * rid_width
    cap = (page_size - PAGE_HEADER - rid_width) // entry
    if cap < 2:
        raise DomainError(f"a {page_size}-byte page holds fewer than two {entry}-byte entries")
    return cap


def key_int(idx: Sequence[int]) -> int:
    out = 0
    for i in reversed(idx):
        out = (out << 32) | int(i)
    return out


def key_ordinals(key: int, k: int) -> tuple[int, ...]:
    return tuple((key >> (32 * j)) & 0xFFFFFFFF for j in range(k))


class _Page:
    __slots__ = ("keys", "rids", "children")

    def __init__(self, keys=None, rids=None, children=None):
        self.keys = keys if keys is not None else []
        self.rids = rids if rids is not None else []
        self.children = children  # None on leaves

    @property
    def leaf(self) -> bool:
        return self.children is None


class BTree:
    """In-memory image of a paged B-tree mapping key integers to row numbers."""

    def __init__(self, key_fields: int, page_size: int = PAGE_SIZE):
        self.key_fields = key_fields
        self.page_size = page_size
        self.capacity = page_capacity(key_fields, page_size)
        self.pages: list[_Page] = [_Page()]
        self.root = 0
        self.size = 0

    @property
    def page_count(self) -> int:
        return len(self.pages)

    @property
    def nbytes(self) -> int:
        return self.page_count * self.page_size

    @property
    def min_fill(self) -> int:
        # splits leave this many on the left: room for one key per gap, both ends included
        return (self.capacity - 1) // 2

    def insert(self, key: int, rid: int) -> None:
        pages = self.pages
        path = []
        page = pages[self.root]
        while True:
            i = bisect_left(page.keys, key)
            if i < len(page.keys) and page.keys[i] == key:
                raise IntegrityError(f"duplicate key {key_ordinals(key, self.key_fields)}")
            if page.children is None:
                break
            path.append((page, i))
            page = pages[page.children[i]]
        page.keys.insert(i, key)
        page.rids.insert(i, rid)
        self.size += 1
        while len(page.keys) > self.capacity:
            mid = self.min_fill
            right = _Page(page.keys[mid + 1 :], page.rids[mid + 1 :])
            up_key, up_rid = page.keys[mid], page.rids[mid]
            del page.keys[mid:], page.rids[mid:]
            if page.children is not None:
                right.children = page.children[mid + 1 :]
                del page.children[mid + 1 :]
            right_no = len(pages)
            pages.append(right)
            if path:
                parent, i = path.pop()
                parent.keys.insert(i, up_key)
                parent.rids.insert(i, up_rid)
                parent.children.insert(i + 1, right_no)
                page = parent
            else:
                pages.append(_Page([up_key], [up_rid], [self.root, right_no]))
                self.root = len(pages) - 1
                break

    def search(self, key: int):
        pages = self.pages
        page = pages[self.root]
        while True:
            keys = page.keys
            i = bisect_left(keys, key)
            if i < len(keys) and keys[i] == key:
                return page.rids[i]
            if page.children is None:
                return None
            page = pages[page.children[i]]

    def depth(self) -> int:
        d, page = 1, self.pages[self.root]
        while page.children is not None:
            page = self.pages[page.children[0]]
            d += 1
        return d

    def leaf_fill(self) -> float:
        leaves = [p for p in self.pages if p.leaf]
        return sum(len(p.keys) for p in leaves) / (len(leaves) * self.capacity)

    def check(self) -> None:
        """Raise AssertionError unless the tree is structurally valid."""
        leaf_depths = set()
        seen = 0
        stack = [(self.root, None, None, 1)]
        while stack:
            no, lo, hi, depth = stack.pop()
            page = self.pages[no]
            keys = page.keys
            n = len(keys)
            seen += n
            assert len(page.rids) == n, f"page {no}: rid count"
            assert n <= self.capacity, f"page {no}: overfull"
            if no != self.root:
                assert n >= self.min_fill, f"page {no}: {n} entries < minimum {self.min_fill}"
            assert all(a < b for a, b in zip(keys, keys[1:])), f"page {no}: keys out of order"
            if n:
                assert lo is None or keys[0] > lo, f"page {no}: key below separator"
                assert hi is None or keys[-1] < hi, f"page {no}: key above separator"
            if page.children is None:
                leaf_depths.add(depth)
            else:
                assert len(page.children) == n + 1, f"page {no}: child count"
                bounds = [lo] + keys + [hi]
                for c, child in enumerate(page.children):
                    stack.append((child, bounds[c], bounds[c + 1], depth + 1))
        assert len(leaf_depths) <= 1, f"leaves at depths {sorted(leaf_depths)}"
        assert seen == self.size, f"{seen} entries reachable, {self.size} inserted"


@dataclass(eq=False)
class TableRep:
    schema: RelationSchema
    keys: np.ndarray  # (N, k) uint32 ordinals, ascending by key
    values: np.ndarray
    index: BTree | None = field(default=None)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def row_size(self) -> int:
        return KEY_FIELD * self.schema.k + self.schema.measure.width

    @property
    def rows_per_page(self) -> int:
        return max(1, PAGE_SIZE // self.row_size)

    @property
    def nbytes(self) -> int:
        return self.n * self.row_size

    @property
    def data_ratio(self) -> float:
        return self.schema.measure.width / self.row_size

    def key_ints(self) -> list[int]:
        k = self.schema.k
        if k <= 2:
            packed = self.keys[:, 0].astype(np.uint64)
            if k == 2:
                packed |= self.keys[:, 1].astype(np.uint64) << np.uint64(32)
            return packed.tolist()
        return [key_int(row) for row in self.keys.tolist()]

    def row(self, rid: int) -> tuple[tuple[int, ...], object]:
        return tuple(self.keys[rid].tolist()), self.values[rid].item()

    def lookup(self, idx: Sequence[int]):
        return btree_lookup(self, idx)


def build_table(rel: EncodedRelation) -> TableRep:
    if rel.n == 0:
        raise DomainError("cannot build a table for an empty relation")
    if max(rel.schema.shape) > 2**32:
        raise DomainError("dimension ordinals must fit 4-byte key fields")
    # relation cells are already in key order
    keys = rel.coords().astype("<u4")
    return TableRep(rel.schema, keys, rel.values.copy())


def _load(t: TableRep, order) -> BTree:
    tree = BTree(t.schema.k)
    keys = t.key_ints()
    for r in order:
        tree.insert(keys[r], r)
    return tree


def saturate_btree(t: TableRep) -> BTree:
    """Index the table: odd-numbered records ascending, then even-numbered ones.

    Record numbers are 1-based, so the first pass takes rows 0, 2, 4, ...
    """
    tree = _load(t, list(range(0, t.n, 2)) + list(range(1, t.n, 2)))
    t.index = tree
    LOG.debug("saturated b-tree: %d pages, leaf fill %.3f", tree.page_count, tree.leaf_fill())
    return tree


def ascending_btree(t: TableRep) -> BTree:
    """Single ascending pass; the reference load that saturation must beat."""
    return _load(t, range(t.n))


def btree_lookup(t: TableRep, idx: Sequence[int]):
    if t.index is None:
        raise DomainError("table has no index; call saturate_btree first")
    if len(idx) != t.schema.k:
        raise DomainError(f"key has {len(idx)} fields, table has {t.schema.k}")
    for i, c in zip(idx, t.schema.shape):
        if not 0 <= i < c:
            raise DomainError(f"key field {i} out of range [0, {c})")
    rid = t.index.search(key_int(idx))
    if rid is None:
        return None
    stored_key = t.keys[rid]
    if any(int(a) != int(b) for a, b in zip(stored_key, idx)):
        raise IntegrityError(f"index points row {rid} at the wrong key")
    return t.values[rid].item()


class TableSizes(NamedTuple):
    table: int
    index: int

    @property
    def total(self) -> int:
        return self.table + self.index


def table_sizes(t: TableRep) -> TableSizes:
    if t.index is None:
        raise DomainError("table has no index")
    return TableSizes(t.nbytes, t.index.nbytes)


def index_envelope(t: TableRep, rid_width: int = RID_WIDTH) -> tuple[int, int]:
    """Best and worst B-tree sizes of the analytic cost model, in bytes."""
    key_bytes = t.n * KEY_FIELD * t.schema.k
    best = key_bytes + 2 * t.n * rid_width
    return best, 2 * best


def build_table_rep(rel: EncodedRelation) -> TableRep:
    t = build_table(rel)
    saturate_btree(t)
    return t
