"""Position-translation headers for the compressed cell array.

The compressed array holds the measures of the nonempty cells in ascending
logical order, so a cell's *physical* position is its rank among nonempty
cells. Each header maps logical positions to physical ones and back:

* :class:`SchcHeader` keeps one ``(L_j, V_j)`` pair per run of consecutive
  nonempty cells, where ``L_j`` is the run's first logical position and
  ``V_j`` the number of empty cells before it.
* :class:`LpcHeader` keeps the logical position of every nonempty cell.
* :class:`BocHeader` splits that sequence into a wide base entry per block of
  ``l`` cells plus a narrow offset per cell.

Scalar lookups return ``None`` for an empty cell. The ``*_many`` variants are
vectorized and return ``-1`` for empty cells.
"""

from __future__ import annotations

import enum
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import CapacityError, DomainError
from .relation import INDEX_WIDTH, EncodedRelation

OFFSET_DTYPES = {1: np.dtype("<u1"), 2: np.dtype("<u2"), 4: np.dtype("<u4")}
DEFAULT_BLOCK = 64
DEFAULT_OFFSET_WIDTH = 4


def _check_logical(L, total_cells):
    if not 0 <= L < total_cells:
        raise DomainError(f"logical position {L} out of range [0, {total_cells})")


def _check_physical(P, n):
    if not 0 <= P < n:
        raise DomainError(f"physical position {P} out of range [0, {n})")


def _check_logical_many(Ls, total_cells):
    Ls = np.asarray(Ls, dtype=np.int64)
    if Ls.size and (Ls.min() < 0 or Ls.max() >= total_cells):
        raise DomainError(f"logical position out of range [0, {total_cells})")
    return Ls


def _readonly(a):
    a = np.ascontiguousarray(a)
    if not a.dtype.isnative:
        a = a.astype(a.dtype.newbyteorder("="))
    a.flags.writeable = False
    return a


def _view(a: np.ndarray) -> memoryview:
    # scalar searches bisect a memoryview: plain-int indexing, no numpy scalars
    return memoryview(a)


@dataclass(frozen=True, eq=False)
class SchcHeader:
    starts: np.ndarray  # L_j
    empties: np.ndarray  # V_j
    n: int
    total_cells: int
    width: int = INDEX_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "starts", _readonly(np.asarray(self.starts, dtype=np.int64)))
        object.__setattr__(self, "empties", _readonly(np.asarray(self.empties, dtype=np.int64)))
        object.__setattr__(self, "_phys", _readonly(self.starts - self.empties))
        object.__setattr__(self, "_s", _view(self.starts))
        object.__setattr__(self, "_v", _view(self.empties))
        object.__setattr__(self, "_p", _view(self._phys))

    @property
    def runs(self) -> int:
        return int(self.starts.size)

    @property
    def physical_starts(self) -> np.ndarray:
        return self._phys

    @property
    def nbytes(self) -> int:
        return 2 * self.runs * self.width

    def lookup(self, L: int):
        _check_logical(L, self.total_cells)
        j = bisect_right(self._s, L) - 1
        if j < 0:
            return None
        p = L - self._v[j]
        end = self._p[j + 1] if j + 1 < len(self._p) else self.n
        return p if p < end else None

    def logical(self, P: int) -> int:
        _check_physical(P, self.n)
        j = bisect_right(self._p, P) - 1
        return P + self._v[j]

    def lookup_many(self, Ls) -> np.ndarray:
        Ls = _check_logical_many(Ls, self.total_cells)
        j = np.searchsorted(self.starts, Ls, side="right") - 1
        jc = np.maximum(j, 0)
        p = Ls - self.empties[jc]
        ends = np.append(self._phys[1:], self.n)[jc]
        return np.where((j >= 0) & (p < ends), p, -1)


def build_schc(rel: EncodedRelation) -> SchcHeader:
    if rel.n == 0:
        raise DomainError("cannot build a header for an empty relation")
    pos = rel.positions
    first = np.ones(pos.size, dtype=bool)
    first[1:] = np.diff(pos) != 1
    idx = np.flatnonzero(first)
    starts = pos[idx]
    # idx is the physical position of each run start
    return SchcHeader(starts, starts - idx, rel.n, rel.schema.total_cells)


@dataclass(frozen=True, eq=False)
class LpcHeader:
    positions: np.ndarray
    total_cells: int
    width: int = INDEX_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "positions", _readonly(np.asarray(self.positions, dtype=np.int64)))
        object.__setattr__(self, "_L", _view(self.positions))

    @property
    def n(self) -> int:
        return int(self.positions.size)

    @property
    def nbytes(self) -> int:
        return self.n * self.width

    def lookup(self, L: int):
        _check_logical(L, self.total_cells)
        j = bisect_left(self._L, L)
        if j < len(self._L) and self._L[j] == L:
            return j
        return None

    def logical(self, P: int) -> int:
        _check_physical(P, self.n)
        return self._L[P]

    def lookup_many(self, Ls) -> np.ndarray:
        Ls = _check_logical_many(Ls, self.total_cells)
        j = np.searchsorted(self.positions, Ls, side="left")
        hit = j < self.n
        hit[hit] = self.positions[j[hit]] == Ls[hit]
        return np.where(hit, j, -1)


def build_lpc(rel: EncodedRelation) -> LpcHeader:
    if rel.n == 0:
        raise DomainError("cannot build a header for an empty relation")
    return LpcHeader(rel.positions.copy(), rel.schema.total_cells)


@dataclass(frozen=True, eq=False)
class BocHeader:
    base: np.ndarray
    offsets: np.ndarray
    block: int
    total_cells: int
    width: int = INDEX_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "base", _readonly(np.asarray(self.base, dtype=np.int64)))
        object.__setattr__(self, "offsets", _readonly(self.offsets))
        object.__setattr__(self, "_b", _view(self.base))
        object.__setattr__(self, "_o", _view(self.offsets))

    @property
    def n(self) -> int:
        return int(self.offsets.size)

    @property
    def offset_width(self) -> int:
        return self.offsets.dtype.itemsize

    @property
    def base_nbytes(self) -> int:
        return int(self.base.size) * self.width

    @property
    def offset_nbytes(self) -> int:
        return self.n * self.offset_width

    @property
    def nbytes(self) -> int:
        return self.base_nbytes + self.offset_nbytes

    def logical(self, j: int) -> int:
        _check_physical(j, self.n)
        return self._b[j // self.block] + self._o[j]

    def lookup(self, L: int):
        _check_logical(L, self.total_cells)
        # stage 1: the base array
        k = bisect_right(self._b, L) - 1
        if k < 0:
            return None
        lo = k * self.block
        hi = min(lo + self.block, len(self._o))
        target = L - self._b[k]
        # stage 2: this block's offsets
        i = bisect_left(self._o, target, lo, hi)
        return i if i < hi and self._o[i] == target else None

    def lookup_many(self, Ls) -> np.ndarray:
        Ls = _check_logical_many(Ls, self.total_cells)
        k = np.searchsorted(self.base, Ls, side="right") - 1
        kc = np.maximum(k, 0)
        target = Ls - self.base[kc]
        lo = kc * self.block
        hi = np.minimum(lo + self.block, self.n)
        # binary search within each block, all queries in lockstep
        left, right = lo.copy(), hi.copy()
        off = self.offsets.astype(np.int64)
        while True:
            active = left < right
            if not active.any():
                break
            mid = (left + right) // 2
            less = np.zeros_like(active)
            less[active] = off[mid[active]] < target[active]
            left = np.where(active & less, mid + 1, left)
            right = np.where(active & ~less, mid, right)
        found = (k >= 0) & (left < hi)
        found[found] = off[left[found]] == target[found]
        return np.where(found, left, -1)


def block_spans(positions: np.ndarray, block: int) -> np.ndarray:
    """In-block spans L_{(k+1)l-1} - L_{kl}, with the last block truncated at N."""
    positions = np.asarray(positions, dtype=np.int64)
    starts = np.arange(0, positions.size, block)
    ends = np.minimum(starts + block, positions.size) - 1
    return positions[ends] - positions[starts]


def build_boc(
    positions, block: int = DEFAULT_BLOCK, offset_width: int = DEFAULT_OFFSET_WIDTH, total_cells=None
) -> BocHeader:
    """Base-offset header over a strictly increasing position sequence.

    ``positions`` may be an :class:`LpcHeader`, an :class:`EncodedRelation` or
    a plain array (then ``total_cells`` defaults to ``positions[-1] + 1``).
    """
    if isinstance(positions, (LpcHeader, EncodedRelation)):
        total_cells = positions.total_cells if isinstance(positions, LpcHeader) else positions.schema.total_cells
        positions = positions.positions
    positions = np.asarray(positions, dtype=np.int64)
    if block < 1:
        raise DomainError(f"block length must be >= 1, got {block}")
    if offset_width not in OFFSET_DTYPES:
        raise DomainError(f"offset width must be one of {sorted(OFFSET_DTYPES)}, got {offset_width}")
    if positions.size == 0:
        raise DomainError("cannot build a header for an empty relation")
    if total_cells is None:
        total_cells = int(positions[-1]) + 1
    spans = block_spans(positions, block)
    limit = 2 ** (8 * offset_width) - 1
    over = np.flatnonzero(spans > limit)
    if over.size:
        worst = int(spans.max())
        feasible = next((w for w in sorted(OFFSET_DTYPES) if worst <= 2 ** (8 * w) - 1), None)
        hint = f"minimal feasible offset width is {feasible}" if feasible else "no offset width below 8 bytes fits"
        raise CapacityError(
            f"block {int(over[0])} spans {int(spans[over[0]])} > {limit} "
            f"(offset width {offset_width}); {hint}"
        )
    base = positions[::block]
    offsets = positions - np.repeat(base, block)[: positions.size]
    return BocHeader(base, offsets.astype(OFFSET_DTYPES[offset_width]), block, int(total_cells))


class RunScheme(enum.Enum):
    SCHC = "schc"
    LPC = "lpc"


def choose_run_scheme(n: int, runs: int) -> RunScheme:
    """LPC exactly when N/2 < runs; ties go to SCHC."""
    if not 1 <= runs <= n:
        raise DomainError(f"run count {runs} outside [1, {n}]")
    return RunScheme.LPC if n < 2 * runs else RunScheme.SCHC


class BocProfitability(NamedTuple):
    sufficient_exact: bool
    sufficient_approx: bool
    ratio: Fraction


def boc_profitability(index_width, offset_width, block, n) -> BocProfitability:
    """Sufficient conditions for a base-offset header beating a full position list.

    exact:  width/l + width/N + theta < width
    approx: width/l + theta < width
    ratio:  (width/l + theta) / width
    """
    for name, v in (("index width", index_width), ("offset width", offset_width), ("block", block), ("N", n)):
        if v <= 0:
            raise DomainError(f"{name} must be positive, got {v}")
    w, th, l, n = (Fraction(x) for x in (index_width, offset_width, block, n))
    exact = w / l + w / n + th < w
    approx = w / l + th < w
    return BocProfitability(exact, approx, (w / l + th) / w)


class HeaderSizes(NamedTuple):
    schc: int
    schc_worst: int
    lpc: int
    boc_base: int
    boc_offsets: int

    @property
    def boc(self) -> int:
        return self.boc_base + self.boc_offsets


def header_sizes(n, runs, index_width=INDEX_WIDTH, offset_width=DEFAULT_OFFSET_WIDTH, block=DEFAULT_BLOCK) -> HeaderSizes:
    if n < 1 or not 1 <= runs <= n or index_width < 1 or offset_width < 1 or block < 1:
        raise DomainError("header_sizes needs positive parameters with runs <= n")
    return HeaderSizes(
        schc=2 * runs * index_width,
        schc_worst=2 * n * index_width,
        lpc=n * index_width,
        boc_base=((n - 1) // block + 1) * index_width,
        boc_offsets=n * offset_width,
    )
