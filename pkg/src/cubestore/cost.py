"""Worst-case storage cost of the table and the compressed-array representations.

    delta   data ratio, non-key bytes / row bytes, 0 <= delta < 1
    theta   RID width of the B-tree
    S       row width
    iota    one-dimensional index width
    N       number of cells (rows)

``C_T = N S + 2 (1 - delta) N S + 4 N theta``
``C_M = delta N S + 2 N iota``
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Sequence

from .errors import DomainError

DEFAULT_GRID = ("0", "0.2", "0.4", "0.6", "0.8", "1")


@dataclass(frozen=True)
class CostParams:
    delta: float
    theta: float
    S: float
    iota: float
    N: float

    def __post_init__(self):
        if not 0 <= self.delta < 1:
            raise DomainError(f"data ratio must satisfy 0 <= delta < 1, got {self.delta}")
        for name in ("theta", "S", "iota", "N"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        # iota <= key width
        if self.iota > (1 - self.delta) * self.S * (1 + 1e-12):
            raise DomainError(
                f"index width {self.iota} exceeds key width {(1 - self.delta) * self.S}"
            )


def cost_table(p: CostParams) -> float:
    return p.N * p.S + 2 * (1 - p.delta) * p.N * p.S + 4 * p.N * p.theta


def cost_multi(p: CostParams) -> float:
    return p.delta * p.N * p.S + 2 * p.N * p.iota


def ratio(theta_over_s, delta, iota_over_s):
    """C_T / C_M in relative terms; exact when given Fractions.

    Raises DomainError at the singular point ``delta = iota/S = 0``.
    """
    denom = delta + 2 * iota_over_s
    if denom == 0:
        raise DomainError("cost ratio undefined: delta = 0 and iota = 0")
    return (3 - 2 * delta + 4 * theta_over_s) / denom


def cost_ratio(p: CostParams) -> float:
    """C_T / C_M. N cancels out."""
    return ratio(p.theta / p.S, p.delta, p.iota / p.S)


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def round_half_up(x: Fraction, places: int = 2) -> Decimal:
    """Exact half-up rounding of a non-negative rational."""
    scaled = math.floor(x * 10**places + Fraction(1, 2))
    return Decimal(scaled).scaleb(-places)


@dataclass(frozen=True)
class CostTable:
    theta_over_s: Fraction
    deltas: tuple[Fraction, ...]
    iotas: tuple[Fraction, ...]
    cells: tuple[tuple[Decimal | None, ...], ...]  # None renders as a dash

    def to_text(self) -> str:
        def pct(f):
            return f"{float(f) * 100:g}%"

        rows = [["delta", *(pct(i) for i in self.iotas)]]
        for d, line in zip(self.deltas, self.cells):
            rows.append([pct(d), *("-" if c is None else str(c) for c in line)])
        widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
        out = [f"theta/S = {pct(self.theta_over_s)}", " " * (widths[0] + 2) + "iota/S"]
        for r in rows:
            out.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", *(str(float(i)) for i in self.iotas)])
        for d, line in zip(self.deltas, self.cells):
            w.writerow([str(float(d)), *("-" if c is None else str(c) for c in line)])
        return buf.getvalue()


def render_table1(
    theta_over_s="0.2", deltas: Sequence = DEFAULT_GRID, iotas: Sequence = DEFAULT_GRID
) -> CostTable:
    """Grid of C_T / C_M, rounded half-up to two decimals.

    A cell is a dash where the index would be wider than the key
    (``iota/S > 1 - delta``) or where the ratio is undefined.
    """
    if not deltas or not iotas:
        raise DomainError("grids must be non-empty")
    t = _frac(theta_over_s)
    ds = tuple(_frac(d) for d in deltas)
    ios = tuple(_frac(i) for i in iotas)
    cells = []
    for d in ds:
        line = []
        for i in ios:
            if i > 1 - d or (d == 0 and i == 0):
                line.append(None)
            else:
                line.append(round_half_up(ratio(t, d, i)))
        cells.append(tuple(line))
    return CostTable(t, ds, ios, tuple(cells))
