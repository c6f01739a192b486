"""
How much smaller can the array be?
==================================

The worst-case cost of a row table with a B-tree against a compressed array
with a position header, as a function of the data ratio and index width.
"""

from fractions import Fraction

from cubestore import CostParams, cost_table, cost_multi, cost_ratio, render_table1

# a TPC-D-like row: three 4-byte keys and an 8-byte measure
p = CostParams(delta=8 / 20, theta=4, S=20, iota=8, N=6_000_965)
print(f"table  {cost_table(p):>14,.0f} bytes")
print(f"array  {cost_multi(p):>14,.0f} bytes")
print(f"ratio  {cost_ratio(p):.2f}")

# N cancels out of the ratio
for n in (1, 1_000, 1_000_000):
    print(n, round(cost_ratio(CostParams(0.4, 4, 20, 8, n)), 12))

# the grid, RID width fixed at 20 % of a row
print(render_table1("0.2").to_text())

# narrower RIDs make the table cheaper, but the ratio never drops to 1
print(render_table1(Fraction(1, 20)).to_text())
