"""
From keys to positions to headers
=================================

Walk through how a tiny sparse relation becomes a compressed cell array and
how each position header finds a cell again.
"""

import numpy as np

from cubestore import DimensionDecl, SchemaDecl, encode_relation, linearize, delinearize, stats
from cubestore import build_schc, build_lpc, build_boc

# a 3 x 4 cube of (store, week) -> sales; only three cells are populated
decl = SchemaDecl((DimensionDecl("store", 3), DimensionDecl("week", 4, "int")))
rel = encode_relation([("north", 1, 120), ("south", 1, 80), ("north", 2, 95)], decl)
print("dictionaries:", rel.dictionaries)

# dimension 1 varies fastest, so (store=1, week=0) is cell 1 and (0, 1) is cell 3
print("positions:", rel.positions, "values:", rel.values)
print("(1, 1) ->", linearize((1, 1), rel.schema), "| 7 ->", delinearize(7, rel.schema))

# the dense picture, E for empty, F for filled
vals, mask = rel.dense()
print("".join("F" if m else "E" for m in mask))

s = stats(rel)
print(f"density {s.density_exact} = {s.density:.3f}, runs {s.runs}")

# SCHC: one (first position, empties before it) pair per run
schc = build_schc(rel)
print("SCHC pairs:", list(zip(schc.starts.tolist(), schc.empties.tolist())))

# LPC: every position; BOC: one wide base per block plus narrow offsets
lpc = build_lpc(rel)
boc = build_boc(rel, block=2, offset_width=1)
print("LPC:", lpc.positions.tolist())
print("BOC base:", boc.base.tolist(), "offsets:", boc.offsets.tolist())

# all three translate logical -> physical identically, None meaning empty
for L in range(rel.schema.total_cells):
    answers = {h.lookup(L) for h in (schc, lpc, boc)}
    assert len(answers) == 1
    p = answers.pop()
    print(L, "->", "empty" if p is None else f"slot {p}, value {rel.values[p]}")

# and back again
print("physical 2 is logical", lpc.logical(2), schc.logical(2), boc.logical(2))

# vectorized form for many positions at once; -1 marks empty
print(boc.lookup_many(np.arange(rel.schema.total_cells)))
