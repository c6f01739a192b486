"""
Chunked storage and conjoint dimensions
=======================================

Two other ways of shrinking a sparse array: cut it into chunks that are
stored dense or as pairs, or fold leading dimensions into one.
"""

import numpy as np

from cubestore import ChunkSpec, build_chunks, chunk_stats, build_conjoint, conjoint_density
from cubestore.datagen import sample_relation
from cubestore.relation import EncodedRelation

rng = np.random.default_rng(1)

# a 40 x 30 x 6 relation at about 15 % density
rel = sample_relation(rng, (40, 30, 6), 0.15)
print("cells:", rel.n, "of", rel.schema.total_cells)

spec = ChunkSpec(rel.schema.shape, (8, 8, 3))
print("chunk grid:", spec.grid, "->", spec.chunk_count, "chunks")

store = build_chunks(rel, spec)
summary = chunk_stats(store)
dense = [c for c in summary.chunks if c.dense]
print(f"{len(dense)} dense and {len(summary.chunks) - len(dense)} sparse chunks, {summary.empty_chunks} empty")
print("chunk store bytes:", summary.nbytes, "vs plain 8-byte array:", 8 * rel.schema.total_cells)

# raise the density of a few chunks past the 40 % threshold
coords = rel.coords()
extra = np.array([(i, j, k) for i in range(8) for j in range(8) for k in range(3) if (i + j + k) % 2])
keep = ~((coords[:, 0] < 8) & (coords[:, 1] < 8) & (coords[:, 2] < 3))
merged = np.vstack([coords[keep], extra])
rel2 = EncodedRelation.from_ordinals(rel.schema, merged, np.arange(len(merged)))
summary2 = chunk_stats(build_chunks(rel2, spec))
print("after filling one chunk:", sum(c.dense for c in summary2.chunks), "dense chunk(s)")
for c in summary2.chunks:
    if c.dense:
        # the dense layout never wastes more than 2.5 slots per stored cell
        print("  chunk", c.chunk_id, "slots/nonempty =", c.slots / c.nonempty)

# conjoint: fold (dim 1, dim 2) into the combinations that actually occur
conj = build_conjoint(rel, 2)
print("conjoint members:", conj.size, "of", 40 * 30, "possible pairs")
print("new shape:", conj.relation.schema.shape)
rho, rho2 = conjoint_density(rel, 2)
print(f"density {float(rho):.3f} -> {float(rho2):.3f}")

# the transform loses nothing
idx = tuple(int(x) for x in conj.relation.coords()[5])
print(idx, "is", conj.to_source(idx), "in the source relation")
