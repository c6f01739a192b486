from fractions import Fraction

import numpy as np
import pytest

from cubestore.chunks import ChunkSpec, DenseChunk, SparseChunk, build_chunks, chunk_stats, lookup_all
from cubestore.datagen import sample_relation
from cubestore.errors import DomainError
from cubestore.relation import EncodedRelation, RelationSchema, linearize

from conftest import random_relation, relation_from_positions


def _from_coords(shape, coords, values=None):
    s = RelationSchema.from_shape(shape)
    coords = np.asarray(coords)
    if values is None:
        values = np.arange(1, len(coords) + 1)
    return EncodedRelation.from_ordinals(s, coords, values)


def test_corner_chunk_dense():
    # 4x4 grid, 2x2 chunks, three cells in chunk 0
    rel = _from_coords((4, 4), [(0, 0), (1, 0), (0, 1)])
    store = build_chunks(rel, ChunkSpec((4, 4), (2, 2)))
    assert set(store.chunks) == {0}
    assert isinstance(store.chunks[0], DenseChunk)
    assert store.chunks[0].slots == 4
    for cid in (1, 2, 3):
        ch = store.chunk(cid)
        assert isinstance(ch, SparseChunk) and ch.nonempty == 0


def test_sparse_and_dense_by_threshold():
    # one 2x4 chunk spanning the whole grid
    spec = ChunkSpec((2, 4), (2, 4))
    sparse = build_chunks(_from_coords((2, 4), [(0, 0), (1, 3)]), spec)
    ch = sparse.chunks[0]
    assert isinstance(ch, SparseChunk)
    assert ch.offsets.tolist() == [0, 7]
    dense = build_chunks(_from_coords((2, 4), [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2)]), spec)
    assert isinstance(dense.chunks[0], DenseChunk)
    assert dense.chunks[0].slots == 8


def test_threshold_is_strict():
    # exactly 40% stays sparse
    spec = ChunkSpec((10,), (10,))
    at = build_chunks(relation_from_positions((10,), [0, 1, 2, 3]), spec)
    assert isinstance(at.chunks[0], SparseChunk)
    above = build_chunks(relation_from_positions((10,), [0, 1, 2, 3, 4]), spec)
    assert isinstance(above.chunks[0], DenseChunk)


def test_minimal_dense_ratio_just_under_bound():
    # 5 of 12 cells: density 0.4166..., slots / nonempty = 2.4
    rel = relation_from_positions((12,), [0, 2, 4, 6, 8])
    store = build_chunks(rel, ChunkSpec((12,), (12,)))
    st = chunk_stats(store).chunks[0]
    assert st.dense
    assert Fraction(st.slots, st.nonempty) == Fraction(12, 5) < Fraction(5, 2)


def test_chunk_bytes():
    rel = relation_from_positions((8,), [0, 1, 2, 3])
    store = build_chunks(rel, ChunkSpec((8,), (8,)))
    st = chunk_stats(store)
    assert st.chunks[0].dense and st.chunks[0].density == Fraction(1, 2)
    assert st.nbytes == 8 * 8 + 1
    rel = relation_from_positions((8,), [0, 5])
    store = build_chunks(rel, ChunkSpec((8,), (8,)))
    assert store.offset_width == 1
    assert chunk_stats(store).nbytes == 2 * (1 + 8)


def test_ragged_boundary_chunks():
    spec = ChunkSpec((5, 3), (2, 2))
    assert spec.grid == (3, 2)
    assert spec.chunk_dims(2) == (1, 2)
    assert spec.chunk_dims(5) == (1, 1)
    rel = _from_coords((5, 3), [(4, 2)], [7])
    store = build_chunks(rel, spec)
    assert store.locate((4, 2)) == (5, 0)
    assert store.lookup((4, 2)) == 7


def test_offsets_restart_per_chunk():
    rel = _from_coords((4, 4), [(3, 3)])
    store = build_chunks(rel, ChunkSpec((4, 4), (2, 2)))
    assert store.chunks[3].offsets.tolist() == [3]


def test_spec_validation():
    with pytest.raises(DomainError):
        ChunkSpec((4, 4), (5, 2))
    with pytest.raises(DomainError):
        ChunkSpec((4, 4), (2,))
    with pytest.raises(DomainError):
        build_chunks(relation_from_positions((4,), [1]), ChunkSpec((5,), (2,)))
    assert ChunkSpec.default((100, 3)).chunk_shape == (16, 3)


def test_lookup_out_of_range():
    store = build_chunks(relation_from_positions((4,), [1]))
    with pytest.raises(DomainError):
        store.lookup((4,))
    with pytest.raises(DomainError):
        store.chunk(99)


def test_exhaustive_10x10x10(rng):
    rel = sample_relation(rng, (10, 10, 10), 0.3)
    store = build_chunks(rel, ChunkSpec((10, 10, 10), (4, 3, 5)))
    vals, mask = rel.dense()
    for L in range(1000):
        idx = (L % 10, (L // 10) % 10, L // 100)
        assert linearize(idx, rel.schema) == L
        got = store.lookup(idx)
        assert got == (vals[L] if mask[L] else None)


@pytest.mark.parametrize("seed", range(10))
def test_classification_and_partition(seed):
    rng = np.random.default_rng(seed)
    rel = random_relation(rng)
    edges = tuple(int(rng.integers(1, c + 1)) for c in rel.schema.shape)
    store = build_chunks(rel, ChunkSpec(rel.schema.shape, edges))
    summary = chunk_stats(store)
    assert summary.nonempty == rel.n
    for st in summary.chunks:
        assert st.dense == (st.density > Fraction(2, 5))
        if st.dense:
            assert st.slots < Fraction(5, 2) * st.nonempty
    for ch in store.chunks.values():
        if isinstance(ch, SparseChunk):
            assert np.all(np.diff(ch.offsets.astype(np.int64)) > 0)
    vals, mask = rel.dense()
    got, found = lookup_all(store, np.arange(rel.schema.total_cells))
    assert np.array_equal(found, mask)
    assert np.array_equal(got[mask], vals[mask])


def test_custom_threshold():
    rel = relation_from_positions((10,), [0, 1])
    store = build_chunks(rel, ChunkSpec((10,), (10,)), threshold="0.1")
    assert isinstance(store.chunks[0], DenseChunk)
