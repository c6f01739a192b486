import numpy as np
import pytest

from cubestore.datagen import SyntheticSpec, gen_synthetic
from cubestore.errors import DomainError, IntegrityError
from cubestore.relation import EncodedRelation, Measure, RelationSchema
from cubestore.table import (
    PAGE_SIZE,
    BTree,
    ascending_btree,
    btree_lookup,
    build_table,
    build_table_rep,
    index_envelope,
    key_int,
    key_ordinals,
    page_capacity,
    saturate_btree,
    table_sizes,
)

from conftest import random_relation, relation_from_positions


def test_row_sizes():
    assert RelationSchema.from_shape((2, 2, 2)).k == 3
    t = build_table(relation_from_positions((5, 5, 5), [3]))
    assert t.row_size == 20
    assert t.nbytes == 20
    # TPC-D shape: 6,000,965 rows of 20 bytes
    assert 6_000_965 * t.row_size == 120_019_300
    # APB-1 shape: four key fields and an 8-byte measure
    assert 644_436_000 % 26_851_500 == 0 and 644_436_000 // 26_851_500 == 24
    t4 = build_table(relation_from_positions((2, 2, 2, 2), [0]))
    assert t4.row_size == 24


def test_page_capacity():
    assert page_capacity(3) == 145
    assert page_capacity(1) == 204
    tree = BTree(3)
    assert tree.capacity * (4 * 3 + 16) + 3 + 8 <= PAGE_SIZE


def test_key_int_order_matches_linear_order():
    rel = relation_from_positions((3, 4, 2), range(24))
    ints = [key_int(c) for c in rel.coords().tolist()]
    assert ints == sorted(ints)
    assert key_ordinals(key_int((2, 3, 1)), 3) == (2, 3, 1)


def test_single_row():
    t = build_table_rep(relation_from_positions((4, 4), [5], [42]))
    assert t.index.page_count == 1
    assert table_sizes(t).index == PAGE_SIZE
    assert btree_lookup(t, (1, 1)) == 42
    assert btree_lookup(t, (0, 0)) is None


def test_saturation_beats_ascending_on_1000_keys():
    rel = relation_from_positions((1000,), np.arange(1000))
    t = build_table(rel)
    sat = saturate_btree(t)
    asc = ascending_btree(t)
    assert sat.page_count <= asc.page_count
    assert sat.leaf_fill() > asc.leaf_fill()
    sat.check()
    asc.check()
    for i in range(1000):
        assert btree_lookup(t, (i,)) == rel.values[i]


@pytest.mark.parametrize("seed", range(8))
def test_lookup_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    rel = random_relation(rng)
    t = build_table_rep(rel)
    t.index.check()
    vals, mask = rel.dense()
    for L, idx in enumerate(map(tuple, np.ndindex(*rel.schema.shape[::-1]))):
        idx = idx[::-1]
        got = t.lookup(idx)
        assert got == (vals[L] if mask[L] else None)


def test_lookup_errors():
    t = build_table(relation_from_positions((4, 4), [5]))
    with pytest.raises(DomainError, match="no index"):
        btree_lookup(t, (1, 1))
    saturate_btree(t)
    with pytest.raises(DomainError):
        btree_lookup(t, (1,))
    with pytest.raises(DomainError):
        btree_lookup(t, (4, 0))


def test_real_measure_rows():
    rel = relation_from_positions((4,), [1, 2])
    rel = EncodedRelation(
        RelationSchema.from_shape((4,), Measure(kind="real", width=4)), rel.dictionaries, rel.positions, [1.5, 2.5]
    )
    t = build_table_rep(rel)
    assert t.row_size == 8
    assert t.lookup((2,)) == 2.5


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_envelope_and_structure(k):
    shape = {1: (50_000,), 2: (300, 200), 3: (60, 50, 40), 4: (20, 20, 15, 10)}[k]
    rel = gen_synthetic(SyntheticSpec(shape, 12_000, 6_000, seed=k))
    t = build_table_rep(rel)
    t.index.check()
    best, worst = index_envelope(t)
    assert best <= t.index.nbytes <= worst
    asc = ascending_btree(t)
    assert t.index.page_count <= asc.page_count


def test_duplicate_insert_rejected():
    tree = BTree(1)
    tree.insert(5, 0)
    with pytest.raises(IntegrityError):
        tree.insert(5, 1)
