import numpy as np
import pytest

from cubestore.datagen import sample_relation
from cubestore.relation import EncodedRelation, RelationSchema


def relation_from_positions(shape, positions, values=None):
    schema = RelationSchema.from_shape(shape)
    positions = np.asarray(positions, dtype=np.int64)
    if values is None:
        values = np.arange(1, positions.size + 1) * 10
    return EncodedRelation(schema, tuple(tuple(range(c)) for c in shape), positions, values)


def random_relation(rng, max_dims=4, max_cells=10_000, min_density=0.01, max_density=0.9):
    k = int(rng.integers(1, max_dims + 1))
    while True:
        shape = tuple(int(x) for x in rng.integers(1, 40, size=k))
        if np.prod(shape) <= max_cells:
            break
    density = float(rng.uniform(min_density, max_density))
    return sample_relation(rng, shape, density)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sample_3x4():
    # L = [1, 2, 5] in a 3 x 4 grid
    return relation_from_positions((3, 4), [1, 2, 5])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
