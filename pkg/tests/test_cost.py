from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest

from cubestore.cost import CostParams, cost_multi, cost_ratio, cost_table, ratio, render_table1, round_half_up
from cubestore.errors import DomainError

# Rows are delta = 0, 20, ..., 100 %; columns iota/S = 0, 20, ..., 100 %.
TABLE1 = [
    [None, "9.50", "4.75", "3.17", "2.38", "1.90"],
    ["17.00", "5.67", "3.40", "2.43", "1.89", None],
    ["7.50", "3.75", "2.50", "1.88", None, None],
    ["4.33", "2.60", "1.86", None, None, None],
    ["2.75", "1.83", None, None, None, None],
    ["1.80", None, None, None, None, None],
]


def test_table1_exact():
    t = render_table1("0.2")
    got = [[None if c is None else str(c) for c in row] for row in t.cells]
    assert got == TABLE1


def test_table1_cell_counts():
    flat = [c for row in TABLE1 for c in row]
    assert sum(c is not None for c in flat) == 20
    assert sum(c is None for c in flat) == 16


def test_table1_text_and_csv():
    t = render_table1("0.2")
    text = t.to_text()
    assert "theta/S = 20%" in text and "17.00" in text
    csv_lines = t.to_csv().splitlines()
    assert csv_lines[0] == "delta,0.0,0.2,0.4,0.6,0.8,1.0"
    assert csv_lines[1].startswith("0.0,-,9.50")


@pytest.mark.parametrize(
    "theta_s, delta, iota_s, expect",
    [("0.2", "0.2", "0.2", "5.67"), ("0.2", "0.4", "0.4", "2.50"), ("0.2", "0", "1", "1.90"), ("0.2", "1", "0", "1.80"), ("0.2", "0.2", "0", "17.00")],
)
def test_ratio_examples(theta_s, delta, iota_s, expect):
    r = ratio(Fraction(theta_s), Fraction(delta), Fraction(iota_s))
    assert str(round_half_up(r)) == expect


def test_half_up():
    assert round_half_up(Fraction(17, 3)) == Decimal("5.67")
    assert round_half_up(Fraction(1, 8)) == Decimal("0.13")
    assert round_half_up(Fraction(5, 2)) == Decimal("2.50")


def test_cost_examples():
    p = CostParams(delta=0.4, theta=4, S=20, iota=8, N=100)
    assert cost_table(p) == pytest.approx(6000, rel=1e-12)
    assert cost_multi(p) == pytest.approx(2400, rel=1e-12)
    assert cost_table(CostParams(0, 1, 1, 1, 1)) == 7
    assert cost_multi(CostParams(0.5, 1, 1, 0.5, 1)) == pytest.approx(1.5)
    p0 = CostParams(0, 1, 10, 2, 5)
    assert cost_multi(p0) == 2 * 5 * 2


def test_params_validation():
    with pytest.raises(DomainError):
        CostParams(0.4, 4, 20, 8, 0)
    with pytest.raises(DomainError):
        CostParams(1.0, 4, 20, 8, 10)
    with pytest.raises(DomainError):
        CostParams(0.5, 4, 20, 11, 10)
    with pytest.raises(DomainError):
        ratio(0.2, 0, 0)


def test_ratio_exceeds_one_random(rng):
    for _ in range(1000):
        delta = rng.uniform(0, 1)
        S = rng.uniform(1, 100)
        iota = rng.uniform(1e-9, 1) * (1 - delta) * S
        p = CostParams(delta, rng.uniform(1e-6, 50), S, max(iota, 1e-12), rng.uniform(1, 1e9))
        assert cost_ratio(p) > 1
    for delta in np.linspace(0, 0.99, 100):
        p = CostParams(float(delta), 1e-9, 10, (1 - delta) * 10, 7)
        assert cost_ratio(p) > 1


def test_ratio_independent_of_n():
    rs = [cost_ratio(CostParams(0.3, 4, 20, 8, n)) for n in (1, 10**3, 10**6)]
    assert rs[0] == pytest.approx(rs[1], rel=1e-12) == pytest.approx(rs[2], rel=1e-12)
    assert cost_table(CostParams(0.3, 4, 20, 8, 10**6)) / cost_multi(CostParams(0.3, 4, 20, 8, 10**6)) == pytest.approx(rs[0])


def test_monotonicity_on_grid():
    t = Fraction(1, 5)
    grid = [Fraction(i, 20) for i in range(21)]
    for d in grid[:-1]:
        admissible = [i for i in grid if i <= 1 - d and (d, i) != (0, 0)]
        vals = [ratio(t, d, i) for i in admissible]
        assert all(a > b for a, b in zip(vals, vals[1:]))
    for i in grid:
        ds = [d for d in grid[:-1] if i <= 1 - d and (d, i) != (0, 0)]
        vals = [ratio(t, d, i) for d in ds]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_render_needs_grid():
    with pytest.raises(DomainError):
        render_table1("0.2", [], ["0"])
