"""End-to-end acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line (visible with
``-s``) and the lines are repeated in the pytest terminal summary.
"""

import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from cubestore.bench import BenchConfig, build_representations, lookup_functions, run_bench
from cubestore.chunks import ChunkSpec, DenseChunk, SparseChunk, _chunk_coordinates, build_chunks, chunk_stats, lookup_all
from cubestore.cost import CostParams, cost_ratio, render_table1
from cubestore.datagen import SyntheticSpec, gen_synthetic, sample_relation
from cubestore.headers import (
    RunScheme,
    boc_profitability,
    build_boc,
    build_lpc,
    build_schc,
    choose_run_scheme,
    header_sizes,
)
from cubestore.relation import delinearize_many, stats
from cubestore.storage import ENVELOPE, load_build, representation_report, save_build, save_boc, save_lpc
from cubestore.table import ascending_btree, build_table, index_envelope, saturate_btree

RESULTS: list[str] = []


@contextmanager
def criterion(number: int, title: str, budget: float | None = None, spent: float = 0.0):
    """``spent`` adds time already used outside the block, e.g. by a fixture."""
    t0 = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - t0 + spent
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.2f} s, budget {budget} s"
    except BaseException as exc:
        line = f"criterion {number:>2}: FAIL  {title} ({type(exc).__name__}: {exc})"
        RESULTS.append(line)
        print(line)
        raise
    line = f"criterion {number:>2}: PASS  {title} ({elapsed:.2f} s)"
    RESULTS.append(line)
    print(line)


def _random_relation(rng, max_dims=4, max_cells=10_000, densities=(0.01, 0.9)):
    k = int(rng.integers(1, max_dims + 1))
    while True:
        shape = tuple(int(x) for x in rng.integers(1, 60, size=k))
        if int(np.prod(shape)) <= max_cells:
            break
    return sample_relation(rng, shape, float(rng.uniform(*densities)))


def _payload(path) -> int:
    return ENVELOPE.unpack(Path(path).read_bytes()[: ENVELOPE.size])[4]


# published cost grid at theta/S = 20 %; None is a dash.
TABLE1 = [
    [None, "9.50", "4.75", "3.17", "2.38", "1.90"],
    ["17.00", "5.67", "3.40", "2.43", "1.89", None],
    ["7.50", "3.75", "2.50", "1.88", None, None],
    ["4.33", "2.60", "1.86", None, None, None],
    ["2.75", "1.83", None, None, None, None],
    ["1.80", None, None, None, None, None],
]


def test_c01_table1_reproduction():
    with criterion(1, "cost table reproduces every entry and dash", budget=1.0):
        t = render_table1("0.2")
        got = [[None if c is None else str(c) for c in row] for row in t.cells]
        assert got == TABLE1
        flat = [c for row in got for c in row]
        assert sum(c is not None for c in flat) == 20


def test_c02_ratio_exceeds_one():
    with criterion(2, "ratio > 1 on 1,000 admissible tuples plus the boundary", budget=1.0):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            delta = float(rng.uniform(0, 1))
            S = float(rng.uniform(0.5, 200))
            iota = float(rng.uniform(0, 1)) * (1 - delta) * S
            p = CostParams(delta, float(rng.uniform(1e-6, 100)), S, max(iota, 1e-12), float(rng.uniform(1, 1e9)))
            assert cost_ratio(p) > 1
        for delta in np.linspace(0, 0.999, 200):
            S = 20.0
            p = CostParams(float(delta), 1e-9, S, (1 - float(delta)) * S, 1e6)
            assert cost_ratio(p) > 1


def test_c03_header_size_arithmetic():
    with criterion(3, "header sizes at N=6,000,965 match the reference figures", budget=1.0):
        s = header_sizes(6_000_965, 6_000_568, 8, 4, 64)
        assert s.lpc == 48_007_720
        assert s.boc_base == 750_128
        assert s.boc_offsets == 24_003_860
        assert s.schc == 96_009_088
        assert round(s.schc / 2**20, 1) == 91.6
        assert boc_profitability(8, 4, 64, 6_000_965).ratio == Fraction("0.515625")


def test_c04_oracle_equivalence():
    with criterion(4, "200 random relations: all six lookups agree on every cell", budget=60.0):
        rng = np.random.default_rng(4)
        mismatches = 0
        for _ in range(200):
            rel = _random_relation(rng)
            total = rel.schema.total_cells
            vals, mask = rel.dense()
            oracle_phys = np.where(mask, np.cumsum(mask) - 1, -1)
            all_L = np.arange(total)
            block = int(rng.integers(1, 80))
            for h in (build_schc(rel), build_lpc(rel), build_boc(rel, block, 4)):
                got = h.lookup_many(all_L)
                mismatches += int(np.count_nonzero(got != oracle_phys))
            edges = tuple(int(rng.integers(1, c + 1)) for c in rel.schema.shape)
            store = build_chunks(rel, ChunkSpec(rel.schema.shape, edges))
            cv, found = lookup_all(store, all_L)
            mismatches += int(np.count_nonzero(found != mask))
            mismatches += int(np.count_nonzero(cv[mask] != vals[mask]))
            t = build_table(rel)
            saturate_btree(t)
            want = [v if m else None for v, m in zip(vals.tolist(), mask.tolist())]
            got = [t.lookup(idx) for idx in delinearize_many(all_L, rel.schema).tolist()]
            mismatches += sum(a != b for a, b in zip(got, want))
        assert mismatches == 0


def test_c05_selection_and_profitability():
    with criterion(5, "scheme selection and BOC profitability laws hold", budget=5.0):
        rng = np.random.default_rng(5)
        violations = 0
        for _ in range(10_000):
            n = int(rng.integers(1, 10**10))
            runs = int(rng.integers(1, n + 1))
            s = header_sizes(n, runs)
            want = RunScheme.LPC if s.lpc < s.schc else RunScheme.SCHC
            violations += choose_run_scheme(n, runs) is not want
            block = int(rng.integers(1, 200))
            theta = int(rng.choice([1, 2, 4]))
            if boc_profitability(8, theta, block, n).sufficient_exact:
                violations += not header_sizes(n, runs, 8, theta, block).boc < s.lpc
        assert violations == 0


def test_c05_serialized_payloads(tmp_path):
    with criterion(5, "serialized BOC payload < LPC payload whenever the exact test holds", budget=5.0):
        rng = np.random.default_rng(55)
        checked = 0
        for i in range(100):
            rel = _random_relation(rng)
            block, theta = int(rng.integers(1, 100)), 4
            if not boc_profitability(8, theta, block, rel.n).sufficient_exact:
                continue
            save_lpc(tmp_path / "l", build_lpc(rel))
            save_boc(tmp_path / "b", tmp_path / "o", build_boc(rel, block, theta))
            assert _payload(tmp_path / "b") + _payload(tmp_path / "o") < _payload(tmp_path / "l")
            checked += 1
        assert checked > 50


def test_c06_chunk_bound():
    with criterion(6, "dense chunks under 2.5x overhead, sparse chunks hold exactly their cells"):
        rng = np.random.default_rng(6)
        for _ in range(50):
            rel = _random_relation(rng, max_dims=3)
            edges = tuple(int(rng.integers(1, c + 1)) for c in rel.schema.shape)
            spec = ChunkSpec(rel.schema.shape, edges)
            store = build_chunks(rel, spec, threshold=0.40)
            cid, off = _chunk_coordinates(rel.coords(), spec)
            for c, ch in store.chunks.items():
                sel = cid == c
                if isinstance(ch, DenseChunk):
                    assert ch.slots < Fraction(5, 2) * ch.nonempty
                else:
                    assert isinstance(ch, SparseChunk)
                    assert np.array_equal(ch.offsets.astype(np.int64), np.sort(off[sel]))
                    order = np.argsort(off[sel])
                    assert np.array_equal(ch.values, rel.values[sel][order])
            assert chunk_stats(store).nonempty == rel.n


def _sweep(build):
    fns = lookup_functions(build)
    keys = delinearize_many(np.arange(build.relation.schema.total_cells), build.relation.schema).tolist()
    return {name: [fn(k) for k in keys] for name, fn in fns.items()}


def test_c07_persistence(tmp_path):
    with criterion(7, "save-load-save is byte-identical and answers match on 20 relations"):
        rng = np.random.default_rng(7)
        for i in range(20):
            rel = _random_relation(rng, max_cells=4000)
            edges = [int(rng.integers(1, c + 1)) for c in rel.schema.shape]
            b1 = build_representations(rel, chunk_shape=edges, boc_block=int(rng.integers(1, 70)))
            a, b = tmp_path / f"{i}a", tmp_path / f"{i}b"
            save_build(b1, a)
            b2 = load_build(a)
            save_build(b2, b)
            for p in sorted(a.iterdir()):
                assert p.read_bytes() == (b / p.name).read_bytes(), p.name
            assert _sweep(b1) == _sweep(b2)


@pytest.fixture(scope="module")
def million(tmp_path_factory):
    t0 = time.perf_counter()
    rel = gen_synthetic(SyntheticSpec((1000, 1000, 10), 1_000_000, 999_900, seed=8, measure_range=(1, 10_000)))
    build = build_representations(rel)
    out = tmp_path_factory.mktemp("million")
    save_build(build, out)
    return build, out, time.perf_counter() - t0


@pytest.mark.slow
def test_c08_size_direction(million):
    build, out, setup = million
    with criterion(8, "1M-cell build: multidimensional total < table total", budget=120.0, spent=setup):
        s = stats(build.relation)
        assert s.n == 1_000_000 and s.runs / s.n > 0.99
        report = representation_report(out)
        print(report.to_text())
        assert report.multi_total < report.table_total


@pytest.mark.slow
def test_c09_retrieval_bench(million, tmp_path):
    with criterion(9, "bench on the 1M-cell build passes its retrieval gate"):
        build = million[0]
        report = run_bench(build, BenchConfig(sample_sizes=(100, 500, 1000, 5000, 10000), seed=9))
        print(report.to_text())
        (tmp_path / "quotient.csv").write_text(report.to_csv())
        rows = (tmp_path / "quotient.csv").read_text().splitlines()
        assert len(rows) == 6
        for size in (100, 500, 1000, 5000, 10000):
            assert report.quotient(size) is not None


def test_c10_btree_saturation():
    with criterion(10, "two-pass load never uses more pages and stays inside the size envelope"):
        rng = np.random.default_rng(10)
        for _ in range(10):
            k = int(rng.integers(1, 5))
            shape = tuple(int(x) for x in rng.integers(8, 60, size=k)) if k > 1 else (int(rng.integers(30_000, 90_000)),)
            total = int(np.prod(shape))
            if total < 20_000:
                shape = shape[:-1] + (shape[-1] * (20_000 // total + 1),)
                total = int(np.prod(shape))
            n = int(rng.integers(10_000, min(total, 40_000) + 1))
            runs = int(rng.integers(1, min(n, total - n + 1) + 1))
            rel = gen_synthetic(SyntheticSpec(shape, n, runs, seed=int(rng.integers(2**32))))
            t = build_table(rel)
            sat = saturate_btree(t)
            asc = ascending_btree(t)
            sat.check()
            assert sat.page_count <= asc.page_count
            best, worst = index_envelope(t)
            assert best <= sat.nbytes <= worst
