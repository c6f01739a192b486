"""
Building every representation of one relation
==============================================

Generate a relation with nearly as many runs as cells, write every
representation to disk, compare file sizes and time point lookups.
"""

import tempfile

from cubestore import BenchConfig, SyntheticSpec, build_representations, gen_synthetic, run_bench, stats
from cubestore import choose_run_scheme, load_build, representation_report, save_build

# 200k cells over a 500 x 400 x 10 cube with 199,000 runs
spec = SyntheticSpec((500, 400, 10), n=200_000, runs=199_000, seed=3, measure_range=(1, 9_999))
rel = gen_synthetic(spec)
s = stats(rel)
print(f"N={s.n} runs={s.runs} density={s.density:.4f}")
print("run-header recommendation:", choose_run_scheme(s.n, s.runs).name)

build = build_representations(rel)
print("B-tree pages:", build.table.index.page_count, "depth:", build.table.index.depth(),
      f"leaf fill {build.table.index.leaf_fill():.3f}")

with tempfile.TemporaryDirectory() as d:
    save_build(build, d)
    report = representation_report(d)
    print(report.to_text())
    print(f"array / table: {report.multi_total / report.table_total:.3f}")

    # reload from disk and time random point lookups
    loaded = load_build(d)
    bench = run_bench(loaded, BenchConfig(sample_sizes=(100, 1000, 5000), seed=0, repetitions=3))
    print(bench.to_text())
