"""Command line: build | query | bench | stats | cost-table | report."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import ALL_REPRESENTATIONS, DEFAULT_SAMPLE_SIZES, BenchConfig, build_representations, run_bench
from .cost import render_table1
from .datagen import SyntheticSpec, gen_synthetic, ingest_csv, load_schema_decl
from .errors import CubeStoreError
from .headers import boc_profitability, choose_run_scheme, header_sizes
from .relation import INDEX_WIDTH, stats
from .storage import load_build, representation_report, save_build

LOG = logging.getLogger("cubestore")

_REP_ALIASES = {"chunks": "chunk"}


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _reps(text: str) -> list[str]:
    out = [_REP_ALIASES.get(x.strip(), x.strip()) for x in text.split(",") if x.strip()]
    bad = [r for r in out if r not in ALL_REPRESENTATIONS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown representations {bad}; choose from {list(ALL_REPRESENTATIONS)}")
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cubestore", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="ingest or generate a relation and write its representations")
    b.add_argument("--out-dir", required=True, type=Path)
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", type=Path, help="CSV file to ingest (needs --schema)")
    src.add_argument("--synthetic", action="store_true", help="generate a relation")
    b.add_argument("--schema", type=Path, help="JSON schema manifest for --csv")
    b.add_argument("--cardinalities", type=_ints, default=[1000, 1000, 10])
    b.add_argument("--n", type=int, default=100_000, help="nonempty cells (synthetic)")
    b.add_argument("--runs", type=int, help="run count (synthetic); default N - N/10000")
    b.add_argument("--measure-range", type=_ints, help="low,high for uniform integer measures")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--representations", type=_reps, default=list(ALL_REPRESENTATIONS))
    b.add_argument("--chunk-shape", type=_ints)
    b.add_argument("--boc-l", type=int, default=64)
    b.add_argument("--boc-theta", type=int, default=4, choices=(1, 2, 4))
    b.add_argument("--density-threshold", type=float, default=0.4)

    q = sub.add_parser("query", help="look up one key")
    q.add_argument("--out-dir", required=True, type=Path)
    q.add_argument("--rep", default="boc", type=lambda s: _reps(s)[0])
    q.add_argument("--ordinals", action="store_true", help="key fields are 0-based ordinals, not raw values")
    q.add_argument("key", nargs="+", help="one value per dimension")

    be = sub.add_parser("bench", help="random-sample point-lookup timings")
    be.add_argument("--out-dir", required=True, type=Path)
    be.add_argument("--samples", type=_ints, default=list(DEFAULT_SAMPLE_SIZES))
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--reps", type=int, default=1, help="timing repetitions")
    be.add_argument("--representations", type=_reps)
    be.add_argument("--concurrent", type=int, default=0, help="threads for a concurrent-reader check")
    be.add_argument("--csv", type=Path, help="write quotient-vs-sample-size CSV here")

    st = sub.add_parser("stats", help="density, runs, header scheme advice")
    st.add_argument("--out-dir", required=True, type=Path)
    st.add_argument("--boc-l", type=int, default=64)
    st.add_argument("--boc-theta", type=int, default=4)

    ct = sub.add_parser("cost-table", help="C_T / C_M grid")
    ct.add_argument("--theta-ratio", default="0.2")
    ct.add_argument("--csv", action="store_true")

    r = sub.add_parser("report", help="per-file size table")
    r.add_argument("--out-dir", required=True, type=Path)
    r.add_argument("--csv", action="store_true")
    return p


def _cmd_build(a) -> int:
    if a.csv is not None:
        if a.schema is None:
            raise CubeStoreError("--csv requires --schema")
        rel = ingest_csv(a.csv, load_schema_decl(a.schema))
    else:
        runs = a.runs if a.runs is not None else max(1, a.n - a.n // 10_000)
        rng = tuple(a.measure_range) if a.measure_range else None
        rel = gen_synthetic(SyntheticSpec(tuple(a.cardinalities), a.n, runs, a.seed, rng))
    build = build_representations(
        rel, a.representations, a.chunk_shape, a.boc_l, a.boc_theta, a.density_threshold
    )
    written = save_build(build, a.out_dir)
    print(f"wrote {len(written)} files for N={rel.n} to {a.out_dir}")
    return 0


def _cmd_query(a) -> int:
    build = load_build(a.out_dir)
    rel = build.relation
    if len(a.key) != rel.schema.k:
        raise CubeStoreError(f"expected {rel.schema.k} key values, got {len(a.key)}")
    if a.ordinals:
        idx = tuple(int(x) for x in a.key)
    else:
        raw = [int(x) if d and isinstance(d[0], int) else x for x, d in zip(a.key, rel.dictionaries)]
        idx = rel.ordinals_of(raw)
    from .bench import lookup_functions

    fns = lookup_functions(build)
    if a.rep not in fns:
        raise CubeStoreError(f"representation {a.rep!r} was not built in {a.out_dir}")
    value = fns[a.rep](idx)
    print("empty" if value is None else value)
    return 0


def _cmd_bench(a) -> int:
    build = load_build(a.out_dir)
    reps = a.representations or [r for r in ALL_REPRESENTATIONS if r in _built(build)]
    cfg = BenchConfig(a.samples, a.seed, reps, a.reps, a.concurrent)
    report = run_bench(build, cfg)
    print(report.to_text(), end="")
    if a.csv:
        a.csv.write_text(report.to_csv(), encoding="utf-8")
    return 0


def _built(build) -> list[str]:
    return [{"chunks": "chunk"}.get(r, r) for r in build.representations]


def _cmd_stats(a) -> int:
    build = load_build(a.out_dir)
    s = stats(build.relation)
    scheme = choose_run_scheme(s.n, s.runs)
    prof = boc_profitability(INDEX_WIDTH, a.boc_theta, a.boc_l, s.n)
    sizes = header_sizes(s.n, s.runs, INDEX_WIDTH, a.boc_theta, a.boc_l)
    print(f"N               {s.n}")
    print(f"total cells     {s.total_cells}")
    print(f"density         {s.density:.6g}")
    print(f"runs            {s.runs}")
    print(f"run scheme      {scheme.name} (SCHC {sizes.schc} bytes, LPC {sizes.lpc} bytes)")
    print(
        f"BOC             {sizes.boc} bytes; sufficient exact={prof.sufficient_exact} "
        f"approx={prof.sufficient_approx} ratio={float(prof.ratio):.4f}"
    )
    return 0


def _cmd_cost_table(a) -> int:
    t = render_table1(a.theta_ratio)
    print(t.to_csv() if a.csv else t.to_text(), end="")
    return 0


def _cmd_report(a) -> int:
    r = representation_report(a.out_dir)
    print(r.to_csv() if a.csv else r.to_text(), end="")
    return 0


COMMANDS = {
    "build": _cmd_build,
    "query": _cmd_query,
    "bench": _cmd_bench,
    "stats": _cmd_stats,
    "cost-table": _cmd_cost_table,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CubeStoreError, OSError) as exc:
        print(f"cubestore: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
