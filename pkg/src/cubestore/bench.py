"""Point-lookup benchmark across every representation of one relation.

Samples are drawn from the nonempty cells with a seeded generator and the
same keys are fed to every representation. Before anything is timed, each
representation must return the stored measure for every sampled key.
Timings are wall-clock totals per sample size; representations run in a
rotating order on each repetition so none is systematically first. Data is
held in memory (warm cache) throughout.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .chunks import ChunkSpec, build_chunks
from .errors import DomainError, RetrievalMismatch
from .headers import DEFAULT_BLOCK, DEFAULT_OFFSET_WIDTH, build_boc, build_lpc, build_schc
from .relation import EncodedRelation, delinearize_many, linearize
from .storage import Build
from .table import build_table_rep

LOG = logging.getLogger(__name__)

DEFAULT_SAMPLE_SIZES = (100, 500, 1000, 5000, 10000, 50000, 100000)
ALL_REPRESENTATIONS = ("table", "schc", "lpc", "boc", "chunk")


def build_representations(
    rel: EncodedRelation,
    representations: Sequence[str] = ALL_REPRESENTATIONS,
    chunk_shape: Sequence[int] | None = None,
    boc_block: int = DEFAULT_BLOCK,
    boc_offset_width: int = DEFAULT_OFFSET_WIDTH,
    density_threshold=0.4,
) -> Build:
    unknown = set(representations) - set(ALL_REPRESENTATIONS)
    if unknown:
        raise DomainError(f"unknown representations {sorted(unknown)}")
    b = Build(rel)
    if "schc" in representations:
        b.schc = build_schc(rel)
    if "lpc" in representations:
        b.lpc = build_lpc(rel)
    if "boc" in representations:
        b.boc = build_boc(rel, boc_block, boc_offset_width)
    if "chunk" in representations:
        spec = ChunkSpec(rel.schema.shape, tuple(chunk_shape)) if chunk_shape else ChunkSpec.default(rel.schema.shape)
        b.chunks = build_chunks(rel, spec, density_threshold)
    if "table" in representations:
        b.table = build_table_rep(rel)
    return b


def lookup_functions(build: Build) -> dict[str, Callable]:
    """One ``key -> value | None`` callable per built representation."""
    rel = build.relation
    schema = rel.schema
    values = memoryview(rel.values)
    out: dict[str, Callable] = {}

    def via(header):
        def f(idx):
            p = header.lookup(linearize(idx, schema))
            return None if p is None else values[p]

        return f

    if build.table is not None:
        out["table"] = build.table.lookup
    if build.schc is not None:
        out["schc"] = via(build.schc)
    if build.lpc is not None:
        out["lpc"] = via(build.lpc)
    if build.boc is not None:
        out["boc"] = via(build.boc)
    if build.chunks is not None:
        out["chunk"] = build.chunks.lookup
    return out


@dataclass
class BenchConfig:
    sample_sizes: Sequence[int] = DEFAULT_SAMPLE_SIZES
    seed: int = 0
    representations: Sequence[str] = ALL_REPRESENTATIONS
    repetitions: int = 1
    concurrent_readers: int = 0


def draw_sample(rel: EncodedRelation, size: int, rng: np.random.Generator) -> np.ndarray:
    """Physical positions of sampled nonempty cells."""
    return rng.choice(rel.n, size, replace=size > rel.n)


@dataclass
class BenchReport:
    representations: list[str]
    sample_sizes: list[int]
    seconds: dict[int, dict[str, float]] = field(default_factory=dict)
    keys: dict[int, list[tuple[int, ...]]] = field(default_factory=dict, repr=False)
    reference: str = "boc"
    # data stays in memory; no file cache is dropped between representations
    cache: str = "warm"

    def quotient(self, size: int, multi: str | None = None):
        multi = multi or self.reference
        row = self.seconds[size]
        if "table" not in row or multi not in row or row[multi] == 0:
            return None
        return row["table"] / row[multi]

    def to_text(self) -> str:
        reps = self.representations
        head = ["Sample size", *reps, f"Quotient (table/{self.reference})"]
        lines = [head]
        for s in self.sample_sizes:
            q = self.quotient(s)
            lines.append([str(s), *(f"{self.seconds[s][r]:.4f}" for r in reps), "-" if q is None else f"{q:.2f}"])
        widths = [max(len(r[j]) for r in lines) for j in range(len(head))]
        out = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in lines]
        out.append(f"(seconds, {self.cache} cache, rotating representation order)")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        multis = [r for r in self.representations if r != "table"]
        w.writerow(["sample_size", *(f"{r}_seconds" for r in self.representations), *(f"quotient_{r}" for r in multis)])
        for s in self.sample_sizes:
            qs = [self.quotient(s, r) for r in multis]
            w.writerow(
                [s, *(f"{self.seconds[s][r]:.6f}" for r in self.representations), *("" if q is None else f"{q:.4f}" for q in qs)]
            )
        return buf.getvalue()


def _gate(name, fn, keys, expected):
    for key, want in zip(keys, expected):
        got = fn(key)
        if got != want:
            raise RetrievalMismatch(name, key, want, got)


def _stress(fns, keys, expected, threads: int) -> None:
    def worker(name):
        _gate(name, fns[name], keys, expected)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(worker, [n for n in fns for _ in range(threads)]))


def run_bench(build: Build, cfg: BenchConfig) -> BenchReport:
    fns_all = lookup_functions(build)
    missing = [r for r in cfg.representations if r not in fns_all]
    if missing:
        raise DomainError(f"representations not built: {missing}")
    reps = list(cfg.representations)
    fns = {r: fns_all[r] for r in reps}
    rel = build.relation
    rng = np.random.default_rng(cfg.seed)
    report = BenchReport(reps, list(cfg.sample_sizes), reference="boc" if "boc" in reps else (reps[-1] if reps else ""))
    for size in cfg.sample_sizes:
        phys = draw_sample(rel, size, rng)
        keys = [tuple(k) for k in delinearize_many(rel.positions[phys], rel.schema).tolist()]
        expected = rel.values[phys].tolist()
        for name, fn in fns.items():
            _gate(name, fn, keys, expected)
        if cfg.concurrent_readers:
            _stress(fns, keys, expected, cfg.concurrent_readers)
        totals = dict.fromkeys(reps, 0.0)
        for r in range(cfg.repetitions):
            order = reps[r % len(reps):] + reps[: r % len(reps)]
            for name in order:
                fn = fns[name]
                t0 = time.perf_counter()
                for key in keys:
                    fn(key)
                totals[name] += time.perf_counter() - t0
        report.seconds[size] = {n: totals[n] / cfg.repetitions for n in reps}
        report.keys[size] = keys
        LOG.info("sample %d: %s", size, report.seconds[size])
    return report
