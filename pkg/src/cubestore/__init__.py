"""Compressed multidimensional storage for sparse fact tables.

A relation is dictionary-encoded and linearized once
(:mod:`cubestore.relation`), then laid out as a compressed cell array with a
position header (:mod:`cubestore.headers`), as a chunked array
(:mod:`cubestore.chunks`), or as a row table with a B-tree
(:mod:`cubestore.table`). :mod:`cubestore.cost` gives the analytic size
comparison and :mod:`cubestore.bench` the empirical one.
"""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    CubeStoreError,
    DomainError,
    FormatError,
    IntegrityError,
    RetrievalMismatch,
    SchemaError,
)
from .relation import (
    DimensionDecl,
    EncodedRelation,
    Measure,
    RelationSchema,
    SchemaDecl,
    delinearize,
    encode_relation,
    linearize,
    stats,
)
from .headers import (
    RunScheme,
    boc_profitability,
    build_boc,
    build_lpc,
    build_schc,
    choose_run_scheme,
    header_sizes,
)
from .chunks import ChunkSpec, build_chunks, chunk_stats
from .conjoint import build_conjoint, conjoint_density
from .table import btree_lookup, build_table, saturate_btree, table_sizes
from .cost import CostParams, cost_multi, cost_ratio, cost_table, render_table1
from .datagen import SyntheticSpec, export_csv, gen_synthetic, ingest_csv
from .storage import Build, load_build, representation_report, save_build
from .bench import BenchConfig, build_representations, run_bench
