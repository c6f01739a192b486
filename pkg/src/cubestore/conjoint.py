"""Conjoint dimensions.

The first ``h`` key dimensions are replaced by a single dimension whose
members are the combinations that actually occur in the relation. Empty
combinations disappear from the array, so the cell count shrinks and the
density rises by ``prod(c_1..c_h) / |Conjoint|``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import prod

import numpy as np

from .errors import DomainError
from .relation import Dimension, EncodedRelation, RelationSchema, stats


@dataclass(frozen=True, eq=False)
class ConjointRelation:
    source_schema: RelationSchema
    h: int
    members: np.ndarray  # (|Conjoint|, h) ordinals of the source dimensions
    relation: EncodedRelation

    @property
    def size(self) -> int:
        return int(self.members.shape[0])

    def to_source(self, idx) -> tuple[int, ...]:
        """Map an index of the transformed relation back to the source."""
        return tuple(int(x) for x in self.members[idx[0]]) + tuple(int(x) for x in idx[1:])


def build_conjoint(rel: EncodedRelation, h: int) -> ConjointRelation:
    """Collapse the first ``h`` dimensions into one conjoint dimension.

    Members are ordered by the linearized index of their prefix, so the cell
    order of the source relation is preserved.
    """
    k = rel.schema.k
    if not 1 <= h <= k:
        raise DomainError(f"h={h} outside [1, {k}]")
    if h == k:
        warnings.warn(
            "conjoint over every key dimension leaves a fully dense array, "
            "equivalent to the row table",
            stacklevel=2,
        )
    if rel.n == 0:
        raise DomainError("cannot build a conjoint dimension over an empty relation")
    prefix_cells = prod(rel.schema.shape[:h])
    rest, prefix = np.divmod(rel.positions, prefix_cells)
    uniq, member = np.unique(prefix, return_inverse=True)
    member = member.reshape(-1)

    members = np.empty((uniq.size, h), dtype=np.int64)
    r = uniq.copy()
    for j, c in enumerate(rel.schema.shape[:h]):
        r, members[:, j] = np.divmod(r, c)

    names = [d.name for d in rel.schema.dims[:h]]
    dims = (Dimension("*".join(names), int(uniq.size)),) + rel.schema.dims[h:]
    schema = RelationSchema(dims, rel.schema.measure)
    positions = member + rest * uniq.size
    member_values = tuple(
        tuple(rel.dictionaries[j][int(m[j])] for j in range(h)) for m in members
    )
    dictionaries = (member_values,) + rel.dictionaries[h:]
    out = EncodedRelation(schema, dictionaries, positions, rel.values)
    return ConjointRelation(rel.schema, h, members, out)


def conjoint_density(rel: EncodedRelation, h: int) -> tuple[Fraction, Fraction]:
    """(rho, rho') with rho' from the conjoint scaling formula.

    The closed form is cross-checked against the density measured on the
    transformed relation.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        conj = build_conjoint(rel, h)
    rho = stats(rel).density_exact
    rho_prime = Fraction(prod(rel.schema.shape[:h]), conj.size) * rho
    measured = stats(conj.relation).density_exact
    if measured != rho_prime:
        raise AssertionError(f"conjoint density mismatch: formula {rho_prime}, measured {measured}")
    return rho, rho_prime
