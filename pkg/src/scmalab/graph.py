"""Sparse resource-to-user incidence structure (the SCMA factor graph).

Rows are resource elements (function nodes), columns are users (variable
nodes). All indices in the Python API are 0-based; file and CLI output
converts to 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np


class GraphDimensionError(ValueError):
    """Requested (K, J, d_v) cannot produce a regular factor graph."""


class GraphConstructionError(ValueError):
    """A candidate incidence matrix violates a factor-graph invariant."""


@dataclass(frozen=True)
class FactorGraph:
    """K x J binary incidence matrix with its neighbourhood sets.

    ``xi[k]`` lists the users sharing resource ``k`` and ``zeta[j]`` the
    resources occupied by user ``j``; both are sorted ascending.
    """

    F: np.ndarray
    xi: tuple[tuple[int, ...], ...] = field(repr=False)
    zeta: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def K(self) -> int:
        return self.F.shape[0]

    @property
    def J(self) -> int:
        return self.F.shape[1]

    @property
    def d_v(self) -> int:
        return len(self.zeta[0])

    @property
    def d_f(self) -> int:
        return len(self.xi[0])

    @property
    def overloading(self) -> float:
        return self.J / self.K

    def slot(self, k: int, j: int) -> int:
        """Position of user ``j`` inside ``xi[k]``."""
        try:
            return self.xi[k].index(j)
        except ValueError:
            raise KeyError(f"user {j + 1} is not connected to resource {k + 1}") from None

    def edges(self) -> list[tuple[int, int]]:
        """All (k, j) edges, row-major."""
        return [(k, j) for k in range(self.K) for j in self.xi[k]]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FactorGraph) and np.array_equal(self.F, other.F)

    def __hash__(self) -> int:
        return hash(self.F.tobytes())


def from_matrix(F, distinct_columns: bool = True) -> FactorGraph:
    """Validate a user-supplied 0/1 matrix and wrap it as a FactorGraph.

    Args:
        F: K x J binary incidence matrix.
        distinct_columns: reject users sharing the same resource set. Turn
            off for single-resource test systems where every user collides
            on the one resource.

    Raises:
        GraphConstructionError: non-binary entries, irregular row or column
            weights, empty rows/columns, or duplicate columns.
    """
    F = np.asarray(F)
    if F.ndim != 2 or F.size == 0:
        raise GraphConstructionError("factor graph matrix must be a non-empty 2-D array")
    if not np.all((F == 0) | (F == 1)):
        raise GraphConstructionError("factor graph matrix must contain only 0 and 1")
    F = F.astype(np.int8)
    F.setflags(write=False)
    K, J = F.shape

    col = F.sum(axis=0)
    row = F.sum(axis=1)
    if col.min() < 1 or np.any(col != col[0]):
        bad = int(np.flatnonzero(col != col[0])[0]) if np.any(col != col[0]) else 0
        raise GraphConstructionError(
            f"column weights are not regular: user {bad + 1} has weight {col[bad]}, expected {col[0]}"
        )
    if row.min() < 1 or np.any(row != row[0]):
        bad = int(np.flatnonzero(row != row[0])[0]) if np.any(row != row[0]) else 0
        raise GraphConstructionError(
            f"row weights are not regular: resource {bad + 1} has weight {row[bad]}, expected {row[0]}"
        )
    if distinct_columns and len({F[:, j].tobytes() for j in range(J)}) != J:
        raise GraphConstructionError("columns of the factor graph matrix must be pairwise distinct")

    xi = tuple(tuple(int(j) for j in np.flatnonzero(F[k])) for k in range(K))
    zeta = tuple(tuple(int(k) for k in np.flatnonzero(F[:, j])) for j in range(J))
    return FactorGraph(F=F, xi=xi, zeta=zeta)


def build_regular_factor_graph(K: int, J: int, d_v: int) -> FactorGraph:
    """Regular graph whose columns are the first J d_v-subsets of the
    resources, in lexicographic order.

    ``build_regular_factor_graph(4, 6, 2)`` gives the classic 4x6 SCMA
    matrix with d_f = 3.
    """
    if min(K, J, d_v) < 1:
        raise GraphDimensionError("K, J and d_v must be positive")
    if d_v > K:
        raise GraphDimensionError(f"d_v={d_v} exceeds K={K}")
    if (J * d_v) % K:
        raise GraphDimensionError(f"J*d_v={J * d_v} is not divisible by K={K}")
    if J > comb(K, d_v):
        raise GraphDimensionError(f"J={J} exceeds binomial({K},{d_v})={comb(K, d_v)} distinct columns")
    d_f = J * d_v // K

    F = np.zeros((K, J), dtype=np.int8)
    for j, subset in zip(range(J), combinations(range(K), d_v)):
        F[list(subset), j] = 1
    row = F.sum(axis=1)
    if np.any(row != d_f):
        bad = int(np.flatnonzero(row != d_f)[0])
        raise GraphConstructionError(
            f"lexicographic prefix is not row-regular: resource {bad + 1} has weight {row[bad]}, expected {d_f}"
        )
    return from_matrix(F)


def neighborhoods(graph: FactorGraph) -> tuple[tuple[tuple[int, ...], ...], tuple[tuple[int, ...], ...]]:
    return graph.xi, graph.zeta


def mapping_matrix(graph: FactorGraph, j: int) -> np.ndarray:
    """Binary K x d_v matrix placing user ``j``'s d_v dimensions on its
    resources, columns ordered by increasing resource index."""
    if not 0 <= j < graph.J:
        raise IndexError(f"user index {j} out of range for J={graph.J}")
    V = np.zeros((graph.K, graph.d_v), dtype=np.int8)
    for col, k in enumerate(graph.zeta[j]):
        V[k, col] = 1
    return V
