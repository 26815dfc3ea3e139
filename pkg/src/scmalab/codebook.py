"""Star-QAM mother constellation, user operators and sparse codebooks."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .graph import FactorGraph, mapping_matrix

# relative tolerance for "achieves the minimum" comparisons
MIN_TOL = 1e-9


class DegenerateConstellationError(ValueError):
    """Two constellation points coincide."""


@dataclass(frozen=True)
class MotherConstellation:
    points: np.ndarray  # d_v x M complex
    alpha: float | None = None
    beta: float | None = None

    @property
    def d_v(self) -> int:
        return self.points.shape[0]

    @property
    def M(self) -> int:
        return self.points.shape[1]

    @property
    def R1(self) -> float | None:
        if self.alpha is None:
            return None
        return star_qam_r1(self.alpha, self.beta)

    @property
    def R2(self) -> float | None:
        if self.alpha is None:
            return None
        return self.beta * self.R1

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.points) ** 2))


@dataclass(frozen=True)
class ConstellationOperator:
    matrix: np.ndarray  # d_v x d_v, one unit-modulus entry per row/column
    phases: tuple[float, ...] = ()

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass(frozen=True)
class CodebookSet:
    """Per-user K x M codebooks stacked as a (J, K, M) complex array."""

    graph: FactorGraph
    codewords: np.ndarray
    mother: MotherConstellation | None = None

    @property
    def J(self) -> int:
        return self.codewords.shape[0]

    @property
    def K(self) -> int:
        return self.codewords.shape[1]

    @property
    def M(self) -> int:
        return self.codewords.shape[2]

    @property
    def B(self) -> int:
        return int(np.log2(self.M))

    def user(self, j: int) -> np.ndarray:
        return self.codewords[j]

    def fn_elements(self, k: int) -> np.ndarray:
        """(d_f, M) codeword elements of the users sharing resource ``k``."""
        return self.codewords[list(self.graph.xi[k]), k, :]

    def energies(self) -> np.ndarray:
        return np.sum(np.abs(self.codewords) ** 2, axis=(1, 2))


def star_qam_r1(alpha: float, beta: float) -> float:
    return float(np.sqrt(1.0 / (2.0 * (alpha**2 + beta**2 + alpha**2 * beta**2 + 1.0))))


def star_qam_mother(alpha: float = 3.0, beta: float = 1 / 0.62) -> MotherConstellation:
    """Four-point, two-dimensional star-QAM mother constellation.

    The inner/outer ring radii are scaled so the four columns carry unit
    total energy.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"alpha and beta must be positive, got alpha={alpha}, beta={beta}")
    R1 = star_qam_r1(alpha, beta)
    R2 = beta * R1
    points = np.array(
        [
            [alpha * R1, R1, -R1, -alpha * R1],
            [-R2, alpha * R2, -alpha * R2, R2],
        ],
        dtype=complex,
    )
    points.setflags(write=False)
    return MotherConstellation(points=points, alpha=float(alpha), beta=float(beta))


def phase_operators(J: int = 6, thetas=(0.0, np.pi / 3, 2 * np.pi / 3)) -> list[ConstellationOperator]:
    """The six classic operators for the 4x6, d_v=2 star-QAM design."""
    if J != 6:
        raise ValueError(f"phase operator table is defined for J=6 only, got J={J}")
    t1, t2, t3 = (np.exp(1j * t) for t in thetas)
    mats = [
        [[t1, 0], [0, t2]],
        [[1, 0], [0, 1]],
        [[0, t3], [t1, 0]],
        [[1, 0], [0, t2]],
        [[0, 1], [1, 0]],
        [[1, 0], [0, t3]],
    ]
    ops = []
    for m in mats:
        a = np.array(m, dtype=complex)
        a.setflags(write=False)
        ops.append(ConstellationOperator(matrix=a, phases=tuple(float(t) for t in thetas)))
    return ops


def check_operator(op: ConstellationOperator, atol: float = 1e-12) -> None:
    a = np.asarray(op.matrix)
    nz = np.abs(a) > atol
    if not (np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)):
        raise ValueError("operator must have exactly one nonzero per row and column")
    if not np.allclose(np.abs(a[nz]), 1.0, atol=atol):
        raise ValueError("operator nonzeros must have unit modulus")


def assemble_codebooks(graph: FactorGraph, mother, ops) -> CodebookSet:
    """CB_j = V_j @ Delta_j @ A_MC for every user.

    ``mother`` may be a MotherConstellation or any d_v x M complex array.
    """
    if isinstance(mother, MotherConstellation):
        A, mc = mother.points, mother
    else:
        A = np.asarray(mother, dtype=complex)
        mc = MotherConstellation(points=A)
    if A.ndim != 2 or A.shape[0] != graph.d_v:
        raise ValueError(f"mother constellation must be d_v x M with d_v={graph.d_v}, got {A.shape}")
    if len(ops) != graph.J:
        raise ValueError(f"need {graph.J} operators, got {len(ops)}")

    cbs = np.zeros((graph.J, graph.K, A.shape[1]), dtype=complex)
    for j, op in enumerate(ops):
        D = op.matrix if isinstance(op, ConstellationOperator) else np.asarray(op, dtype=complex)
        if D.shape != (graph.d_v, graph.d_v):
            raise ValueError(f"operator {j + 1} has shape {D.shape}, expected {(graph.d_v, graph.d_v)}")
        cbs[j] = mapping_matrix(graph, j) @ D @ A
    cbs.setflags(write=False)
    return CodebookSet(graph=graph, codewords=cbs, mother=mc)


def default_codebook() -> CodebookSet:
    """The 4x6 star-QAM system with alpha=3, beta=1/0.62."""
    from .graph import build_regular_factor_graph

    g = build_regular_factor_graph(4, 6, 2)
    return assemble_codebooks(g, star_qam_mother(3.0, 1 / 0.62), phase_operators(6))


@dataclass(frozen=True)
class KpiReport:
    d_E_min: float
    tau_E: int
    d_P_min: float
    tau_P: int
    L: int
    M: int

    @property
    def tau_E_avg(self) -> float:
        return self.tau_E / self.M

    def as_row(self) -> dict:
        return {
            "d_E_min": self.d_E_min,
            "tau_E": self.tau_E,
            "tau_E_avg": self.tau_E_avg,
            "d_P_min": self.d_P_min,
            "tau_P": self.tau_P,
            "L": self.L,
        }


def kpi(points) -> KpiReport:
    """Exhaustive pairwise distance metrics of a d x M constellation.

    Product distance is taken over the dimensions where the two points
    differ; diversity L is the smallest number of such dimensions.
    """
    P = np.asarray(points, dtype=complex)
    if P.ndim == 1:
        P = P[None, :]
    d, M = P.shape
    if M < 2:
        raise ValueError("need at least two constellation points")
    scale = max(float(np.max(np.abs(P))), 1e-300)
    eq_tol = 1e-12 * scale

    dE, dP, div = [], [], []
    for m, mp in combinations(range(M), 2):
        diff = np.abs(P[:, m] - P[:, mp])
        differing = diff > eq_tol
        if not differing.any():
            raise DegenerateConstellationError(f"points {m + 1} and {mp + 1} coincide")
        dE.append(float(np.sqrt(np.sum(diff**2))))
        dP.append(float(np.prod(diff[differing])))
        div.append(int(differing.sum()))
    dE = np.array(dE)
    dP = np.array(dP)
    d_E_min = float(dE.min())
    d_P_min = float(dP.min())
    return KpiReport(
        d_E_min=d_E_min,
        tau_E=int(np.sum(dE <= d_E_min * (1 + MIN_TOL))),
        d_P_min=d_P_min,
        tau_P=int(np.sum(dP <= d_P_min * (1 + MIN_TOL))),
        L=int(min(div)),
        M=M,
    )
