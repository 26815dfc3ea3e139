"""Discretised MPA: FN updates as grid-sampled PDF convolutions via 2-D FFT.

Each interfering user on a resource is a sum of M impulses at its
faded codeword elements, weighted by its incoming message, and the noise
is a sampled complex Gaussian. The message to user j is the convolution
of every other user's PDF with the noise PDF, read at y_k - h_kj x_kj^m.

All PDFs share one lattice of spacing ``w`` anchored at the origin; each
is stored on its own bounding box so the FFT size tracks the occupied
extent rather than a fixed symmetric window.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft

from .core import (
    DecodeResult,
    DecoderConfig,
    MessageState,
    Problem,
    beliefs_and_llr,
    init_messages,
    make_problem,
    update_all_vns,
)

NOISE_DENSITY_FLOOR = 1e-12


class GridExtentError(ValueError):
    """An impulse falls outside the configured grid extent."""


def lattice(points: np.ndarray, w: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer lattice coordinates of the nearest sampling point."""
    p = np.asarray(points)
    return np.rint(p.real / w).astype(np.int64), np.rint(p.imag / w).astype(np.int64)


def impulse_grid(points, weights, w: float):
    """Discrete PDF with ``weights[m]`` moved to the sampling point nearest
    ``points[m]``. Returns (grid, (x0, y0)) with the lattice origin offset."""
    ix, iy = lattice(points, w)
    x0, y0 = int(ix.min()), int(iy.min())
    grid = np.zeros((int(ix.max()) - x0 + 1, int(iy.max()) - y0 + 1))
    np.add.at(grid, (ix - x0, iy - y0), weights)
    return grid, (x0, y0)


def noise_grid(N0: float, w: float, floor: float = NOISE_DENSITY_FLOOR):
    """Sampled CN(0, N0) density times the cell area, truncated where it
    drops below ``floor`` of its peak."""
    R = int(np.floor(np.sqrt(N0 * np.log(1.0 / floor)) / w))
    c = np.arange(-R, R + 1) * w
    r2 = c[:, None] ** 2 + c[None, :] ** 2
    rel = np.exp(-r2 / N0)
    grid = np.where(rel >= floor, rel, 0.0) * (w * w / (np.pi * N0))
    return grid, (-R, -R)


def default_extent(points_per_user: list[np.ndarray], N0: float) -> float:
    """Largest superposed magnitude plus four noise standard deviations."""
    z = np.zeros(1, dtype=complex)
    for p in points_per_user:
        z = (z[:, None] + p[None, :]).ravel()
    peak = max(float(np.max(np.abs(z))), max(float(np.max(np.abs(p))) for p in points_per_user))
    return peak + 4.0 * np.sqrt(N0 / 2.0)


def _check_extent(points_per_user, wid: float, w: float):
    for i, p in enumerate(points_per_user):
        ix, iy = lattice(p, w)
        lim = int(np.floor(wid / w + 1e-9))
        if np.any(np.abs(ix) > lim) or np.any(np.abs(iy) > lim):
            raise GridExtentError(
                f"impulse of user slot {i} at {p[np.argmax(np.abs(p))]:.4g} lies outside the grid extent {wid:.4g}"
            )


class GridPlan:
    """Lattice geometry of one resource: everything except the message
    weights, so it is built once per frame and reused every iteration."""

    def __init__(self, y_k: complex, points: list[np.ndarray], N0: float, w: float,
                 wid: float | None = None, noise=None):
        d_f = len(points)
        self.d_f, self.M = d_f, len(points[0])
        wid = default_extent(points, N0) if wid is None else wid
        _check_extent(points, wid, w)

        coords = [lattice(p, w) for p in points]
        self.offsets = [(int(ix.min()), int(iy.min())) for ix, iy in coords]
        self.local = [(ix - ox, iy - oy) for (ix, iy), (ox, oy) in zip(coords, self.offsets)]
        sizes = [(int(lx.max()) + 1, int(ly.max()) + 1) for lx, ly in self.local]
        ng, noff = noise if noise is not None else noise_grid(N0, w)
        # linear convolution length of all d_f + 1 sequences: no wrap-around
        self.shape = tuple(
            sfft.next_fast_len(sum(s[a] for s in sizes) + ng.shape[a] - d_f, real=True) for a in (0, 1)
        )
        self.noise_spec = sfft.rfft2(ng, s=self.shape)

        self.query = []
        for i in range(d_f):
            ox = noff[0] + sum(self.offsets[a][0] for a in range(d_f) if a != i)
            oy = noff[1] + sum(self.offsets[a][1] for a in range(d_f) if a != i)
            qx, qy = lattice(y_k - points[i], w)
            qx, qy = qx - ox, qy - oy
            inside = (qx >= 0) & (qx < self.shape[0]) & (qy >= 0) & (qy < self.shape[1])
            self.query.append((inside, qx[inside], qy[inside]))

    def messages(self, weights: np.ndarray, slots=None) -> tuple[np.ndarray, int]:
        d_f = self.d_f
        slots = list(range(d_f)) if slots is None else list(slots)
        stack = np.zeros((d_f,) + self.shape)
        for i, (lx, ly) in enumerate(self.local):
            np.add.at(stack[i], (lx, ly), weights[i])
        spectra = sfft.rfft2(stack)
        prods = np.empty((len(slots),) + self.noise_spec.shape, dtype=complex)
        for r, i in enumerate(slots):
            p = prods[r]
            p[...] = self.noise_spec
            for a in range(d_f):
                if a != i:
                    p *= spectra[a]
        conv = sfft.irfft2(prods, s=self.shape)
        out = np.zeros((len(slots), self.M))
        for r, i in enumerate(slots):
            inside, qx, qy = self.query[i]
            out[r, inside] = np.maximum(conv[r, qx, qy], 0.0)
        s = out.sum(axis=1, keepdims=True)
        out = np.divide(out, s, out=out, where=s > 0)
        return out, len(slots) * (d_f - 1) * self.noise_spec.size


def fn_messages(y_k: complex, points: list[np.ndarray], weights: np.ndarray, N0: float, w: float,
                wid: float | None = None, slots=None, noise=None) -> tuple[np.ndarray, int]:
    """DMPA messages from one resource to each of its users.

    Args:
        y_k: received sample on the resource.
        points: per-slot faded codeword elements h_kj x_kj^m, each (M,).
        weights: (d_f, M) incoming VN-to-FN probabilities.
        N0: noise variance.
        w: lattice spacing.
        wid: grid half-extent; defaults to ``default_extent``.
        slots: which outgoing messages to compute (default all).
        noise: optional precomputed ``noise_grid(N0, w)``.

    Returns:
        ((len(slots), M) normalised messages, count of spectral multiplies).
    """
    return GridPlan(y_k, points, N0, w, wid, noise).messages(weights, slots)


def fn_points(problem: Problem, n: int, k: int) -> list[np.ndarray]:
    g = problem.cbs.graph
    C = problem.cbs.fn_elements(k)
    return [problem.H[n, k, j] * C[i] for i, j in enumerate(g.xi[k])]


def dmpa_fn_update(state: MessageState, k: int, j: int, config: DecoderConfig | None = None) -> np.ndarray:
    """DMPA message from resource ``k`` to user ``j`` for every frame: (N, M)."""
    config = config or DecoderConfig(variant="dmpa")
    prob = state.problem
    slot = prob.cbs.graph.slot(k, j)
    out = np.empty((prob.N, prob.cbs.M))
    for n in range(prob.N):
        msg, _ = fn_messages(prob.y[n, k], fn_points(prob, n, k), state.vn_to_fn[n, k], prob.N0[n],
                             config.dmpa_w, config.dmpa_wid, slots=[slot])
        out[n] = msg[0]
    return out


def decode_dmpa_problem(problem: Problem, config: DecoderConfig, callback=None) -> DecodeResult:
    state = init_messages(problem, config)
    g = problem.cbs.graph
    w = config.dmpa_w
    plans = []
    for n in range(problem.N):
        noise = noise_grid(problem.N0[n], w)
        plans.append([GridPlan(problem.y[n, k], fn_points(problem, n, k), problem.N0[n], w, config.dmpa_wid, noise)
                      for k in range(g.K)])
    mults = np.zeros(problem.N)
    for _ in range(config.iterations):
        for n in range(problem.N):
            for k in range(g.K):
                msg, c = plans[n][k].messages(state.vn_to_fn[n, k])
                state.fn_to_vn[n, k] = msg
                mults[n] += c
        state.count("fn_edge_updates", g.K * g.d_f)
        update_all_vns(state)
        state.iteration += 1
        if callback is not None:
            callback(state)
    res = beliefs_and_llr(state, config)
    res.counters["fn_multiplies"] = mults
    return res


def decode_dmpa(y, H, cbs, N0, config: DecoderConfig, priors=None) -> DecodeResult:
    config = config.validate(cbs.J, cbs.M)
    problem, single = make_problem(y, H, cbs, N0, priors)
    res = decode_dmpa_problem(problem, config)
    return res.squeeze() if single else res
