"""Exhaustive MAP / ML reference over all M**J multiuser symbol tuples.

Deliberately shares no code with the decoders: the superposition is
formed from full K x J channel and codebook arrays, without consulting
the factor-graph neighbourhoods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .codebook import CodebookSet

DEFAULT_BUDGET = 2**24
LLR_MAX = 50.0


class OracleBudgetError(RuntimeError):
    """The joint table would exceed the configured enumeration budget."""


@dataclass(frozen=True)
class JointPosterior:
    """Normalised joint posterior over (m_1, ..., m_J), 0-based indices.

    ``log_table`` has shape ``lead + (M,) * J`` where ``lead`` is () for a
    single frame or (N,) for a batch.
    """

    log_table: np.ndarray
    log_evidence: np.ndarray
    J: int
    M: int

    @property
    def table(self) -> np.ndarray:
        return np.exp(self.log_table)

    @property
    def lead(self) -> tuple:
        return self.log_table.shape[: self.log_table.ndim - self.J]

    def _user_axes(self):
        n = len(self.lead)
        return tuple(range(n, n + self.J))


def check_budget(M: int, J: int, budget: int = DEFAULT_BUDGET) -> None:
    if M**J > budget:
        raise OracleBudgetError(f"M**J = {M}**{J} = {M**J} exceeds the oracle budget {budget}")


def joint_log_likelihood(y, H, cbs: CodebookSet, N0) -> np.ndarray:
    """-sum_k |y_k - sum_j h_kj x_kj^{m_j}|^2 / N0 for every tuple."""
    y = np.asarray(y, dtype=complex)
    H = np.asarray(H, dtype=complex)
    J, K, M = cbs.codewords.shape
    lead = y.shape[:-1]
    # contrib[..., k, j, m] = h_kj * CB_j[k, m]
    contrib = H[..., :, :, None] * np.transpose(cbs.codewords, (1, 0, 2))
    s = np.zeros(lead + (K,) + (M,) * J, dtype=complex)
    for j in range(J):
        shape = lead + (K,) + tuple(M if a == j else 1 for a in range(J))
        s = s + contrib[..., :, j, :].reshape(shape)
    r = y.reshape(lead + (K,) + (1,) * J) - s
    N0 = np.asarray(N0, dtype=float).reshape(np.shape(N0) + (1,) * J)
    return -np.sum(r.real**2 + r.imag**2, axis=len(lead)) / N0


def joint_posterior(y, H, cbs: CodebookSet, N0, priors=None, budget: int = DEFAULT_BUDGET) -> JointPosterior:
    """Posterior computed in the log domain and normalised around its maximum."""
    J, M = cbs.J, cbs.M
    check_budget(M, J, budget)
    logp = joint_log_likelihood(y, H, cbs, N0)
    lead_n = logp.ndim - J
    if priors is not None:
        lp = np.log(np.asarray(priors, dtype=float))
        lp = np.broadcast_to(lp, logp.shape[:lead_n] + (J, M))
        for j in range(J):
            shape = logp.shape[:lead_n] + tuple(M if a == j else 1 for a in range(J))
            logp = logp + lp[..., j, :].reshape(shape)
    axes = tuple(range(lead_n, lead_n + J))
    Z = logsumexp(logp, axis=axes, keepdims=True)
    return JointPosterior(log_table=logp - Z, log_evidence=np.squeeze(Z, axis=axes), J=J, M=M)


def log_marginal(jp: JointPosterior, j: int) -> np.ndarray:
    axes = jp._user_axes()
    others = tuple(a for i, a in enumerate(axes) if i != j)
    return logsumexp(jp.log_table, axis=others) if others else jp.log_table


def marginal_posterior(jp: JointPosterior, j: int) -> np.ndarray:
    """P(m_j | y): the joint summed over every other user's symbol."""
    if not 0 <= j < jp.J:
        raise IndexError(f"user {j} out of range")
    return np.exp(log_marginal(jp, j))


def _labels(M: int, gray: bool) -> np.ndarray:
    B = int(np.log2(M))
    m = np.arange(M)
    if gray:
        m = m ^ (m >> 1)
    return (m[:, None] >> np.arange(B - 1, -1, -1)) & 1


def exact_bit_llr(jp: JointPosterior, j: int, gray: bool = False, llr_max: float = LLR_MAX) -> np.ndarray:
    """log P(bit=0 | y) - log P(bit=1 | y) for each of user j's bits."""
    lm = log_marginal(jp, j)
    labels = _labels(jp.M, gray)
    out = []
    for i in range(labels.shape[1]):
        zero = labels[:, i] == 0
        with np.errstate(invalid="ignore"):
            llr = logsumexp(lm[..., zero], axis=-1) - logsumexp(lm[..., ~zero], axis=-1)
        llr = np.where(np.isnan(llr), 0.0, llr)
        out.append(np.clip(llr, -llr_max, llr_max))
    return np.stack(out, axis=-1)


def ml_joint_detect(jp: JointPosterior) -> np.ndarray:
    """Most probable tuple; ties resolve to the lexicographically first."""
    lead = jp.lead
    flat = jp.log_table.reshape(lead + (-1,))
    idx = np.argmax(flat, axis=-1)
    return np.stack(np.unravel_index(idx, (jp.M,) * jp.J), axis=-1)


def ml_detect_batch(y, H, cbs: CodebookSet, N0, chunk: int = 256, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """(N, J) joint-ML symbol tuples for a batch of frames."""
    check_budget(cbs.M, cbs.J, budget)
    y = np.asarray(y)
    N = y.shape[0]
    H = np.broadcast_to(H, (N,) + np.shape(H)[-2:])
    N0 = np.broadcast_to(np.asarray(N0, dtype=float), (N,))
    out = np.empty((N, cbs.J), dtype=np.int64)
    for s in range(0, N, chunk):
        sl = slice(s, s + chunk)
        ll = joint_log_likelihood(y[sl], H[sl], cbs, N0[sl])
        idx = np.argmax(ll.reshape(ll.shape[0], -1), axis=-1)
        out[sl] = np.stack(np.unravel_index(idx, (cbs.M,) * cbs.J), axis=-1)
    return out


def map_bit_llr_batch(y, H, cbs: CodebookSet, N0, chunk: int = 256, gray: bool = False,
                      llr_max: float = LLR_MAX) -> np.ndarray:
    """(N, J, B) exact per-bit posterior LLRs for a batch of frames."""
    y = np.asarray(y)
    N = y.shape[0]
    H = np.broadcast_to(H, (N,) + np.shape(H)[-2:])
    N0 = np.broadcast_to(np.asarray(N0, dtype=float), (N,))
    out = np.empty((N, cbs.J, cbs.B))
    for s in range(0, N, chunk):
        sl = slice(s, s + chunk)
        jp = joint_posterior(y[sl], H[sl], cbs, N0[sl])
        for j in range(cbs.J):
            out[sl, j] = exact_bit_llr(jp, j, gray, llr_max)
    return out
