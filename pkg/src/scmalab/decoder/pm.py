"""Partial-marginalisation MPA.

After ``t'`` ordinary iterations the ``u'`` most reliable users (largest
ratio of best to second-best belief) are fixed to their best codeword.
The remaining iterations only update the undecided users, with the fixed
users' symbols sliced out of each likelihood table instead of summed over.
"""

from __future__ import annotations

import numpy as np

from ..link import bit_labels
from .core import (
    DecodeResult,
    DecoderConfig,
    MessageState,
    Problem,
    _fn_node_prob,
    _normalize,
    _vn_outgoing,
    beliefs_and_llr,
    decode_standard,
    init_messages,
    log_beliefs,
    make_problem,
    run_iterations,
)


def reliability(beliefs: np.ndarray) -> np.ndarray:
    """Ratio of the largest to the second-largest belief per user."""
    L = -np.sort(-beliefs, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = L[..., 0] / L[..., 1]
    return np.where(np.isnan(w), 1.0, w)


def select_users(beliefs: np.ndarray, u: int, selection: str = "reliability",
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """(N, u) indices of the users to fix in each frame."""
    N, J, _ = beliefs.shape
    if selection == "random":
        if rng is None:
            raise ValueError("random PM selection needs an rng")
        return np.stack([np.sort(rng.choice(J, size=u, replace=False)) for _ in range(N)])
    w = reliability(beliefs)
    # stable sort: ties go to the lower user index
    return np.argsort(-w, axis=-1, kind="stable")[:, :u]


def _tail_iteration(state: MessageState, n: int, fixed: dict[int, int]) -> tuple[int, int, int]:
    """One flooding iteration for frame ``n`` with ``fixed`` users frozen.

    Returns (edge updates, combinations, multiplies) actually performed.
    """
    prob = state.problem
    g = prob.cbs.graph
    edges = combos = mults = 0
    for k in range(g.K):
        users = g.xi[k]
        free = [i for i, j in enumerate(users) if j not in fixed]
        if not free:
            continue
        idx = tuple(fixed[j] if j in fixed else slice(None) for j in users)
        sub = prob.tables[n, k][idx]
        inc = state.vn_to_fn[n, k, free]
        out = _fn_node_prob(sub[None], inc[None])[0]
        state.fn_to_vn[n, k, free] = out
        c = prob.cbs.M ** len(free)
        edges += len(free)
        combos += len(free) * c
        mults += len(free) * c * (len(free) - 1)
    for j in range(g.J):
        if j in fixed:
            continue
        ks = g.zeta[j]
        slots = [g.slot(k, j) for k in ks]
        incoming = state.fn_to_vn[n, list(ks), slots][None]
        out, degenerate = _normalize(_vn_outgoing(incoming, prob.log_prior[n:n + 1, j], "prob"), "prob")
        state.vn_to_fn[n, list(ks), slots] = out[0]
        state.degenerate[n] |= bool(degenerate.any())
    return edges, combos, mults


def decode_pm_problem(problem: Problem, config: DecoderConfig, rng=None, callback=None) -> DecodeResult:
    t_fix = config.pm_t if config.pm_t is not None else config.iterations
    u = config.pm_u
    if t_fix >= config.iterations or u == 0:
        return decode_standard(problem, config, callback)

    state = init_messages(problem, config)
    run_iterations(state, config, t_fix, callback)
    logI = log_beliefs(state)
    beliefs = np.exp(logI - logI.max(axis=-1, keepdims=True))
    beliefs /= beliefs.sum(axis=-1, keepdims=True)
    chosen = select_users(beliefs, u, config.pm_selection, rng)
    decided = np.argmax(logI, axis=-1)

    N = problem.N
    extra = {"fn_edge_updates": np.zeros(N), "fn_combinations": np.zeros(N), "fn_multiplies": np.zeros(N)}
    for n in range(N):
        fixed = {int(j): int(decided[n, j]) for j in chosen[n]}
        one_hot = np.zeros(problem.cbs.M)
        g = problem.cbs.graph
        for j, m in fixed.items():
            one_hot[:] = 0.0
            one_hot[m] = 1.0
            for k in g.zeta[j]:
                state.vn_to_fn[n, k, g.slot(k, j)] = one_hot
        for _ in range(config.iterations - t_fix):
            e, c, mu = _tail_iteration(state, n, fixed)
            extra["fn_edge_updates"][n] += e
            extra["fn_combinations"][n] += c
            extra["fn_multiplies"][n] += mu
    state.iteration = config.iterations

    res = beliefs_and_llr(state, config)
    for key, v in extra.items():
        res.counters[key] = res.counters.get(key, 0) + v
    res.counters["pm_fixed_users"] = np.full(N, u)

    labels = bit_labels(problem.cbs.M, config.gray)
    rows = np.arange(N)[:, None]
    sym = decided[rows, chosen]
    res.hard_symbols[rows, chosen] = sym
    bits = labels[sym]
    res.hard_bits[rows, chosen] = bits
    res.llr[rows, chosen] = np.where(bits == 0, config.llr_max, -config.llr_max)
    one = np.zeros((N, u, problem.cbs.M))
    np.put_along_axis(one, sym[..., None], 1.0, axis=-1)
    res.beliefs[rows, chosen] = one
    return res


def decode_pm(y, H, cbs, N0, config: DecoderConfig, priors=None, rng=None) -> DecodeResult:
    config = config.validate(cbs.J, cbs.M)
    problem, single = make_problem(y, H, cbs, N0, priors)
    res = decode_pm_problem(problem, config, rng=rng)
    return res.squeeze() if single else res
