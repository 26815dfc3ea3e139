"""Extended Max-Log MPA: per-user candidate truncation to the m_c most
reliable symbols after a first full FN update."""

from __future__ import annotations

import numpy as np

from .core import (
    LOG_FLOOR,
    DecodeResult,
    DecoderConfig,
    MessageState,
    Problem,
    _fn_node_log,
    _user_edges,
    beliefs_and_llr,
    decode_standard,
    init_messages,
    make_problem,
    update_all_fns,
    update_all_vns,
)


def symbol_reliability(state: MessageState) -> np.ndarray:
    """(N, J, M) sum of each user's incoming log FN messages."""
    ks, slots = _user_edges(state.problem.cbs.graph)
    return state.fn_to_vn[:, ks, slots].sum(axis=2)


def top_candidates(rl: np.ndarray, m_c: int) -> np.ndarray:
    """Ascending indices of the m_c largest reliabilities (ties: lower index)."""
    order = np.argsort(-rl, axis=-1, kind="stable")[..., :m_c]
    return np.sort(order, axis=-1)


def _gather_table(table, cand):
    # table (N, M, ..., M), cand (N, d_f, m_c) -> (N, m_c, ..., m_c)
    d_f = cand.shape[1]
    sub = table
    for a in range(d_f):
        shape = [cand.shape[0]] + [1] * d_f
        shape[1 + a] = cand.shape[2]
        sub = np.take_along_axis(sub, cand[:, a].reshape(shape), axis=1 + a)
    return sub


def truncated_fn_update(state: MessageState, k: int, cand: np.ndarray, config: DecoderConfig) -> np.ndarray:
    """Log FN update of resource ``k`` restricted to candidate symbols.

    ``cand`` is (N, J, m_c); non-candidate outputs are set to the floor.
    Returns (N, d_f, M).
    """
    g = state.problem.cbs.graph
    ck = cand[:, list(g.xi[k])]
    sub = _gather_table(state.problem.tables[:, k], ck)
    inc = np.take_along_axis(state.vn_to_fn[:, k], ck, axis=-1)
    out_sub = _fn_node_log(sub, inc, config.mode, config.lut_intervals)
    full = np.full(state.vn_to_fn[:, k].shape, LOG_FLOOR)
    np.put_along_axis(full, ck, out_sub, axis=-1)
    return full


def decode_eml_problem(problem: Problem, config: DecoderConfig, callback=None) -> DecodeResult:
    M = problem.cbs.M
    m_c = config.eml_mc if config.eml_mc is not None else M
    if m_c >= M or config.iterations == 0:
        return decode_standard(problem, config, callback)

    g = problem.cbs.graph
    state = init_messages(problem, config)
    update_all_fns(state, config)
    cand = top_candidates(symbol_reliability(state), m_c)
    update_all_vns(state)
    state.iteration = 1
    if callback is not None:
        callback(state)

    combos = m_c**g.d_f
    for _ in range(config.iterations - 1):
        for k in range(g.K):
            state.fn_to_vn[:, k] = truncated_fn_update(state, k, cand, config)
        n_edges = g.K * g.d_f
        state.count("fn_edge_updates", n_edges)
        state.count("fn_combinations", n_edges * combos)
        state.count("fn_multiplies", n_edges * combos * (g.d_f - 1))
        state.count("fn_max", n_edges * (combos - m_c))
        update_all_vns(state)
        state.iteration += 1
        if callback is not None:
            callback(state)
    res = beliefs_and_llr(state, config)
    res.counters["eml_candidates"] = cand
    return res


def decode_eml(y, H, cbs, N0, config: DecoderConfig, priors=None) -> DecodeResult:
    config = config.validate(cbs.J, cbs.M)
    problem, single = make_problem(y, H, cbs, N0, priors)
    res = decode_eml_problem(problem, config)
    return res.squeeze() if single else res
