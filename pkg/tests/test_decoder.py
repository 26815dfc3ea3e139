import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_batch, single_fn_codebook
from scmalab.codebook import CodebookSet
from scmalab.decoder import (
    LLR_MAX,
    DecodeResult,
    DecoderConfig,
    DecoderConfigError,
    beliefs_and_llr,
    decode,
    fn_likelihood,
    fn_update,
    init_messages,
    make_problem,
    superposition_constellation,
    superposition_metric,
    update_all_fns,
    vn_update,
)
from scmalab.decoder.core import decode_standard, llr_from_log_beliefs
from scmalab.graph import from_matrix
from scmalab.link import bit_labels, complex_normal
from scmalab.oracle import exact_bit_llr, joint_posterior, marginal_posterior


def _problem(cbs, rng, n=4, N0=0.5):
    _, y, H, _ = random_batch(cbs, rng, n)
    return make_problem(y, H, cbs, np.full(n, N0))[0]


@pytest.mark.parametrize("variant, value", [("mpa", 0.25), ("log-mpa", -np.log(4))])
def test_init_messages(cbs, rng, variant, value):
    st_ = init_messages(_problem(cbs, rng), DecoderConfig(variant=variant))
    assert np.allclose(st_.vn_to_fn, value)


def test_init_messages_binary_log(rng):
    g = from_matrix(np.ones((1, 2), dtype=int), distinct_columns=False)
    cb = CodebookSet(g, np.array([[[1, -1]], [[1j, -1j]]], dtype=complex))
    prob = make_problem(np.zeros(1), np.ones((1, 2)), cb, 1.0)[0]
    s = init_messages(prob, DecoderConfig(variant="log-mpa"))
    assert np.allclose(s.vn_to_fn, -np.log(2))
    assert np.allclose(np.exp(s.vn_to_fn).sum(-1), 1.0)


def test_likelihood_table(cbs, rng):
    H = complex_normal(rng, (4, 6))
    k = 1
    users = cbs.graph.xi[k]
    combo = (2, 0, 3)
    y = np.zeros(4, dtype=complex)
    y[k] = sum(H[k, j] * cbs.codewords[j][k, m] for j, m in zip(users, combo))
    T = fn_likelihood(y, H, cbs, k, 0.3)
    assert T.size == 64
    assert T[combo] == 0.0
    assert np.all(np.delete(T.ravel(), np.ravel_multi_index(combo, T.shape)) < 0)


def test_likelihood_phase_invariance(cbs, rng):
    H = complex_normal(rng, (4, 6))
    y = complex_normal(rng, 4)
    rot = np.exp(1j * 1.234)
    for k in range(4):
        np.testing.assert_allclose(fn_likelihood(y * rot, H * rot, cbs, k, 0.7),
                                   fn_likelihood(y, H, cbs, k, 0.7), atol=1e-12)


def test_fn_update_single_user_is_likelihood(rng):
    g = from_matrix(np.array([[1]]))
    cw = complex_normal(rng, (1, 1, 4))
    cb = CodebookSet(g, cw)
    y, H = complex_normal(rng, 1), complex_normal(rng, (1, 1))
    prob = make_problem(y, H, cb, 0.4)[0]
    s = init_messages(prob, DecoderConfig())
    psi = np.exp(-np.abs(y[0] - H[0, 0] * cw[0, 0]) ** 2 / 0.4)
    np.testing.assert_allclose(fn_update(s, 0, 0)[0], psi / psi.sum(), rtol=1e-12)


def test_fn_update_two_users_row_sums(rng):
    cb = single_fn_codebook(rng, J=2)
    y, H = complex_normal(rng, 1), complex_normal(rng, (1, 2))
    prob = make_problem(y, H, cb, 0.6)[0]
    s = init_messages(prob, DecoderConfig())
    psi = np.exp(fn_likelihood(y, H, cb, 0, 0.6))
    np.testing.assert_allclose(fn_update(s, 0, 0)[0], psi.sum(1) / psi.sum(), rtol=1e-12)
    np.testing.assert_allclose(fn_update(s, 0, 1)[0], psi.sum(0) / psi.sum(), rtol=1e-12)


def test_fn_update_marginalises_other_two_users(cbs, rng):
    prob = _problem(cbs, rng, n=1)
    s = init_messages(prob, DecoderConfig())
    s.vn_to_fn[:] = rng.dirichlet(np.ones(4), s.vn_to_fn.shape[:-1])
    k = 2
    users = cbs.graph.xi[k]
    psi = np.exp(prob.tables[0, k])
    inc = s.vn_to_fn[0, k]
    for slot, j in enumerate(users):
        ref = np.zeros(4)
        for ms in itertools.product(range(4), repeat=3):
            w = psi[ms]
            for a in range(3):
                if a != slot:
                    w *= inc[a, ms[a]]
            ref[ms[slot]] += w
        np.testing.assert_allclose(fn_update(s, k, j)[0], ref / ref.sum(), rtol=1e-12)


def test_vn_update_rules(cbs, rng):
    s = init_messages(_problem(cbs, rng, n=1), DecoderConfig())
    s.fn_to_vn[:] = rng.dirichlet(np.ones(4), s.fn_to_vn.shape[:-1])
    g = cbs.graph
    j = 3
    k1, k2 = g.zeta[j]
    other = s.fn_to_vn[0, k2, g.slot(k2, j)]
    out, _ = vn_update(s, j, k1)
    np.testing.assert_allclose(out[0], other / other.sum(), rtol=1e-12)


def test_vn_update_degree_one_returns_prior(rng):
    g = from_matrix(np.array([[1]]))
    cb = CodebookSet(g, complex_normal(rng, (1, 1, 4)))
    prior = np.array([0.1, 0.2, 0.3, 0.4])
    prob = make_problem(np.zeros(1), np.ones((1, 1)), cb, 1.0, priors=prior)[0]
    s = init_messages(prob, DecoderConfig())
    s.fn_to_vn[:] = rng.dirichlet(np.ones(4))
    np.testing.assert_allclose(vn_update(s, 0, 0)[0][0], prior, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (2, 4, 3, 4), elements=st.floats(1e-6, 1.0)))
def test_vn_output_normalised(msgs):
    from scmalab import default_codebook

    cb = default_codebook()
    prob = make_problem(np.zeros((2, 4)), np.ones((2, 4, 6)), cb, 1.0)[0]
    for variant in ("mpa", "log-mpa"):
        s = init_messages(prob, DecoderConfig(variant=variant))
        s.fn_to_vn[:] = msgs if variant == "mpa" else np.log(msgs)
        for j in range(6):
            out, _ = vn_update(s, j)
            if variant == "mpa":
                np.testing.assert_allclose(out.sum(-1), 1.0, atol=1e-9)
            else:
                np.testing.assert_allclose(np.logaddexp.reduce(out, axis=-1), 0.0, atol=1e-9)


def test_degenerate_product_falls_back_to_uniform(rng):
    g = from_matrix(np.array([[1], [1]]))
    cb = CodebookSet(g, complex_normal(rng, (1, 2, 4)))
    prob = make_problem(np.zeros(2), np.ones((2, 1)), cb, 1.0, priors=[1.0, 0, 0, 0])[0]
    s = init_messages(prob, DecoderConfig())
    s.fn_to_vn[0, 0, 0] = [0.0, 1.0, 0.0, 0.0]
    s.fn_to_vn[0, 1, 0] = [0.0, 1.0, 0.0, 0.0]
    out, degenerate = vn_update(s, 0)
    assert degenerate.all()
    np.testing.assert_allclose(out[0], 0.25)
    from scmalab.decoder import update_all_vns

    with pytest.warns(RuntimeWarning):
        update_all_vns(s)


def test_llr_groupings():
    logI = np.log(np.array([0.1, 0.2, 0.3, 0.4]))
    llr = llr_from_log_beliefs(logI, bit_labels(4))
    assert llr[0] == pytest.approx(np.log(0.3 / 0.7))
    assert llr[1] == pytest.approx(np.log(0.4 / 0.6))


def test_concentrated_belief_gives_zero_bits():
    logI = np.log(np.array([1.0, 0.0, 0.0, 0.0]) + 1e-300)
    llr = llr_from_log_beliefs(logI, bit_labels(4))
    assert np.all(llr == LLR_MAX)
    with np.errstate(divide="ignore"):
        llr = llr_from_log_beliefs(np.log([0.0, 0.0, 0.0, 1.0]), bit_labels(4))
    assert np.all(llr == -LLR_MAX)


def test_zero_iterations_gives_zero_llr(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 5)
    res = decode(y, H, cbs, N0, DecoderConfig(iterations=0))
    assert np.all(res.llr == 0)
    assert np.all(res.hard_bits == 0)


@pytest.mark.parametrize("variant", ["mpa", "log-mpa"])
def test_tree_exactness(variant, rng):
    for _ in range(25):
        cb = single_fn_codebook(rng)
        y, H = complex_normal(rng, 1), complex_normal(rng, (1, 3))
        N0 = rng.uniform(0.05, 2)
        res = decode(y, H, cb, N0, DecoderConfig(variant=variant, iterations=1))
        jp = joint_posterior(y, H, cb, N0)
        for j in range(3):
            np.testing.assert_allclose(res.llr[j], exact_bit_llr(jp, j), atol=1e-9)
            np.testing.assert_allclose(res.beliefs[j], marginal_posterior(jp, j), atol=1e-9)


@pytest.mark.parametrize("schedule", ["flooding", "serial-vn"])
def test_high_snr_awgn_recovers_symbols(cbs, schedule):
    rng = np.random.default_rng(1)
    n = 10_000
    sym = rng.integers(0, 4, (n, 6))
    X = cbs.codewords[np.arange(6), :, sym].swapaxes(-1, -2)
    N0 = (1 / 8) / 10**3  # 30 dB
    y = X.sum(-1) + np.sqrt(N0) * complex_normal(rng, (n, 4))
    res = decode(y, np.ones((n, 4, 6)), cbs, N0, DecoderConfig(schedule=schedule))
    assert np.mean(np.all(res.hard_symbols == sym, axis=1)) >= 0.999


def test_hard_bits_follow_llr_sign(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 200)
    res = decode(y, H, cbs, N0)
    np.testing.assert_array_equal(res.hard_bits, (res.llr < 0).astype(int))


def test_table_offset_leaves_decisions(cbs, rng):
    prob = _problem(cbs, rng, n=50)
    for variant in ("mpa", "log-mpa", "max-log"):
        cfg = DecoderConfig(variant=variant)
        a = decode_standard(prob, cfg)
        prob.tables = prob.tables + 3.7
        b = decode_standard(prob, cfg)
        prob.tables = prob.tables - 3.7
        np.testing.assert_array_equal(a.hard_symbols, b.hard_symbols)
        np.testing.assert_array_equal(a.hard_bits, b.hard_bits)


def test_user_permutation_equivariance(cbs, rng):
    perm = [3, 0, 5, 1, 4, 2]
    g2 = from_matrix(cbs.graph.F[:, perm])
    cb2 = CodebookSet(g2, cbs.codewords[perm])
    _, y, H, N0 = random_batch(cbs, rng, 40)
    for variant in ("mpa", "log-mpa", "max-log"):
        a = decode(y, H, cbs, N0, DecoderConfig(variant=variant))
        b = decode(y, H[..., perm], cb2, N0, DecoderConfig(variant=variant))
        np.testing.assert_allclose(b.llr, a.llr[:, perm], atol=1e-8)
        np.testing.assert_array_equal(b.hard_symbols, a.hard_symbols[:, perm])


def test_lut_log_mpa_close_to_exact(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 500, (0.02, 0.2))
    a = decode(y, H, cbs, N0, DecoderConfig(variant="log-mpa"))
    b = decode(y, H, cbs, N0, DecoderConfig(variant="log-mpa", max_star_mode="lut", lut_intervals=8))
    c = decode(y, H, cbs, N0, DecoderConfig(variant="log-mpa", max_star_mode="lut", lut_intervals=4096))
    assert np.mean(a.hard_bits == b.hard_bits) > 0.97
    assert np.abs(c.llr - a.llr).max() < np.abs(b.llr - a.llr).max()


def test_serial_schedule_counts(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 10)
    a = decode(y, H, cbs, N0, DecoderConfig(schedule="flooding"))
    b = decode(y, H, cbs, N0, DecoderConfig(schedule="serial-vn"))
    # each user refreshes its d_v incoming messages: J * d_v = K * d_f edges per iteration
    np.testing.assert_array_equal(a.counters["fn_edge_updates"], b.counters["fn_edge_updates"])
    assert np.mean(a.hard_bits == b.hard_bits) > 0.9


def test_mpa_counters(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 3)
    res = decode(y, H, cbs, N0, DecoderConfig(iterations=10))
    # 12 edges, 64 combinations, 2 multiplies each, 10 iterations
    assert np.all(res.counters["fn_multiplies"] == 12 * 64 * 2 * 10)
    assert np.all(res.counters["iterations"] == 10)


def test_single_frame_shapes(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 1)
    res = decode(y[0], H[0], cbs, N0[0])
    assert isinstance(res, DecodeResult)
    assert res.llr.shape == (6, 2) and res.hard_symbols.shape == (6,) and res.beliefs.shape == (6, 4)
    np.testing.assert_allclose(res.beliefs.sum(-1), 1.0)


def test_superposition_utilities(cbs):
    Z = superposition_constellation(cbs, 0)
    assert Z.size == 4**3
    h = 0.3 - 0.8j
    assert superposition_metric(h * Z[5], h, Z[5], N0=0.1) == pytest.approx(0, abs=1e-30)
    y = 0.2 + 0.1j
    d = np.abs(y - h * Z) ** 2
    m = superposition_metric(y, h, Z, sigma2=0.05)
    np.testing.assert_array_equal(np.argsort(-m, kind="stable"), np.argsort(d, kind="stable"))
    np.testing.assert_allclose(m, superposition_metric(y, h, Z, N0=0.1))


@pytest.mark.parametrize(
    "kw",
    [
        {"variant": "bp"},
        {"iterations": -1},
        {"max_star_mode": "approx"},
        {"schedule": "random"},
        {"variant": "pm-mpa", "pm_t": 11},
        {"variant": "pm-mpa", "pm_u": 7},
        {"variant": "eml", "eml_mc": 5},
        {"variant": "dmpa", "dmpa_w": 0.0},
        {"variant": "dmpa", "schedule": "serial-vn"},
    ],
)
def test_config_validation(kw):
    with pytest.raises(DecoderConfigError):
        DecoderConfig(**kw).validate(6, 4)


def test_config_dict_round_trip():
    cfg = DecoderConfig(variant="pm-mpa", pm_t=5, pm_u=3)
    assert DecoderConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(DecoderConfigError, match="unknown"):
        DecoderConfig.from_dict({"variant": "mpa", "iters": 3})


def test_beliefs_match_unnormalised_product(cbs, rng):
    prob = _problem(cbs, rng, n=2)
    s = init_messages(prob, DecoderConfig())
    update_all_fns(s, DecoderConfig())
    res = beliefs_and_llr(s)
    g = cbs.graph
    for j in range(6):
        I = np.prod([s.fn_to_vn[:, k, g.slot(k, j)] for k in g.zeta[j]], axis=0) / 4
        np.testing.assert_allclose(res.beliefs[:, j], I / I.sum(-1, keepdims=True), rtol=1e-10)


def test_no_warnings_on_ordinary_frames(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 200, (0.001, 0.01))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        decode(y, H, cbs, N0)
