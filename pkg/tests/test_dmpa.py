import itertools

import numpy as np
import pytest

from conftest import random_batch
from scmalab.decoder import DecoderConfig, GridExtentError, decode, dmpa_fn_update, fn_update
from scmalab.decoder.core import init_messages, make_problem
from scmalab.decoder.dmpa import fn_messages, impulse_grid, lattice, noise_grid


def direct_messages(y, points, weights, N0):
    """Sum over every symbol combination, no grid involved."""
    d, M = len(points), len(points[0])
    out = np.zeros((d, M))
    for ms in itertools.product(range(M), repeat=d):
        s = sum(points[a][ms[a]] for a in range(d))
        L = np.exp(-abs(y - s) ** 2 / N0)
        for i in range(d):
            out[i, ms[i]] += L * np.prod([weights[a, ms[a]] for a in range(d) if a != i])
    return out / out.sum(axis=1, keepdims=True)


def on_lattice(rng, shape, w, span=8):
    return w * (rng.integers(-span, span + 1, shape) + 1j * rng.integers(-span, span + 1, shape))


@pytest.mark.parametrize("d_f", [2, 3])
def test_exact_on_lattice(rng, d_f):
    w = 0.05
    for _ in range(10):
        points = [on_lattice(rng, 4, w) for _ in range(d_f)]
        weights = rng.dirichlet(np.ones(4), d_f)
        N0 = rng.uniform(0.1, 0.5)
        y = on_lattice(rng, (), w, span=12)
        got, _ = fn_messages(complex(y), points, weights, N0, w)
        ref = direct_messages(y, points, weights, N0)
        # FFT roundoff is absolute, relative to the largest grid value
        np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-11)


def test_off_lattice_error_shrinks_with_w(rng):
    points = [(rng.normal(size=4) + 1j * rng.normal(size=4)) * 0.5 for _ in range(2)]
    weights = rng.dirichlet(np.ones(4), 2)
    N0 = 0.5
    y = points[0][1] + points[1][2] + 0.3 - 0.2j
    ref = direct_messages(y, points, weights, N0)
    errs = []
    for w in (0.04, 0.01, 0.0025):
        got, _ = fn_messages(y, points, weights, N0, w)
        errs.append(np.max(np.abs(got - ref) / ref))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.02


def test_point_mass_interferer_selects_codeword(rng):
    w = 0.01
    points = [on_lattice(rng, 4, w, span=60) for _ in range(2)]
    weights = np.array([[0.0, 1.0, 0.0, 0.0], [0.25] * 4])
    y = points[0][1] + points[1][3]
    msg, _ = fn_messages(complex(y), points, weights, 1e-3, w)
    assert np.argmax(msg[1]) == 3
    assert msg[1, 3] > 0.99


def test_impulse_grid_conserves_mass(rng):
    pts = rng.normal(size=4) + 1j * rng.normal(size=4)
    wts = rng.dirichlet(np.ones(4))
    grid, (x0, y0) = impulse_grid(pts, wts, 0.05)
    assert grid.sum() == pytest.approx(1.0)
    ix, iy = lattice(pts, 0.05)
    for m in range(4):
        assert grid[ix[m] - x0, iy[m] - y0] >= wts[m]


def test_noise_grid_is_a_density():
    grid, _ = noise_grid(0.2, 0.01)
    assert grid.sum() == pytest.approx(1.0, rel=1e-6)
    assert grid.shape[0] % 2 == 1


def test_extent_error(rng):
    points = [np.array([1.0, -1.0, 1j, -1j]) for _ in range(2)]
    with pytest.raises(GridExtentError, match="extent"):
        fn_messages(0.0, points, np.full((2, 4), 0.25), 0.1, 0.05, wid=0.5)


def test_dmpa_fn_update_matches_mpa_roughly(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 3, (0.1, 0.3))
    prob = make_problem(y, H, cbs, N0)[0]
    s = init_messages(prob, DecoderConfig(variant="dmpa"))
    s.vn_to_fn[:] = rng.dirichlet(np.ones(4), s.vn_to_fn.shape[:-1])
    for k, j in [(0, 0), (1, 4), (3, 5)]:
        a = dmpa_fn_update(s, k, j, DecoderConfig(variant="dmpa", dmpa_w=0.01))
        b = fn_update(s, k, j)
        np.testing.assert_allclose(a, b, atol=0.05)


def test_dmpa_end_to_end_agrees_with_mpa(cbs, rng):
    _, y, H, N0 = random_batch(cbs, rng, 150, (0.02, 0.05))
    a = decode(y, H, cbs, N0, DecoderConfig(variant="mpa"))
    b = decode(y, H, cbs, N0, DecoderConfig(variant="dmpa", dmpa_w=0.05))
    assert np.mean(a.hard_bits == b.hard_bits) > 0.95
    assert np.all(b.counters["fn_multiplies"] > 0)
    assert np.all(b.counters["iterations"] == 10)
