import numpy as np
import pytest

from lcma.channel_model import ChannelRealization
from lcma.coeff_select import lll_reduce, select_coefficients
from lcma.oracles import oracle_int_det, oracle_shortest
from lcma.zq_algebra import ZqMatrix, is_unit_invertible


def rand_channel(rng, k=4, n=4, rho=10.0):
    return ChannelRealization(
        H=rng.standard_normal((n, k)), rho=rho, fading="awgn", n_r=n, n_s=1
    )


def gso_mu(b):
    n = b.shape[1]
    bstar = np.zeros_like(b)
    mu = np.zeros((n, n))
    for i in range(n):
        v = b[:, i].copy()
        for j in range(i):
            mu[i, j] = (b[:, i] @ bstar[:, j]) / (bstar[:, j] @ bstar[:, j])
            v -= mu[i, j] * bstar[:, j]
        bstar[:, i] = v
    return bstar, mu


def test_lll_identity_unchanged():
    red, t = lll_reduce(np.eye(3))
    assert np.allclose(red, np.eye(3))
    assert np.array_equal(t, np.eye(3, dtype=np.int64))


def test_lll_shortens_skewed_basis():
    basis = np.array([[1.0, 0.99], [0.0, 0.01]])
    red, t = lll_reduce(basis)
    assert np.max(np.linalg.norm(red, axis=0)) < np.max(np.linalg.norm(basis, axis=0))
    assert np.allclose(basis @ t, red)


def test_lll_postconditions_random():
    # unimodular transform, size reduction, Lovasz condition at delta
    rng = np.random.default_rng(0)
    delta = 0.99
    for _ in range(100):
        basis = rng.standard_normal((4, 4))
        if abs(np.linalg.det(basis)) < 1e-6:
            continue
        red, t = lll_reduce(basis, delta)
        assert abs(oracle_int_det(t)) == 1
        assert np.allclose(basis @ t, red, atol=1e-9)
        bstar, mu = gso_mu(red)
        assert np.all(np.abs(mu[np.tril_indices(4, -1)]) <= 0.5 + 1e-9)
        for k in range(1, 4):
            lhs = bstar[:, k] @ bstar[:, k]
            rhs = (delta - mu[k, k - 1] ** 2) * (bstar[:, k - 1] @ bstar[:, k - 1])
            assert lhs >= rhs - 1e-9


def test_lll_rejects_bad_input():
    with pytest.raises(ValueError):
        lll_reduce(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        lll_reduce(np.eye(2), delta=0.2)
    with pytest.raises(ValueError):
        lll_reduce(np.ones((2, 3)))


def test_select_zero_rho_gives_unit_vectors():
    rng = np.random.default_rng(1)
    h = rand_channel(rng, rho=0.0)
    sel = select_coefficients(h, 4, 4)
    # Sigma = I, so the metric is the plain squared norm: unit vectors win
    assert np.all(np.abs(sel.a_tilde).sum(axis=1) == 1)
    assert np.linalg.matrix_rank(sel.a_tilde.astype(float)) == 4
    assert np.allclose(sel.metric_per_row, 1.0)


def test_select_high_snr_identity_channel():
    # brute force over small integer vectors confirms unit vectors win
    h = ChannelRealization(H=np.eye(2), rho=1e6, fading="awgn", n_r=2, n_s=1)
    sel = select_coefficients(h, 2, 2)
    assert sorted(np.abs(sel.a_tilde).sum(axis=1).tolist()) == [1, 1]
    gram = np.linalg.inv(1e6 * np.eye(2) + np.eye(2))
    _, opt = oracle_shortest(gram)
    assert sel.metric_per_row[0] <= 2 * opt


def test_select_metrics_sorted_and_canonical():
    rng = np.random.default_rng(2)
    for _ in range(20):
        h = rand_channel(rng)
        sel = select_coefficients(h, 4, 2)
        assert np.all(np.diff(sel.metric_per_row) >= -1e-12)
        for row in sel.a_tilde:
            nz = row[row != 0]
            assert len(nz) and nz[0] > 0


@pytest.mark.parametrize("q", [2, 4, 8])
def test_select_square_always_unit_invertible(q):
    rng = np.random.default_rng(3)
    for _ in range(25):
        h = rand_channel(rng, k=5, n=3, rho=rng.uniform(0.1, 30))
        sel = select_coefficients(h, 5, q)
        ok, _ = is_unit_invertible(sel.a_mod)
        assert ok
        assert not sel.used_identity_fallback


def test_select_rectangular_rank():
    rng = np.random.default_rng(4)
    for _ in range(20):
        h = rand_channel(rng, k=5, n=4)
        sel = select_coefficients(h, 3, 2)
        assert sel.a_tilde.shape == (3, 5)
        assert np.linalg.matrix_rank(sel.a_tilde.astype(float)) == 3


def test_select_rejects_bad_l():
    rng = np.random.default_rng(5)
    h = rand_channel(rng, k=3, n=3)
    with pytest.raises(ValueError):
        select_coefficients(h, 4, 2)


def test_select_first_row_matches_shortest_oracle():
    # the shortest selected row should essentially be the shortest vector
    rng = np.random.default_rng(6)
    for _ in range(30):
        h = rand_channel(rng, k=3, n=3, rho=5.0)
        sel = select_coefficients(h, 3, 2)
        gram = np.linalg.inv(5.0 * (h.H.T @ h.H) + np.eye(3))
        _, opt = oracle_shortest(gram)
        assert sel.metric_per_row[0] <= 2.0 * opt + 1e-12


def test_select_beats_identity_rate_proxy():
    # metric of the selected max row never exceeds the identity matrix's max
    # metric (the identity rows are always candidates for the min-max problem)
    rng = np.random.default_rng(7)
    wins = 0
    trials = 50
    for _ in range(trials):
        h = rand_channel(rng, k=4, n=4, rho=8.0)
        sel = select_coefficients(h, 4, 2)
        minv = np.linalg.inv(8.0 * (h.H.T @ h.H) + np.eye(4))
        id_metrics = np.diag(minv)
        wins += sel.metric_per_row.max() <= id_metrics.max() + 1e-12
    assert wins >= int(0.95 * trials)


def test_select_cache_consistency():
    rng = np.random.default_rng(8)
    h = rand_channel(rng)
    a = select_coefficients(h, 4, 2)
    b = select_coefficients(h, 4, 2)
    assert a is b  # memoized
    h2 = ChannelRealization(H=h.H.copy(), rho=h.rho, fading="awgn", n_r=h.n_r, n_s=h.n_s)
    c = select_coefficients(h2, 4, 2)
    assert np.array_equal(a.a_tilde, c.a_tilde)
