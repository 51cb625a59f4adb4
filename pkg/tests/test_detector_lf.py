import numpy as np
import pytest

from lcma.channel_model import ChannelRealization
from lcma.coeff_select import select_coefficients
from lcma.detector_lf import build_filter, app_lf, app_lf_seq
from lcma.oracles import oracle_app
from lcma.ring_code import PamMapper, map_pam


def make_h(hm, rho):
    hm = np.atleast_2d(np.asarray(hm, dtype=float))
    return ChannelRealization(H=hm, rho=rho, fading="awgn", n_r=hm.shape[0], n_s=1)


def test_build_filter_scalar_case():
    # N=1: the regularized-inverse direction reduces to a scalar, and unit-norm
    # scaling pins psi to H itself (see ledger on the spec's example value)
    h = make_h([[1.0]], rho=3.0)
    fb = build_filter(h, [[1]], 2, theta=3.0)
    assert fb.psi[0, 0] == pytest.approx(1.0)
    assert fb.sigma2[0] == pytest.approx(1.0)
    # pre-normalization direction (the MMSE-style scalar 1/(rho+1)) is positive
    raw = 1.0 * 1.0 / (3.0 * 1.0 + 1.0)
    assert raw == pytest.approx(0.25)


def test_build_filter_orthonormal_no_residual():
    h = make_h(np.eye(3), rho=1000.0)
    fb = build_filter(h, np.eye(3, dtype=int), 2)
    assert np.allclose(fb.sigma2, 1.0, atol=1e-3)


def test_build_filter_sigma2_matches_direct_sum():
    rng = np.random.default_rng(0)
    for _ in range(20):
        h = make_h(rng.standard_normal((3, 4)), rho=2.5)
        a = rng.integers(-2, 3, (3, 4))
        a[np.all(a == 0, axis=1), 0] = 1
        fb = build_filter(h, a, 4)
        for l in range(3):
            expect = 1.0
            for i in range(4):
                if a[l, i] == 0:
                    expect += 2.5 * fb.psi[l, i] ** 2
            assert fb.sigma2[l] == pytest.approx(expect, rel=1e-12)


def test_build_filter_rows_unit_norm():
    rng = np.random.default_rng(1)
    h = make_h(rng.standard_normal((4, 6)), rho=5.0)
    fb = build_filter(h, rng.integers(-1, 2, (5, 6)) + np.eye(5, 6, dtype=int), 2)
    assert np.allclose(np.linalg.norm(fb.W, axis=1), 1.0)


def test_build_filter_theta_validation():
    h = make_h(np.eye(2), rho=1.0)
    with pytest.raises(ValueError):
        build_filter(h, np.eye(2, dtype=int), 2, theta=0.0)


def test_app_lf_scalar_closed_form():
    # d=1, q=2, psi=1, sigma2=1, rho=1, ytilde=0.9 -> p(1) ~ 0.858
    h = make_h([[1.0]], rho=1.0)
    fb = build_filter(h, [[1]], 2, theta=1.0)
    app = app_lf(fb, [0.9], [[1]], 2)
    expected = np.exp(-0.005) / (np.exp(-0.005) + np.exp(-1.805))
    assert app[0, 1] == pytest.approx(expected, abs=1e-12)


def test_app_lf_zero_rho_uniform():
    h = make_h(np.ones((2, 3)), rho=0.0)
    a = np.array([[1, 1, 0], [0, 1, 1]])
    fb = build_filter(h, a, 2, theta=1.0)
    app = app_lf(fb, [0.4, -0.2], a, 2)
    assert np.allclose(app, 0.5)


def test_app_lf_single_support_is_per_user_demod():
    # a_l = e_l: enumeration collapses to a one-user posterior
    rng = np.random.default_rng(2)
    h = make_h(np.eye(2) + 0.01 * rng.standard_normal((2, 2)), rho=4.0)
    a = np.eye(2, dtype=int)
    fb = build_filter(h, a, 2)
    y = rng.standard_normal(2)
    app = app_lf(fb, y, a, 2)
    mapper = PamMapper(2)
    for l in range(2):
        yf = fb.W[l] @ y
        d = (yf - np.sqrt(4.0) * fb.psi[l, l] * mapper.levels()) ** 2
        ref = np.exp(-d / (2 * fb.sigma2[l]))
        ref /= ref.sum()
        assert np.allclose(app[l], ref, atol=1e-12)


def test_app_lf_rows_are_distributions():
    rng = np.random.default_rng(3)
    for q in (2, 4):
        h = make_h(rng.standard_normal((3, 4)), rho=3.0)
        a = rng.integers(0, q, (4, 4))
        a[np.all(a % q == 0, axis=1), 0] = 1
        fb = build_filter(h, a, q)
        app = app_lf(fb, rng.standard_normal(3), a % q, q)
        assert np.all(app >= 0)
        assert np.allclose(app.sum(axis=1), 1.0, atol=1e-9)


def test_app_lf_support_cap():
    h = make_h(np.ones((1, 13)), rho=1.0)
    a = np.ones((1, 13), dtype=int)
    fb = build_filter(h, a, 2)
    with pytest.raises(ValueError):
        app_lf(fb, [0.0], a, 2)


def test_app_lf_full_support_exact_posterior_of_projection():
    # with every user enumerated the LF posterior equals the exhaustive
    # posterior of the projected one-dimensional channel exactly
    rng = np.random.default_rng(4)
    mapper = PamMapper(2)
    for _ in range(20):
        h = make_h(rng.standard_normal((3, 3)), rho=4.0)
        sel = select_coefficients(h, 3, 2)
        fb = build_filter(h, sel.a_tilde, 2)
        c = rng.integers(0, 2, 3)
        y = np.sqrt(4.0) * h.H @ map_pam(mapper, c) + rng.standard_normal(3)
        app = app_lf(fb, y, sel.a_mod.data, 2, support="full")
        for l in range(3):
            proj = ChannelRealization(
                H=fb.psi[l][None, :], rho=4.0, fading="awgn", n_r=1, n_s=1
            )
            ref = oracle_app(proj, [fb.W[l] @ y], sel.a_mod.data[l][None, :], 2)
            assert np.abs(app[l] - ref[0]).max() < 1e-9


def test_app_lf_integer_support_covers_mod_q_dropouts():
    # a row entry of +-2 at q=2 reduces to 0 but stays enumerated: the stream
    # posterior must remain calibrated (the Gaussian residual excludes it)
    h = make_h(np.array([[1.0, 0.8], [0.2, -1.0]]), rho=25.0)
    a_tilde = np.array([[1, 2]])
    fb = build_filter(h, a_tilde, 2)
    assert fb.support[0].tolist() == [True, True]
    assert fb.sigma2[0] == pytest.approx(1.0)
    rng = np.random.default_rng(5)
    mapper = PamMapper(2)
    c = np.array([1, 0])
    y = 5.0 * h.H @ map_pam(mapper, c) + rng.standard_normal(2)
    app = app_lf(fb, y, a_tilde % 2, 2)
    # bin of the true candidate is c[0] since the second coefficient is 0 mod 2
    assert app[0, c[0]] > 0.9


def test_app_lf_seq_matches_single_column():
    rng = np.random.default_rng(6)
    h = make_h(rng.standard_normal((2, 2)), rho=2.0)
    a = np.array([[1, 1], [0, 1]])
    fb = build_filter(h, a, 2)
    y = rng.standard_normal((2, 7))
    seq = app_lf_seq(fb, y, a, 2)
    for t in range(7):
        assert np.allclose(seq[:, t, :], app_lf(fb, y[:, t], a, 2))
