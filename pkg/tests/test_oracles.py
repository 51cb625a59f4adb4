import numpy as np
import pytest

from lcma.channel_model import ChannelRealization
from lcma.oracles import (
    OracleBudget,
    oracle_app,
    oracle_field_inverse,
    oracle_field_rref,
    oracle_int_det,
    oracle_map_decode,
    oracle_shortest,
    oracle_shortest_basis,
)
from lcma.ring_code import encode, make_test_codes


def test_oracle_app_uniform_at_zero_rho():
    h = ChannelRealization(H=np.ones((2, 2)), rho=0.0, fading="awgn", n_r=2, n_s=1)
    app = oracle_app(h, [0.1, -0.2], [[1, 1]], 4)
    assert np.allclose(app, 0.25)


def test_oracle_app_single_candidate_dominates():
    h = ChannelRealization(H=np.eye(2), rho=400.0, fading="awgn", n_r=2, n_s=1)
    # transmit c = (1, 0) noise-free
    y = np.sqrt(400.0) * np.array([1.0, -1.0])
    app = oracle_app(h, y, [[1, 0], [0, 1]], 2)
    assert app[0, 1] > 0.9999 and app[1, 0] > 0.9999


def test_oracle_app_budget():
    h = ChannelRealization(H=np.ones((1, 30)), rho=1.0, fading="awgn", n_r=1, n_s=1)
    with pytest.raises(ValueError):
        oracle_app(h, [0.0], np.ones((1, 30), dtype=int), 2)


def test_oracle_shortest_identity_gram():
    vec, met = oracle_shortest(np.eye(3))
    assert met == pytest.approx(1.0)
    assert np.abs(vec).sum() == 1


def test_oracle_shortest_weighted_diagonal():
    vec, met = oracle_shortest(np.diag([5.0, 0.25, 9.0]))
    assert vec.tolist() == [0, 1, 0]
    assert met == pytest.approx(0.25)


def test_oracle_shortest_basis_identity():
    assert oracle_shortest_basis(np.eye(3), 3) == pytest.approx(1.0)


def test_oracle_shortest_basis_skewed():
    # second minimum must pay the expensive direction
    g = np.diag([0.01, 4.0])
    assert oracle_shortest_basis(g, 1) == pytest.approx(0.01)
    assert oracle_shortest_basis(g, 2) == pytest.approx(4.0)


def test_oracle_shortest_basis_budget_exhausted():
    with pytest.raises(ValueError):
        oracle_shortest_basis(np.eye(2), 3)


def test_oracle_map_decode_unit_vector_apps():
    code = make_test_codes(2, 8, 4, seed=1)
    b = np.array([1, 0, 1, 1])
    cw = encode(code, b)
    app = np.full((8, 2), 1e-9)
    app[np.arange(8), cw] = 1.0
    app /= app.sum(axis=1, keepdims=True)
    assert np.array_equal(oracle_map_decode(code, app), cw)


def test_oracle_map_decode_uniform_tie_lexicographic():
    code = make_test_codes(2, 8, 4, seed=1)
    app = np.full((8, 2), 0.5)
    assert not oracle_map_decode(code, app).any()  # all-zero is lexicographically first


def test_oracle_field_rref_and_inverse():
    a = np.array([[1, 2], [3, 4]])
    red = oracle_field_rref(a, 5)
    assert np.array_equal(red, np.eye(2, dtype=np.int64))
    inv = oracle_field_inverse(a, 5)
    assert np.array_equal((inv @ a) % 5, np.eye(2, dtype=np.int64))
    assert oracle_field_inverse(np.array([[1, 1], [1, 1]]), 5) is None


def test_oracle_int_det_matches_float():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.integers(-5, 6, (4, 4))
        assert oracle_int_det(a) == round(np.linalg.det(a.astype(float)))


def test_budget_defaults():
    b = OracleBudget()
    assert b.max_enumeration == 2**20 and b.max_inf_norm == 3
