"""Independent brute-force references used by the test suite.

Everything here re-derives its answer from first principles with plain loops
(itertools + math) so the results cannot share a bug with the vectorized
production code.  Keep it that way: these functions must not import from the
detector, decoder, or lattice-reduction modules.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OracleBudget",
    "oracle_app",
    "oracle_shortest",
    "oracle_shortest_basis",
    "oracle_map_decode",
    "oracle_field_rref",
    "oracle_field_inverse",
    "oracle_int_det",
]


@dataclass(frozen=True)
class OracleBudget:
    """Enumeration limits for the brute-force searches."""

    max_enumeration: int = 2**20
    max_inf_norm: int = 3


def oracle_app(h, y_col, a_rows, q: int) -> np.ndarray:
    """Exact bin posteriors by full enumeration of all q**K symbol vectors.

    h carries the channel matrix H (N-by-K) and the per-user SNR rho; the
    likelihood of a candidate is exp(-||y - sqrt(rho) H x||^2 / 2) with the
    PAM map x = (c - (q-1)/2) / gamma, gamma = sqrt((q^2-1)/12).
    Returns an L-by-q array, one normalized posterior row per stream.
    """
    hm = np.asarray(h.H, dtype=float)
    rho = float(h.rho)
    y = np.asarray(y_col, dtype=float).reshape(-1)
    a = np.atleast_2d(np.asarray(a_rows, dtype=np.int64))
    n_dim, k_users = hm.shape
    if q**k_users > OracleBudget().max_enumeration:
        raise ValueError("enumeration budget exceeded")
    gamma = math.sqrt((q * q - 1) / 12.0)
    offset = (q - 1) / 2.0

    weights = []
    bins = []
    for cand in itertools.product(range(q), repeat=k_users):
        mean = [0.0] * n_dim
        for i, ci in enumerate(cand):
            xi = (ci - offset) / gamma
            for row in range(n_dim):
                mean[row] += math.sqrt(rho) * hm[row, i] * xi
        dist = sum((y[row] - mean[row]) ** 2 for row in range(n_dim))
        weights.append(dist)
        bins.append([sum(int(al[i]) * cand[i] for i in range(k_users)) % q for al in a])
    dmin = min(weights)
    app = np.zeros((a.shape[0], q))
    for w, b in zip(weights, bins):
        lik = math.exp(-(w - dmin) / 2.0)
        for l_idx, omega in enumerate(b):
            app[l_idx, omega] += lik
    app /= app.sum(axis=1, keepdims=True)
    return app


def oracle_shortest(gram, budget: OracleBudget | None = None):
    """Exhaustive shortest nonzero integer vector under the metric v^T G v.

    Searches all v with ||v||_inf <= budget.max_inf_norm (up to global sign).
    Returns (vector, metric).
    """
    budget = budget or OracleBudget()
    g = np.asarray(gram, dtype=float)
    k = g.shape[0]
    b = budget.max_inf_norm
    best_vec = None
    best_metric = math.inf
    for cand in itertools.product(range(-b, b + 1), repeat=k):
        if all(c == 0 for c in cand):
            continue
        # Skip the mirror image of every vector: first nonzero entry positive.
        lead = next(c for c in cand if c != 0)
        if lead < 0:
            continue
        v = np.array(cand, dtype=float)
        metric = float(v @ g @ v)
        if metric < best_metric:
            best_metric = metric
            best_vec = np.array(cand, dtype=np.int64)
    return best_vec, best_metric


def oracle_shortest_basis(gram, l: int, budget: OracleBudget | None = None) -> float:
    """Exhaustive min-max basis metric: the smallest r such that l linearly
    independent integer vectors (inf-norm bounded) all have metric <= r.

    This is the brute-force optimum of the min-max row-selection objective
    (the l-th successive minimum of the metric lattice, restricted to the
    search box).
    """
    budget = budget or OracleBudget()
    g = np.asarray(gram, dtype=float)
    k = g.shape[0]
    b = budget.max_inf_norm
    cands = []
    for cand in itertools.product(range(-b, b + 1), repeat=k):
        if all(c == 0 for c in cand):
            continue
        lead = next(c for c in cand if c != 0)
        if lead < 0:
            continue
        v = np.array(cand, dtype=float)
        cands.append((float(v @ g @ v), v))
    cands.sort(key=lambda t: t[0])
    chosen: list[np.ndarray] = []
    for met, v in cands:
        trial = np.array(chosen + [v])
        if np.linalg.matrix_rank(trial) == len(trial):
            chosen.append(v)
            if len(chosen) == l:
                return met
    raise ValueError(f"no {l} independent vectors within the search box")


def oracle_map_decode(code, app) -> np.ndarray:
    """Block-MAP codeword by scoring the entire codebook against the APPs.

    Ties are broken toward the lexicographically smallest codeword.  Limited
    to q**k <= 2**16 messages.
    """
    q, n, k = code.q, code.n, code.k
    if q**k > 2**16:
        raise ValueError("codebook too large for exhaustive MAP")
    g = np.asarray(code.generator.data, dtype=np.int64)
    app = np.asarray(app, dtype=float)
    best_score = -math.inf
    best_cw = None
    for msg in itertools.product(range(q), repeat=k):
        cw = tuple(int(v) % q for v in g @ np.array(msg, dtype=np.int64))
        score = 0.0
        for t in range(n):
            p = app[t, cw[t]]
            if p <= 0.0:
                score = -math.inf
                break
            score += math.log(p)
        if score > best_score or (score == best_score and (best_cw is None or cw < best_cw)):
            best_score = score
            best_cw = cw
    return np.array(best_cw, dtype=np.int64)


def oracle_field_rref(a, p: int) -> np.ndarray:
    """Reduced row echelon form over the prime field GF(p), textbook style."""
    m = [[int(x) % p for x in row] for row in np.atleast_2d(a)]
    rows = len(m)
    cols = len(m[0])
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        piv = next((i for i in range(r, rows) if m[i][c] % p != 0), -1)
        if piv < 0:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = pow(m[r][c], p - 2, p)
        m[r] = [(x * inv) % p for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [(x - f * y) % p for x, y in zip(m[i], m[r])]
        r += 1
    return np.array(m, dtype=np.int64)


def oracle_field_inverse(a, p: int) -> np.ndarray | None:
    """Inverse over GF(p) via RREF of [A | I]; None if A is singular."""
    a = np.atleast_2d(np.asarray(a, dtype=np.int64))
    n = a.shape[0]
    aug = np.hstack([a % p, np.eye(n, dtype=np.int64)])
    red = oracle_field_rref(aug, p)
    if not np.array_equal(red[:, :n], np.eye(n, dtype=np.int64)):
        return None
    return red[:, n:]


def oracle_int_det(a) -> int:
    """Exact integer determinant by cofactor/Bareiss-free expansion on Python ints."""
    m = [[int(x) for x in row] for row in np.atleast_2d(a)]
    n = len(m)
    if n == 1:
        return m[0][0]
    det = 0
    for j in range(n):
        if m[0][j] == 0:
            continue
        minor = [row[:j] + row[j + 1 :] for row in m[1:]]
        det += (-1) ** j * m[0][j] * oracle_int_det(minor)
    return det
