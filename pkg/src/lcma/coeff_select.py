"""Integer coefficient matrix selection by lattice reduction.

The row metric for an integer vector a is a^T (rho H^T H + I)^{-1} a, so the
best vectors are the short ones in the lattice generated by any factor F with
F^T F = (rho H^T H + I)^{-1}.  LLL reduction of that factor yields K short,
jointly unimodular candidate rows; the L shortest form the coefficient matrix.
Because the candidates are columns of a unimodular transform, the square case
L = K has determinant +-1 and is therefore unit-invertible mod any q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelRealization
from .zq_algebra import ZqMatrix, is_unit_invertible

__all__ = ["CoefficientSelection", "lll_reduce", "select_coefficients"]


@dataclass(frozen=True)
class CoefficientSelection:
    """Selected integer rows, their mod-q reduction, and per-row metrics."""

    a_tilde: np.ndarray  # L-by-K integer rows, metric-sorted
    a_mod: ZqMatrix
    metric_per_row: np.ndarray
    used_identity_fallback: bool = False


def _gram_schmidt(b: np.ndarray):
    n = b.shape[1]
    bstar = np.zeros_like(b)
    mu = np.zeros((n, n))
    for i in range(n):
        v = b[:, i].copy()
        for j in range(i):
            denom = bstar[:, j] @ bstar[:, j]
            mu[i, j] = (b[:, i] @ bstar[:, j]) / denom
            v -= mu[i, j] * bstar[:, j]
        bstar[:, i] = v
    return bstar, mu


def lll_reduce(basis, delta: float = 0.99) -> tuple[np.ndarray, np.ndarray]:
    """LLL-reduce the columns of a nonsingular real basis.

    Returns (reduced, transform) with reduced = basis @ transform, transform
    integer with determinant +-1.  The reduced basis is size-reduced
    (|mu_ij| <= 1/2) and satisfies the Lovasz condition at the given delta.
    """
    if not 0.25 < delta <= 1.0:
        raise ValueError(f"delta must be in (0.25, 1], got {delta}")
    b = np.array(basis, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"basis must be square, got {b.shape}")
    n = b.shape[1]
    if n == 0:
        return b, np.zeros((0, 0), dtype=np.int64)
    if abs(np.linalg.det(b)) < 1e-12:
        raise ValueError("basis is singular")
    t = np.eye(n, dtype=np.int64)
    bstar, mu = _gram_schmidt(b)
    k = 1
    guard = 0
    while k < n:
        guard += 1
        if guard > 100000:
            raise RuntimeError("LLL failed to terminate (ill-conditioned basis?)")
        for j in range(k - 1, -1, -1):
            m = round(mu[k, j])
            if m:
                # Size reduction leaves the Gram-Schmidt vectors unchanged;
                # only the mu row of column k needs updating.
                b[:, k] -= m * b[:, j]
                t[:, k] -= m * t[:, j]
                mu[k, j] -= m
                mu[k, :j] -= m * mu[j, :j]
        lhs = bstar[:, k] @ bstar[:, k]
        rhs = (delta - mu[k, k - 1] ** 2) * (bstar[:, k - 1] @ bstar[:, k - 1])
        if lhs >= rhs:
            k += 1
        else:
            b[:, [k - 1, k]] = b[:, [k, k - 1]]
            t[:, [k - 1, k]] = t[:, [k, k - 1]]
            bstar, mu = _gram_schmidt(b)
            k = max(k - 1, 1)
    return b, t


def _canonical_sign(rows: np.ndarray) -> np.ndarray:
    out = rows.copy()
    for r in range(out.shape[0]):
        nz = np.nonzero(out[r])[0]
        if len(nz) and out[r, nz[0]] < 0:
            out[r] = -out[r]
    return out


_SELECT_CACHE: dict = {}
_SELECT_CACHE_MAX = 64


def select_coefficients(h: ChannelRealization, l_streams: int, q: int) -> CoefficientSelection:
    """Pick the L shortest LLL-reduced integer rows under the MMSE-form metric.

    Rows come back sorted by metric, sign-canonicalized (first nonzero entry
    positive), with rank L over the rationals.  For L = K the mod-q reduction
    is unit-invertible; a greedy repair plus identity fallback exists as a
    safety net but is unreachable for a well-formed reduction (see ledger).

    Results are memoized on (H, rho, L, q): Monte Carlo sweeps over a fixed
    channel would otherwise re-run the reduction every trial.
    """
    key = (h.H.tobytes(), h.H.shape, float(h.rho), l_streams, q)
    hit = _SELECT_CACHE.get(key)
    if hit is not None:
        return hit
    sel = _select_coefficients(h, l_streams, q)
    if len(_SELECT_CACHE) >= _SELECT_CACHE_MAX:
        _SELECT_CACHE.pop(next(iter(_SELECT_CACHE)))
    _SELECT_CACHE[key] = sel
    return sel


def _select_coefficients(h: ChannelRealization, l_streams: int, q: int) -> CoefficientSelection:
    hm = h.H
    k = h.k_users
    if l_streams > k or l_streams < 1:
        raise ValueError(f"need 1 <= L <= K, got L={l_streams}, K={k}")
    if not np.all(np.isfinite(hm)):
        raise ValueError("channel matrix has non-finite entries")
    m = h.rho * (hm.T @ hm) + np.eye(k)
    evals, evecs = np.linalg.eigh(m)
    if np.any(evals <= 0):
        raise ValueError("eigen-decomposition produced a non-positive spectrum")
    # F^T F = M^{-1}: columns of F generate the metric lattice.
    basis = (evecs / np.sqrt(evals)).T  # Sigma^{-1/2} Psi^T
    _, transform = lll_reduce(basis, delta=0.99)
    cand = transform.T  # candidate integer rows
    metrics = np.einsum("ij,jk,ik->i", cand.astype(float), np.linalg.inv(m), cand.astype(float))
    order = np.argsort(metrics, kind="stable")
    cand = _canonical_sign(cand[order])
    metrics = metrics[order]

    rows, mets, fallback = _pick_rows(cand, metrics, l_streams, k, q, m)
    a_mod = ZqMatrix(rows % q, q)
    if l_streams == k:
        ok, _ = is_unit_invertible(a_mod)
        if not ok:
            rows = np.eye(k, dtype=np.int64)
            mets = np.einsum("ij,jk,ik->i", rows.astype(float), np.linalg.inv(m), rows.astype(float))
            a_mod = ZqMatrix(rows % q, q)
            fallback = True
    if np.linalg.matrix_rank(rows.astype(float)) != l_streams:
        raise AssertionError("selected rows are rank-deficient over the rationals")
    return CoefficientSelection(
        a_tilde=rows,
        a_mod=a_mod,
        metric_per_row=np.asarray(mets, dtype=float),
        used_identity_fallback=fallback,
    )


def _pick_rows(cand, metrics, l_streams, k, q, m):
    """Greedy metric-ordered selection keeping the mod-q rows extendable.

    The candidate pool is the K reduced rows plus their pairwise sums and
    differences (capped at K^2 extras).  Rows are admitted while they keep the
    chosen set full-rank modulo the smallest prime factor of q, which for
    q = 2**m is exactly the condition for an odd determinant.
    """
    p = 2
    while q % p:
        p += 1
    pool = [(metrics[i], cand[i]) for i in range(len(cand))]
    extra = []
    for i in range(len(cand)):
        for j in range(i + 1, len(cand)):
            for v in (cand[i] + cand[j], cand[i] - cand[j]):
                if np.any(v):
                    extra.append(v)
    minv = np.linalg.inv(m)
    extra = _canonical_sign(np.array(extra, dtype=np.int64)) if extra else np.zeros((0, k), np.int64)
    for v in extra[: k * k]:
        pool.append((float(v @ minv @ v), v))
    pool.sort(key=lambda it: it[0])

    chosen: list[np.ndarray] = []
    mets: list[float] = []
    basis_modp: list[np.ndarray] = []
    for met, v in pool:
        if len(chosen) == l_streams:
            break
        trial = np.array(basis_modp + [v % p], dtype=np.int64)
        if _rank_modp(trial, p) == len(trial):
            chosen.append(v)
            mets.append(met)
            basis_modp.append(v % p)
    if len(chosen) < l_streams:
        return np.eye(k, dtype=np.int64)[:l_streams], np.ones(l_streams), True
    return np.array(chosen, dtype=np.int64), np.array(mets), False


def _rank_modp(a: np.ndarray, p: int) -> int:
    m = a % p
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = next((i for i in range(rank, rows) if m[i, c] % p), -1)
        if piv < 0:
            continue
        m[[rank, piv]] = m[[piv, rank]]
        inv = pow(int(m[rank, c]), p - 2, p) if p > 2 else 1
        m[rank] = (m[rank] * inv) % p
        for i in range(rows):
            if i != rank and m[i, c]:
                m[i] = (m[i] - m[i, c] * m[rank]) % p
        rank += 1
    return rank
