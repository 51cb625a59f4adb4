"""Algebraic-binning detection in the full N-dimension receive space.

For each symbol time the q^K superposed candidates partition into q bins per
stream according to the mod-q value of the stream's coefficient combination.
The bin posteriors come either from full enumeration (exact, small q^K only)
or from a list sphere decoder that keeps the Omega nearest candidates and
restricts the likelihood sum to them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelRealization
from .ring_code import PamMapper

__all__ = [
    "CandidateList",
    "app_exhaustive",
    "app_exhaustive_seq",
    "lsd",
    "app_from_list",
    "lsd_app_seq",
    "DEFAULT_ENUM_CAP",
    "DEFAULT_LIST_SIZE",
]

DEFAULT_ENUM_CAP = 2**20
DEFAULT_LIST_SIZE = 50


@dataclass(frozen=True)
class CandidateList:
    """The Omega candidates nearest to one received column, distance-sorted."""

    symbols: np.ndarray  # size-by-K symbol vectors over Z_q
    distances: np.ndarray  # squared Euclidean distances to y

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        if np.any(np.diff(d) < 0):
            raise ValueError("candidate list must be sorted by distance")

    def __len__(self) -> int:
        return len(self.distances)


def _symbol_grid(q: int, k: int, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    if q**k > cap:
        raise ValueError(
            f"q^K = {q}^{k} exceeds the enumeration cap {cap}; use the list sphere decoder"
        )
    grid = np.indices((q,) * k).reshape(k, -1).T
    return grid.astype(np.int64)


def app_exhaustive_seq(h: ChannelRealization, y, a_rows, q: int, cap: int = DEFAULT_ENUM_CAP):
    """Exact bin posteriors for every column of y; returns (L, n, q)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    a = np.atleast_2d(np.asarray(a_rows, dtype=np.int64)) % q
    grid = _symbol_grid(q, h.k_users, cap)  # (M, K)
    levels = PamMapper(q).levels()
    means = math.sqrt(h.rho) * (h.H @ levels[grid].T)  # (N, M)
    bins = (grid @ a.T) % q  # (M, L)
    # Squared distance of every column to every candidate mean, (M, n).
    d = (
        np.sum(y**2, axis=0)[None, :]
        - 2.0 * (means.T @ y)
        + np.sum(means**2, axis=0)[:, None]
    )
    w = np.exp(-(d - d.min(axis=0, keepdims=True)) / 2.0)
    n_cols = y.shape[1]
    out = np.zeros((a.shape[0], n_cols, q))
    for l_idx in range(a.shape[0]):
        acc = np.zeros((q, n_cols))
        np.add.at(acc, bins[:, l_idx], w)
        out[l_idx] = (acc / acc.sum(axis=0, keepdims=True)).T
    return out


def app_exhaustive(h: ChannelRealization, y_col, a_rows, q: int, cap: int = DEFAULT_ENUM_CAP):
    """Exact bin posteriors for a single column; returns (L, q)."""
    y_col = np.asarray(y_col, dtype=float).reshape(-1, 1)
    return app_exhaustive_seq(h, y_col, a_rows, q, cap)[:, 0, :]


def app_from_list(clist: CandidateList, a_rows, q: int) -> np.ndarray:
    """Bin posteriors from a candidate list, normalized per stream; (L, q)."""
    if len(clist) == 0:
        raise ValueError("candidate list is empty")
    a = np.atleast_2d(np.asarray(a_rows, dtype=np.int64)) % q
    bins = (clist.symbols @ a.T) % q  # (size, L)
    w = np.exp(-(clist.distances - clist.distances.min()) / 2.0)
    out = np.zeros((a.shape[0], q))
    for l_idx in range(a.shape[0]):
        acc = np.bincount(bins[:, l_idx], weights=w, minlength=q)
        out[l_idx] = acc / acc.sum()
    return out


def lsd(
    h: ChannelRealization,
    y_col,
    q: int,
    omega_cap: int = DEFAULT_LIST_SIZE,
) -> CandidateList:
    """List sphere decoding: the Omega alphabet points nearest to y.

    Searches the sphere around the zero-forcing point via the triangular
    interval recursion, clamped to the PAM alphabet.  The initial radius uses
    the residual-based formula; when that is non-positive (or the sphere is
    short of candidates) the radius restarts at the Babai point distance and
    doubles until the list fills or the alphabet is exhausted.  When K exceeds
    the receive dimension the trailing K - N symbols are enumerated
    exhaustively around an N-level sphere search.
    """
    y = np.asarray(y_col, dtype=float).reshape(-1)
    k = h.k_users
    n_dim = h.n_dim
    g_eff = math.sqrt(h.rho) * h.H
    levels = PamMapper(q).levels()
    target = min(omega_cap, q**k)

    n_sphere = min(k, n_dim)
    g_inner = g_eff[:, :n_sphere]
    gram = g_inner.T @ g_inner
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        gram = gram + 1e-6 * np.eye(n_sphere)
        chol = np.linalg.cholesky(gram)
    u = chol.T
    gram_inv_gt = np.linalg.solve(gram, g_inner.T)

    outer_syms = (
        list(itertools.product(range(q), repeat=k - n_sphere)) if k > n_sphere else [()]
    )

    # Initial radius: residual-based guess, floored at the Babai point.
    x_hat_full = gram_inv_gt @ y
    resid = y - g_inner @ x_hat_full
    r2 = 2.0 - float(resid @ resid)
    babai = np.clip(
        np.rint(x_hat_full * PamMapper(q).gamma + (q - 1) / 2.0), 0, q - 1
    ).astype(np.int64)
    babai_metric = float(np.sum((u @ (levels[babai] - x_hat_full)) ** 2))
    r2 = max(r2, babai_metric + 1e-9, 1e-9)

    # Everything is within this radius, so reaching it means full enumeration.
    reach = np.linalg.norm(y) + np.linalg.norm(g_eff, "fro") * math.sqrt(k) * abs(levels).max()
    r2_all = reach * reach + 1.0

    gamma = PamMapper(q).gamma
    offset = (q - 1) / 2.0
    for _ in range(200):
        found_syms: list[tuple[int, ...]] = []
        found_dist: list[float] = []
        for outer in outer_syms:
            if outer:
                y_eff = y - g_eff[:, n_sphere:] @ levels[list(outer)]
            else:
                y_eff = y
            x_hat = gram_inv_gt @ y_eff
            base = float(np.sum((y_eff - g_inner @ x_hat) ** 2))
            inner_budget = r2 - base
            if inner_budget < 0:
                continue
            _sphere_enum(
                u, x_hat, levels, gamma, offset, q, inner_budget, outer, base,
                found_syms, found_dist,
            )
        if len(found_syms) >= target or r2 > r2_all:
            break
        r2 *= 2.0
    if not found_syms:
        raise RuntimeError("sphere search found no candidates even at full radius")

    dist = np.asarray(found_dist)
    syms = np.asarray(found_syms, dtype=np.int64)
    order = np.argsort(dist, kind="stable")[:target]
    return CandidateList(symbols=syms[order], distances=dist[order])


def _sphere_enum(u, x_hat, levels, gamma, offset, q, budget, outer, base, out_syms, out_dist):
    """Depth-first interval enumeration over the inner sphere levels."""
    j = u.shape[0]
    stack_sym = np.zeros(j, dtype=np.int64)
    err = np.zeros(j)

    def recurse(i: int, partial: float):
        rem = budget - partial
        if rem < 0:
            return
        s = float(u[i, i + 1 :] @ err[i + 1 :])
        w = math.sqrt(rem) / u[i, i]
        center = x_hat[i] - s / u[i, i]
        lo = max(int(math.ceil((center - w) * gamma + offset - 1e-12)), 0)
        hi = min(int(math.floor((center + w) * gamma + offset + 1e-12)), q - 1)
        for c in range(lo, hi + 1):
            err[i] = levels[c] - x_hat[i]
            step = (u[i, i] * err[i] + s) ** 2
            if partial + step > budget + 1e-12:
                continue
            stack_sym[i] = c
            if i == 0:
                out_syms.append(tuple(stack_sym) + outer)
                out_dist.append(base + partial + step)
            else:
                recurse(i - 1, partial + step)

    recurse(j - 1, 0.0)


def lsd_app_seq(
    h: ChannelRealization,
    y,
    a_rows,
    q: int,
    omega_cap: int = DEFAULT_LIST_SIZE,
) -> np.ndarray:
    """List-based bin posteriors for every column of y; returns (L, n, q)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    a = np.atleast_2d(np.asarray(a_rows, dtype=np.int64))
    out = np.zeros((a.shape[0], y.shape[1], q))
    for t in range(y.shape[1]):
        clist = lsd(h, y[:, t], q, omega_cap)
        out[:, t, :] = app_from_list(clist, a, q)
    return out
