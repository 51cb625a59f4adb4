"""Achievable-rate estimation and reference mutual informations.

The computation rate of a stream is log2(q) minus the conditional entropy of
its bin index given the observation; the symmetric rate is the smallest
computation rate over the streams.  Entropies are plug-in Monte Carlo
averages of exact posteriors (full-vector or filtered-scalar conditioning),
so the bias is O(1/samples) and the standard error is reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .channel_model import ChannelRealization
from .detector_lf import build_filter
from .ring_code import PamMapper

__all__ = [
    "RateEstimate",
    "estimate_rates",
    "pam_awgn_mi",
    "uniform_bin_check",
    "nonuniform_rows",
]

ENUM_CAP = 2**20


@dataclass(frozen=True)
class RateEstimate:
    """Monte Carlo rate estimate for one channel realization and coefficient matrix."""

    entropies: np.ndarray  # per-stream H(V_l | .) in bits
    entropy_se: np.ndarray  # standard error of each entropy estimate
    per_user_rates: np.ndarray
    symmetric_rate: float
    samples: int
    conditioning: str

    @property
    def symmetric_rate_se(self) -> float:
        return float(self.entropy_se[int(np.argmax(self.entropies))])


def estimate_rates(
    h: ChannelRealization,
    a_tilde,
    q: int,
    samples: int = 10000,
    conditioning: str = "full_y",
    seed=None,
    theta: float | None = None,
    batch: int = 8192,
) -> RateEstimate:
    """Plug-in entropy / rate estimate under uniform signaling.

    conditioning="full_y" computes the exact bin posterior from the
    N-dimension observation; "filtered_y" conditions on the one-dimension
    filtered scalars instead (full-support enumeration, exact for unit-norm
    filter rows), which by data processing can only raise the entropies.
    """
    a_tilde = np.atleast_2d(np.asarray(a_tilde, dtype=np.int64))
    a_mod = a_tilde % q
    l_streams, k = a_mod.shape
    if k != h.k_users:
        raise ValueError(f"coefficient rows have {k} users, channel has {h.k_users}")
    if q**k > ENUM_CAP:
        raise ValueError(f"q^K = {q}^{k} exceeds the enumeration cap")
    if conditioning not in ("full_y", "filtered_y"):
        raise ValueError(f"unknown conditioning {conditioning!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    levels = PamMapper(q).levels()
    grid = np.indices((q,) * k).reshape(k, -1).T  # (M, K)
    m_cand = grid.shape[0]
    bins = (grid @ a_mod.T) % q  # (M, L)
    onehot = np.zeros((l_streams, m_cand, q))
    for l_idx in range(l_streams):
        onehot[l_idx, np.arange(m_cand), bins[:, l_idx]] = 1.0

    sqrho = math.sqrt(h.rho)
    means_full = sqrho * (h.H @ levels[grid].T)  # (N, M)
    if conditioning == "filtered_y":
        fb = build_filter(h, a_tilde, q, theta)
        means_filt = fb.W @ means_full  # (L, M)

    ent_sum = np.zeros(l_streams)
    ent_sqsum = np.zeros(l_streams)
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        idx = rng.integers(0, m_cand, size=b)
        z = rng.standard_normal((h.n_dim, b))
        y = means_full[:, idx] + z
        if conditioning == "full_y":
            d = (
                np.sum(y**2, axis=0)[:, None]
                - 2.0 * (y.T @ means_full)
                + np.sum(means_full**2, axis=0)[None, :]
            )  # (b, M)
            logw = -d / 2.0
            logw -= logw.max(axis=1, keepdims=True)
            p = np.exp(logw)
            p /= p.sum(axis=1, keepdims=True)
            p_streams = np.einsum("bm,lmw->lbw", p, onehot)
        else:
            y_f = fb.W @ y  # (L, b)
            d = (y_f[:, :, None] - means_filt[:, None, :]) ** 2  # (L, b, M)
            logw = -d / 2.0
            logw -= logw.max(axis=2, keepdims=True)
            p = np.exp(logw)
            p /= p.sum(axis=2, keepdims=True)
            p_streams = np.einsum("lbm,lmw->lbw", p, onehot)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p_streams > 0, p_streams * np.log2(p_streams), 0.0)
        ent = -plogp.sum(axis=2)  # (L, b)
        ent_sum += ent.sum(axis=1)
        ent_sqsum += (ent**2).sum(axis=1)
        done += b

    entropies = ent_sum / samples
    var = np.maximum(ent_sqsum / samples - entropies**2, 0.0)
    se = np.sqrt(var / samples)
    entropies = np.clip(entropies, 0.0, math.log2(q))

    log2q = math.log2(q)
    per_user = np.empty(k)
    for i in range(k):
        involved = entropies[a_mod[:, i] != 0]
        per_user[i] = log2q - (involved.max() if len(involved) else 0.0)
    r_sym = log2q - float(entropies.max())
    return RateEstimate(
        entropies=entropies,
        entropy_se=se,
        per_user_rates=per_user,
        symmetric_rate=r_sym,
        samples=samples,
        conditioning=conditioning,
    )


def pam_awgn_mi(q: int, rho: float, nodes: int = 96) -> float:
    """Mutual information of uniform q-PAM over the real AWGN channel, in bits.

    Gauss-Hermite quadrature over the unit-variance noise; monotone in rho,
    0 at rho=0, approaching log2(q) as rho grows.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0:
        return 0.0
    x = PamMapper(q).levels()
    t, w = np.polynomial.hermite.hermgauss(nodes)
    z = math.sqrt(2.0) * t  # standard-normal abscissas
    diff = math.sqrt(rho) * (x[:, None] - x[None, :])  # x_c - x_c'
    # log sum_{c'} exp(z^2/2 - (z + diff)^2/2), stable via max subtraction
    arg = z[None, None, :] ** 2 / 2.0 - (z[None, None, :] + diff[:, :, None]) ** 2 / 2.0
    mx = arg.max(axis=1, keepdims=True)
    inner = mx[:, 0, :] + np.log(np.exp(arg - mx).sum(axis=1))  # (q, nodes)
    expect = (inner @ w) / math.sqrt(math.pi)  # (q,)
    return math.log2(q) - float(expect.mean()) / math.log(2.0)


def nonuniform_rows(q: int, a_rows, samples: int = 20000, seed=0) -> list[int]:
    """Streams whose bin distribution under uniform messages fails a 1% chi-square."""
    a = np.atleast_2d(np.asarray(a_rows, dtype=np.int64)) % q
    if np.any(~a.any(axis=1)):
        raise ValueError("coefficient rows must be nonzero")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    b = rng.integers(0, q, size=(samples, a.shape[1]))
    bins = (b @ a.T) % q  # (samples, L)
    crit = chi2.ppf(0.99, q - 1)
    expected = samples / q
    bad = []
    for l_idx in range(a.shape[0]):
        counts = np.bincount(bins[:, l_idx], minlength=q)
        stat = float(np.sum((counts - expected) ** 2) / expected)
        if stat > crit:
            bad.append(l_idx)
    return bad


def uniform_bin_check(q: int, a_rows, samples: int = 20000, seed=0) -> bool:
    """True iff every stream's bin index is uniform under uniform messages."""
    return not nonuniform_rows(q, a_rows, samples, seed)
