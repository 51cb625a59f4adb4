"""Uplink signal model: spreading signatures, channel stacking, transmission.

The receive space has dimension N = N_S * N_R.  Column i of the channel
matrix stacks the user's length-N_S spreading signature scaled by its gain at
each of the N_R antennas, so with a single antenna and unit gains the channel
matrix is just the spreading matrix, and with N_S = 1 the system degenerates
to pure spatial-division access.

The model is real-valued throughout; noise is i.i.d. standard normal and the
per-user SNR rho is symmetric across users.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard

__all__ = [
    "SpreadingMatrix",
    "ChannelRealization",
    "build_h",
    "transmit",
    "generate_spreading",
    "load_spreading",
    "save_spreading",
    "table2_spreading",
]

FADING_MODES = ("awgn", "rayleigh_block")


@dataclass(frozen=True)
class SpreadingMatrix:
    """N_S-by-K spreading signatures: {0, +1, -1} patterns, unit-norm columns."""

    pattern: np.ndarray  # raw integer entries in {0, +1, -1}
    warning: str | None = None
    matrix: np.ndarray = field(init=False)  # column-normalized float version

    def __post_init__(self):
        pat = np.asarray(self.pattern, dtype=np.int64)
        if pat.ndim != 2:
            raise ValueError("spreading pattern must be 2-D")
        if not np.all(np.isin(pat, (-1, 0, 1))):
            raise ValueError("spreading entries must come from {0, +1, -1}")
        norms = np.linalg.norm(pat.astype(float), axis=0)
        if np.any(norms == 0):
            raise ValueError("spreading pattern has an all-zero column")
        object.__setattr__(self, "pattern", pat)
        object.__setattr__(self, "matrix", pat / norms)

    @property
    def n_s(self) -> int:
        return self.pattern.shape[0]

    @property
    def k_users(self) -> int:
        return self.pattern.shape[1]


@dataclass(frozen=True)
class ChannelRealization:
    """Aggregated N-by-K channel with its per-user linear SNR."""

    H: np.ndarray
    rho: float
    fading: str
    n_r: int
    n_s: int

    def __post_init__(self):
        h = np.asarray(self.H, dtype=float)
        if h.ndim != 2 or h.shape[0] != self.n_r * self.n_s:
            raise ValueError(f"H must be {self.n_r * self.n_s}-by-K, got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel matrix has non-finite entries")
        if self.fading not in FADING_MODES:
            raise ValueError(f"fading must be one of {FADING_MODES}")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        object.__setattr__(self, "H", h)

    @property
    def n_dim(self) -> int:
        return self.H.shape[0]

    @property
    def k_users(self) -> int:
        return self.H.shape[1]


def build_h(
    spreading: SpreadingMatrix | None,
    spatial,
    fading: str = "awgn",
    rho: float = 1.0,
) -> ChannelRealization:
    """Stack spreading and spatial signatures into the N-by-K channel matrix.

    spatial is N_R-by-K (per-antenna gains).  Column i of H is the
    concatenation over antennas j of spatial[j, i] * s_i.  Passing
    spreading=None means no spreading (N_S = 1, H equals the spatial matrix).
    """
    spatial = np.atleast_2d(np.asarray(spatial, dtype=float))
    n_r, k = spatial.shape
    if spreading is None:
        smat = np.ones((1, k))
        n_s = 1
    else:
        smat = spreading.matrix
        n_s = spreading.n_s
        if spreading.k_users != k:
            raise ValueError(
                f"user count mismatch: spreading has {spreading.k_users}, spatial has {k}"
            )
    # (N_R, N_S, K) -> (N_R*N_S, K), antenna-major blocks of length N_S.
    h = (spatial[:, None, :] * smat[None, :, :]).reshape(n_r * n_s, k)
    return ChannelRealization(H=h, rho=float(rho), fading=fading, n_r=n_r, n_s=n_s)


def draw_spatial(k: int, n_r: int, fading: str, rng: np.random.Generator) -> np.ndarray:
    """Per-antenna gains for one block: all-ones for AWGN, N(0,1) for Rayleigh."""
    if fading == "awgn":
        return np.ones((n_r, k))
    if fading == "rayleigh_block":
        return rng.standard_normal((n_r, k))
    raise ValueError(f"fading must be one of {FADING_MODES}")


def transmit(h: ChannelRealization, x, seed=None, noiseless: bool = False) -> np.ndarray:
    """Y = sqrt(rho) H X + Z with Z i.i.d. standard normal (unit variance).

    seed may be an int or a Generator; noiseless=True skips Z entirely.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] != h.k_users:
        raise ValueError(f"X must be {h.k_users}-by-n, got {x.shape}")
    y = math.sqrt(h.rho) * (h.H @ x)
    if noiseless:
        return y
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return y + rng.standard_normal(y.shape)


def generate_spreading(
    k: int,
    n_s: int,
    q: int = 2,
    rho_design: float = 10.0,
    r0: float = 0.0,
    max_attempts: int = 20,
    seed=None,
    zero_prob: float = 0.25,
    rate_samples: int = 200,
) -> SpreadingMatrix:
    """Hadamard-truncation spreading generator with a symmetric-rate acceptance loop.

    Draw a Sylvester Hadamard matrix (order = K rounded up to a power of two),
    randomly keep n_s rows and k columns, zero entries with probability
    zero_prob, normalize columns, and accept once the estimated symmetric rate
    at rho_design reaches r0.  If the budget runs out the best attempt so far
    is returned with a warning flag instead of raising.
    """
    if n_s < 1 or k < 1:
        raise ValueError("need k >= 1 and n_s >= 1")
    order = 1 << max(int(math.ceil(math.log2(max(k, n_s, 1)))), 0)
    rng = np.random.default_rng(seed)
    base = hadamard(order)

    best: SpreadingMatrix | None = None
    best_rate = -math.inf
    for _ in range(max_attempts):
        rows = rng.choice(order, size=n_s, replace=False)
        cols = rng.choice(order, size=k, replace=False)
        pat = base[np.ix_(rows, cols)].astype(np.int64)
        if zero_prob > 0:
            pat = np.where(rng.random(pat.shape) < zero_prob, 0, pat)
        if np.any(np.all(pat == 0, axis=0)):
            continue
        cand = SpreadingMatrix(pattern=pat)
        rate = _symmetric_rate_estimate(cand, q, rho_design, rate_samples, rng)
        if rate >= r0:
            return cand
        if rate > best_rate:
            best_rate = rate
            best = cand
    if best is None:
        raise RuntimeError("spreading generation produced no usable candidate")
    return SpreadingMatrix(
        pattern=best.pattern,
        warning=f"rate target {r0} not reached in {max_attempts} attempts "
        f"(best estimate {best_rate:.3f} bits/symbol)",
    )


def _symmetric_rate_estimate(
    spreading: SpreadingMatrix, q: int, rho: float, samples: int, rng: np.random.Generator
) -> float:
    # Imported lazily: rate estimation sits above this module in the stack.
    from .coeff_select import select_coefficients
    from .rate_tools import estimate_rates

    h = build_h(spreading, np.ones((1, spreading.k_users)), "awgn", rho)
    sel = select_coefficients(h, spreading.k_users, q)
    est = estimate_rates(
        h, sel.a_tilde, q, samples=samples, conditioning="full_y", seed=rng
    )
    return est.symmetric_rate


def load_spreading(path) -> SpreadingMatrix:
    """Parse a whitespace-separated integer grid, one row per line."""
    with open(path) as f:
        rows = [ln.split() for ln in f if ln.strip()]
    if not rows:
        raise ValueError(f"{path}: empty spreading file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: row length mismatch")
    try:
        pat = np.array([[int(v) for v in r] for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer entry") from exc
    if not np.all(np.isin(pat, (-1, 0, 1))):
        raise ValueError(f"{path}: entries must come from {{0, +1, -1}}")
    return SpreadingMatrix(pattern=pat)


def save_spreading(spreading: SpreadingMatrix, path):
    with open(path, "w") as f:
        for row in spreading.pattern:
            f.write(" ".join(str(int(v)) for v in row) + "\n")


def table2_spreading() -> SpreadingMatrix:
    """The bundled 4-by-10 spreading matrix used by the reference experiments."""
    ref = importlib.resources.files("lcma.data").joinpath("table2_k10_ns4.txt")
    with importlib.resources.as_file(ref) as path:
        return load_spreading(path)
