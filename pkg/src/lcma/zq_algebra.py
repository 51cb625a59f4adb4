"""Exact arithmetic and linear algebra over the integer ring Z_q.

The receiver works with q = 2**m where Z_q is a ring, not a field: only odd
entries are units, so Gaussian elimination must pivot on units and may have to
skip columns.  Prime q is also supported (every nonzero entry is a unit),
which the test suite uses to cross-check against ordinary field elimination.

All matrices are small (dimensions on the order of the user count), so the
routines favour clarity and exactness over speed: plain int64 arrays, explicit
``% q`` everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ZqMatrix",
    "GmiResult",
    "mat_mul_mod",
    "is_unit_invertible",
    "row_reduce_mod",
    "gmi",
]


@dataclass(frozen=True)
class ZqMatrix:
    """An integer matrix with entries reduced into [0, q-1]."""

    data: np.ndarray
    q: int

    def __post_init__(self):
        if self.q < 2:
            raise ValueError(f"modulus must be >= 2, got {self.q}")
        arr = np.asarray(self.data, dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D matrix, got ndim={arr.ndim}")
        if arr.size and (arr.min() < 0 or arr.max() >= self.q):
            raise ValueError("entries must lie in [0, q-1]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, a, q: int) -> "ZqMatrix":
        """Build from any integer array, reducing entries mod q."""
        a = np.atleast_2d(np.asarray(a, dtype=np.int64))
        return cls(np.mod(a, q), q)

    @classmethod
    def identity(cls, n: int, q: int) -> "ZqMatrix":
        return cls(np.eye(n, dtype=np.int64), q)

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> "ZqMatrix":
        return cls(np.zeros((rows, cols), dtype=np.int64), q)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ZqMatrix):
            return NotImplemented
        return (
            self.q == other.q
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )


@dataclass(frozen=True)
class GmiResult:
    """Outcome of generalized matrix inversion on an L-by-K matrix.

    ``extraction_rows.data[j]`` is the row vector that recovers user
    ``recoverable_indices[j]``: row @ A == e_i (mod q), exactly.
    """

    one_inverse: ZqMatrix
    recoverable_indices: tuple[int, ...]
    extraction_rows: ZqMatrix


def _is_unit(x: int, q: int) -> bool:
    return math.gcd(int(x) % q, q) == 1


def _check_same_modulus(a: ZqMatrix, b: ZqMatrix):
    if a.q != b.q:
        raise ValueError(f"modulus mismatch: {a.q} vs {b.q}")


def mat_mul_mod(a: ZqMatrix, b: ZqMatrix) -> ZqMatrix:
    """Matrix product reduced mod q."""
    _check_same_modulus(a, b)
    if a.cols != b.rows:
        raise ValueError(f"shape mismatch: {a.data.shape} @ {b.data.shape}")
    return ZqMatrix(np.mod(a.data @ b.data, a.q), a.q)


def _rref_mod(a: np.ndarray, q: int):
    """Unit-pivot reduced row echelon form over Z_q.

    Returns (qrow, echelon, pivot_cols).  qrow is unit-invertible and
    qrow @ a == echelon (mod q).  Pivots are normalized to 1 and their
    columns fully cleared; columns without a unit entry in the remaining
    rows are skipped (they cannot be pivoted over a ring).
    """
    e = np.mod(np.asarray(a, dtype=np.int64), q).copy()
    rows, cols = e.shape
    qrow = np.eye(rows, dtype=np.int64)
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        piv = -1
        for i in range(r, rows):
            if _is_unit(e[i, c], q):
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            e[[r, piv]] = e[[piv, r]]
            qrow[[r, piv]] = qrow[[piv, r]]
        inv = pow(int(e[r, c]), -1, q)
        e[r] = (e[r] * inv) % q
        qrow[r] = (qrow[r] * inv) % q
        for i in range(rows):
            if i != r and e[i, c]:
                f = int(e[i, c])
                e[i] = (e[i] - f * e[r]) % q
                qrow[i] = (qrow[i] - f * qrow[r]) % q
        pivots.append(c)
        r += 1
    return qrow, e, pivots


def row_reduce_mod(a: ZqMatrix) -> tuple[ZqMatrix, ZqMatrix]:
    """Row-reduce with unit pivots; returns (Q_row, echelon) with Q_row @ a == echelon."""
    qrow, e, _ = _rref_mod(a.data, a.q)
    return ZqMatrix(qrow, a.q), ZqMatrix(e, a.q)


def is_unit_invertible(a: ZqMatrix) -> tuple[bool, ZqMatrix | None]:
    """Whether a square matrix has a (two-sided) inverse mod q; returns it if so.

    For q = 2**m this is equivalent to det(a) being odd.
    """
    if a.rows != a.cols:
        raise ValueError(f"matrix must be square, got {a.data.shape}")
    qrow, e, pivots = _rref_mod(a.data, a.q)
    if len(pivots) != a.rows or not np.array_equal(e, np.eye(a.rows, dtype=np.int64)):
        return False, None
    return True, ZqMatrix(qrow, a.q)


def gmi(a: ZqMatrix) -> GmiResult:
    """Generalized matrix inversion over Z_q.

    Builds a {1}-inverse of the L-by-K matrix ``a`` from unit-pivot row
    reduction and a column transform, then scans the rows of
    ``one_inverse @ a`` for exact unit vectors.  Each unit-vector row yields
    an extraction row that recovers one user from the L computed message
    combinations; an empty recoverable set is a normal outcome.
    """
    q = a.q
    rows, cols = a.data.shape  # L, K
    qrow, e, pivots = _rref_mod(a.data, q)
    r = len(pivots)

    # Column permutation moving pivot columns to the front, then clearing the
    # residual block to the right of the identity by column operations.
    nonpiv = [c for c in range(cols) if c not in pivots]
    perm = np.zeros((cols, cols), dtype=np.int64)
    for j, c in enumerate(pivots + nonpiv):
        perm[c, j] = 1
    theta = e[:r][:, nonpiv] if r else np.zeros((0, len(nonpiv)), dtype=np.int64)
    clear = np.eye(cols, dtype=np.int64)
    clear[:r, r:] = (-theta) % q
    qcol = (perm @ clear) % q

    # {1}-inverse with the free block Psi fixed to zero (deterministic).
    d = np.zeros((cols, rows), dtype=np.int64)
    for i in range(r):
        d[i, i] = 1
    one_inverse = (qcol @ d @ qrow) % q

    product = (one_inverse @ a.data) % q
    recoverable: list[int] = []
    extraction: list[np.ndarray] = []
    eye = np.eye(cols, dtype=np.int64)
    for j in range(cols):
        hits = np.nonzero(product[j])[0]
        if len(hits) == 1 and product[j, hits[0]] == 1:
            i = int(hits[0])
            if i in recoverable:
                continue
            # The scan already certifies row_j @ a == e_i; keep it exact.
            assert np.array_equal(product[j], eye[i])
            recoverable.append(i)
            extraction.append(one_inverse[j])
    order = np.argsort(recoverable) if recoverable else []
    recoverable = [recoverable[i] for i in order]
    extraction = [extraction[i] for i in order]
    ext = (
        np.stack(extraction)
        if extraction
        else np.zeros((0, rows), dtype=np.int64)
    )
    return GmiResult(
        one_inverse=ZqMatrix(one_inverse, q),
        recoverable_indices=tuple(recoverable),
        extraction_rows=ZqMatrix(ext, q),
    )
