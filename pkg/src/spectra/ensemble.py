"""Random symmetric Toeplitz matrices and their circulant embedding.

A symmetric Toeplitz matrix with the diagonal inflated by sqrt(2) is the
top-left n x n block of a 2n x 2n circulant ``C``. With ``U`` the unitary DFT
(kernel ``exp(+2 pi i jk / 2n)``, symmetric ``1/sqrt(2n)`` normalisation)
we have ``C / sqrt(2n) = U D U^*`` and, with ``Q`` the projection onto the
first n coordinates and ``P = U^* Q U``,

    U^* Q C Q U / sqrt(2n) = P D P.

Everything here is built from that relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT2 = math.sqrt(2.0)
DENSE_P_LIMIT = 8192
EIG_DIM_LIMIT = 4096


def gaussian_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(seed, stream)``."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be nonnegative")
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), stream]))


@dataclass(frozen=True)
class GaussianSequence:
    """i.i.d. standard normal coefficients ``a[0..n]``.

    Draws are a prefix of one stream, so ``a[k]`` depends only on
    ``(seed, stream, k)`` and not on ``n``.
    """

    n: int
    a: np.ndarray
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        if a.shape != (self.n + 1,):
            raise ValueError(f"need n+1={self.n + 1} coefficients, got {a.size}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @classmethod
    def from_values(cls, values) -> GaussianSequence:
        values = np.asarray(values, dtype=float).ravel()
        return cls(len(values) - 1, values)


def sample_gaussian(n: int, seed: int, stream: int = 0) -> GaussianSequence:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    a = gaussian_generator(seed, stream).standard_normal(n + 1)
    return GaussianSequence(n, a, seed, stream)


@dataclass(frozen=True)
class ToeplitzSample:
    n: int
    a: GaussianSequence
    modified: bool
    matrix: np.ndarray = field(repr=False)

    @property
    def scaled(self) -> np.ndarray:
        """``n^{-1/2}`` times the matrix."""
        return self.matrix / math.sqrt(self.n)


def toeplitz_column(a: GaussianSequence, modified: bool) -> np.ndarray:
    col = np.array(a.a[: a.n], dtype=float)
    if modified:
        col[0] *= SQRT2
    return col


def build_toeplitz(a: GaussianSequence, modified: bool = True) -> ToeplitzSample:
    col = toeplitz_column(a, modified)
    idx = np.arange(a.n)
    M = col[np.abs(idx[:, None] - idx[None, :])]
    M.setflags(write=False)
    return ToeplitzSample(a.n, a, modified, M)


def build_hankel(values: np.ndarray, n: int) -> np.ndarray:
    """Hankel matrix ``H[j, k] = values[j + k]`` for ``0 <= j, k < n``."""
    values = np.asarray(values, dtype=float)
    if values.size < 2 * n - 1:
        raise ValueError(f"Hankel of size {n} needs {2 * n - 1} values")
    idx = np.arange(n)
    return values[idx[:, None] + idx[None, :]]


def build_embedding(a: GaussianSequence) -> np.ndarray:
    """First row ``b`` of the 2n x 2n circulant containing the modified Toeplitz matrix."""
    n = a.n
    b = np.empty(2 * n)
    b[0] = SQRT2 * a.a[0]
    b[n] = SQRT2 * a.a[n]
    b[1:n] = a.a[1:n]
    b[n + 1 :] = a.a[1:n][::-1]
    return b


def circulant_matrix(b: np.ndarray) -> np.ndarray:
    """Dense circulant ``C[i, j] = b[(j - i) mod N]``."""
    b = np.asarray(b)
    N = b.size
    idx = np.arange(N)
    return b[(idx[None, :] - idx[:, None]) % N]


def dft_matrix(N: int) -> np.ndarray:
    """Unitary DFT ``U[j, k] = exp(2 pi i jk / N) / sqrt(N)``."""
    jk = np.outer(np.arange(N), np.arange(N)) % N
    return np.exp(2j * np.pi * jk / N) / math.sqrt(N)


def compute_d(b: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Eigenvalues ``d_j = (2n)^{-1/2} sum_k b_k exp(2 pi i jk / 2n)`` of ``C / sqrt(2n)``."""
    b = np.asarray(b, dtype=float)
    N = b.size
    if N < 2 or N % 2:
        raise ValueError(f"b must have even length >= 2, got {N}")
    d = math.sqrt(N) * np.fft.ifft(b)
    scale = max(1.0, float(np.max(np.abs(b))))
    if np.max(np.abs(d.imag)) > tol * scale:
        raise ValueError("non-real DFT of symmetric b")
    return d.real.copy()


def projection_row(n: int) -> np.ndarray:
    """``p[l] = (2n)^{-1} sum_{m<n} exp(2 pi i m l / 2n)``, so that ``P[j, k] = p[(k - j) mod 2n]``."""
    q = np.zeros(2 * n)
    q[:n] = 1.0
    return np.fft.ifft(q)


def build_projection(n: int) -> np.ndarray:
    """Dense ``P = U^* Q U`` (a Hermitian circulant projection of rank n)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if 2 * n > DENSE_P_LIMIT:
        raise ValueError(
            f"dense P of size {2 * n} exceeds {DENSE_P_LIMIT}; use ImplicitProjection"
        )
    return circulant_matrix(projection_row(n))


class ImplicitProjection:
    """``P = U^* Q U`` applied with two FFTs and a truncation."""

    def __init__(self, n: int):
        self.n = n
        self.shape = (2 * n, 2 * n)

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        y = np.fft.ifft(np.asarray(x, dtype=complex), axis=0)
        y[self.n :] = 0.0
        return np.fft.fft(y, axis=0)


@dataclass(frozen=True)
class CirculantSystem:
    """Circulant embedding data for one coefficient draw.

    ``P`` is a dense array for ``2n <= DENSE_P_LIMIT`` and an
    :class:`ImplicitProjection` above that.
    """

    n: int
    b: np.ndarray
    d: np.ndarray
    P: np.ndarray | ImplicitProjection = field(repr=False)

    @property
    def Q(self) -> np.ndarray:
        return np.concatenate([np.ones(self.n), np.zeros(self.n)])

    @property
    def dense(self) -> bool:
        return isinstance(self.P, np.ndarray)


def build_system(a: GaussianSequence) -> CirculantSystem:
    b = build_embedding(a)
    d = compute_d(b)
    P = build_projection(a.n) if 2 * a.n <= DENSE_P_LIMIT else ImplicitProjection(a.n)
    for arr in (b, d):
        arr.setflags(write=False)
    return CirculantSystem(a.n, b, d, P)


def build_pdp(system: CirculantSystem) -> np.ndarray:
    if not system.dense:
        raise ValueError("dense PDP requested for an implicit projection")
    P = system.P
    return (P * system.d[None, :]) @ P


def pdp_matvec(system: CirculantSystem, x: np.ndarray) -> np.ndarray:
    """``P D P x`` without forming any 2n x 2n matrix."""
    P = ImplicitProjection(system.n)
    y = P @ x
    y = system.d.reshape((-1,) + (1,) * (y.ndim - 1)) * y
    return P @ y


def circulant_matvec(b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``C x`` for ``C[i, j] = b[(j - i) mod N]`` in O(N log N)."""
    b = np.asarray(b)
    x = np.asarray(x)
    N = b.size
    if x.shape[0] != N:
        raise ValueError(f"length mismatch: b has {N}, x has {x.shape[0]}")
    fb = N * np.fft.ifft(b)
    fb = fb.reshape((N,) + (1,) * (x.ndim - 1))
    y = np.fft.ifft(np.fft.fft(x, axis=0) * fb, axis=0)
    if np.isrealobj(b) and np.isrealobj(x):
        return y.real
    return y


def toeplitz_matvec(sample: ToeplitzSample, x: np.ndarray) -> np.ndarray:
    """``T x`` through a zero-padded circulant of size 2n."""
    n = sample.n
    x = np.asarray(x)
    if x.shape[0] != n:
        raise ValueError(f"length mismatch: matrix {n}, vector {x.shape[0]}")
    col = toeplitz_column(sample.a, sample.modified)
    b = np.zeros(2 * n)
    b[:n] = col
    b[n + 1 :] = col[1:][::-1]
    xp = np.zeros((2 * n,) + x.shape[1:], dtype=x.dtype)
    xp[:n] = x
    return circulant_matvec(b, xp)[:n]


def eigvalsh_capped(A: np.ndarray, limit: int = EIG_DIM_LIMIT) -> np.ndarray:
    if A.shape[0] > limit:
        raise ValueError(f"dense eigensolve of dimension {A.shape[0]} exceeds cap {limit}")
    return np.linalg.eigvalsh(A)
