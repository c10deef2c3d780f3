"""Finite discrete measures on the real line and their Cauchy-Stieltjes transforms.

Empirical spectral distributions, spectral measures of Hermitian matrices and
Monte Carlo averages of those are all finite sums of point masses, so a single
atoms/weights container covers every measure the library manipulates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MERGE_RTOL = 1e-12


@dataclass(frozen=True)
class HalfPlanePoint:
    """A point ``re + i*im`` of the open upper half-plane."""

    re: float
    im: float

    def __post_init__(self):
        if not np.isfinite(self.re) or not np.isfinite(self.im):
            raise ValueError(f"non-finite half-plane point ({self.re}, {self.im})")
        if not self.im > 0:
            raise ValueError(f"imaginary part must be > 0, got {self.im}")

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)


def _merge_atoms(atoms: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(atoms, kind="stable")
    atoms, weights = atoms[order], weights[order]
    out_a: list[float] = []
    out_w: list[float] = []
    for x, w in zip(atoms, weights):
        if out_a and abs(x - out_a[-1]) <= MERGE_RTOL * max(1.0, abs(out_a[-1])):
            out_w[-1] += w
        else:
            out_a.append(float(x))
            out_w.append(float(w))
    return np.array(out_a, dtype=float), np.array(out_w, dtype=float)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite measure ``sum_i weights[i] * delta(atoms[i])``.

    ``count`` records how many points an empirical measure was built from
    (``None`` for general measures); it is what the quantile-coupling
    distance uses to decide whether two measures are comparable.
    """

    atoms: np.ndarray
    weights: np.ndarray
    count: int | None = None
    total_mass: float = field(init=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape != weights.shape:
            raise ValueError("atoms and weights must have equal length")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError("atoms and weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        atoms, weights = _merge_atoms(atoms, weights)
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "total_mass", float(np.sum(weights)))

    def __len__(self) -> int:
        return len(self.atoms)

    def scaled(self, factor: float) -> DiscreteMeasure:
        """The measure multiplied by a nonnegative constant."""
        return DiscreteMeasure(self.atoms, factor * self.weights, self.count)

    def __add__(self, other: DiscreteMeasure) -> DiscreteMeasure:
        return DiscreteMeasure(
            np.concatenate([self.atoms, other.atoms]),
            np.concatenate([self.weights, other.weights]),
        )


def esd(eigenvalues: Sequence[float]) -> DiscreteMeasure:
    """Empirical spectral distribution: mass 1/m at each of the m eigenvalues."""
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("empty spectrum")
    return DiscreteMeasure(lam, np.full(lam.size, 1.0 / lam.size), count=lam.size)


def check_hermitian(A: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.conj().T)) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    return A


def spectral_measure(A: np.ndarray, u: np.ndarray) -> DiscreteMeasure:
    """Spectral measure of Hermitian ``A`` at ``u``: weight |<v_i, u>|^2 at lambda_i."""
    A = check_hermitian(A)
    u = np.asarray(u).ravel()
    if u.shape[0] != A.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape[0]}, vector {u.shape[0]}")
    lam, V = np.linalg.eigh(A)
    return DiscreteMeasure(lam, np.abs(V.conj().T @ u) ** 2)


def _as_complex(z) -> np.ndarray | complex:
    if isinstance(z, HalfPlanePoint):
        return z.z
    zz = np.asarray(z, dtype=complex)
    if np.any(zz.imag <= 0):
        raise ValueError("Stieltjes transform needs Im z > 0")
    return zz if zz.ndim else complex(zz)


def stieltjes_transform(m: DiscreteMeasure, z) -> complex | np.ndarray:
    """``s(z; m) = sum_i w_i / (x_i - z)``.

    ``z`` may be a :class:`HalfPlanePoint`, a complex number or an array of
    complex numbers in the open upper half-plane.
    """
    zz = _as_complex(z)
    arr = np.atleast_1d(zz)
    s = (m.weights[None, :] / (m.atoms[None, :] - arr[:, None])).sum(axis=1)
    return complex(s[0]) if np.ndim(zz) == 0 else s.reshape(np.shape(zz))


def invert_to_density(
    sampler: Callable[[complex], complex],
    E_grid: Sequence[float],
    delta_ladder: Sequence[float],
) -> np.ndarray:
    """Poisson-smoothed density ``Im s(E + i*delta) / pi`` on a grid.

    Returns an array of shape ``(len(E_grid), len(delta_ladder))``; column k
    holds the estimate at ``delta_ladder[k]``. Callers inspect how the columns
    stabilize as delta decreases. If ``Im s <= K`` everywhere, every entry is
    at most ``K / pi``.
    """
    deltas = np.asarray(delta_ladder, dtype=float)
    if deltas.size == 0 or np.any(deltas <= 0) or np.any(np.diff(deltas) >= 0):
        raise ValueError("delta_ladder must be strictly decreasing and positive")
    E = np.asarray(E_grid, dtype=float)
    out = np.empty((E.size, deltas.size))
    for i, e in enumerate(E):
        for k, d in enumerate(deltas):
            s = complex(sampler(complex(e, d)))
            if not (np.isfinite(s.real) and np.isfinite(s.imag)):
                raise ValueError(f"sampler returned non-finite value at E={e}, delta={d}")
            out[i, k] = s.imag / np.pi
    return out


def wasserstein2(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    """Quantile-coupling W2 distance between two probability measures.

    For empirical measures of equal size this is
    ``sqrt(mean((sorted(x) - sorted(y))**2))``.
    """
    for m in (m1, m2):
        if abs(m.total_mass - 1.0) > 1e-9:
            raise ValueError(f"not a probability measure (mass {m.total_mass})")
    if m1.count is not None and m2.count is not None and m1.count != m2.count:
        raise ValueError(f"unequal empirical sizes {m1.count} and {m2.count}")
    c1 = np.cumsum(m1.weights) / m1.total_mass
    c2 = np.cumsum(m2.weights) / m2.total_mass
    c1[-1] = c2[-1] = 1.0
    cuts = np.unique(np.clip(np.concatenate([[0.0], c1, c2]), 0.0, 1.0))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    q1 = m1.atoms[np.minimum(np.searchsorted(c1, mids), len(m1) - 1)]
    q2 = m2.atoms[np.minimum(np.searchsorted(c2, mids), len(m2) - 1)]
    return float(np.sqrt(np.sum(np.diff(cuts) * (q1 - q2) ** 2)))
