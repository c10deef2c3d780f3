"""Machine-precision checks of the exact identities behind the circulant picture.

Each check returns an :class:`IdentityReport`; nothing here raises on a
failed comparison, only on violated preconditions.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .ensemble import (
    SQRT2,
    CirculantSystem,
    GaussianSequence,
    ToeplitzSample,
    build_pdp,
    build_system,
    build_toeplitz,
    circulant_matrix,
    circulant_matvec,
    dft_matrix,
    eigvalsh_capped,
    gaussian_generator,
    pdp_matvec,
    sample_gaussian,
)
from .measures import esd, stieltjes_transform, wasserstein2

DENSE_CHECK_LIMIT = 512
PROBE_VECTORS = 30


class HypothesisViolated(ValueError):
    """Raised when the inputs of a check do not satisfy its precondition."""


@dataclass(frozen=True)
class IdentityReport:
    name: str
    n: int
    seed: int
    max_abs_error: float
    tolerance: float
    passed: bool = field(init=False)
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.max_abs_error <= self.tolerance))

    def to_dict(self) -> dict:
        return asdict(self)


def check_embedding_identity(sample: ToeplitzSample, tol: float = 1e-12) -> IdentityReport:
    """``Q C Q == [[T, 0], [0, 0]]`` with ``C`` rebuilt from its first row."""
    if not sample.modified:
        raise ValueError("the embedding holds for the modified Toeplitz matrix")
    n = sample.n
    b = np.empty(2 * n)
    # independent of ensemble.build_embedding: read b off the rules entry by entry
    a = sample.a.a
    for j in range(2 * n):
        if j == 0 or j == n:
            b[j] = SQRT2 * a[j]
        elif j < n:
            b[j] = a[j]
        else:
            b[j] = a[2 * n - j]
    C = circulant_matrix(b)
    q = np.concatenate([np.ones(n), np.zeros(n)])
    QCQ = q[:, None] * C * q[None, :]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = sample.matrix
    err = float(np.max(np.abs(QCQ - block)))
    return IdentityReport("embedding", n, sample.a.seed, err, tol)


def check_pdp_identity(
    system: CirculantSystem, sample: ToeplitzSample, tol: float | None = None
) -> IdentityReport:
    """``U^* Q C Q U / sqrt(2n) == P D P``.

    Dense comparison for n <= 512 (tolerance 1e-10); above that the two sides
    are compared on 30 random probe vectors (tolerance 1e-8, relative to the
    probe norm).
    """
    n = system.n
    N = 2 * n
    q = system.Q
    if n <= DENSE_CHECK_LIMIT:
        tol = 1e-10 if tol is None else tol
        U = dft_matrix(N)
        C = circulant_matrix(system.b)
        lhs = U.conj().T @ (q[:, None] * C * q[None, :]) @ U / math.sqrt(N)
        err = float(np.max(np.abs(lhs - build_pdp(system))))
        return IdentityReport("pdp", n, sample.a.seed, err, tol, {"mode": "dense"})
    tol = 1e-8 if tol is None else tol
    rng = gaussian_generator(sample.a.seed, 2**32 + n)
    X = rng.standard_normal((N, PROBE_VECTORS)) + 1j * rng.standard_normal((N, PROBE_VECTORS))
    Ux = math.sqrt(N) * np.fft.ifft(X, axis=0)
    y = q[:, None] * circulant_matvec(system.b, q[:, None] * Ux)
    lhs = np.fft.fft(y, axis=0) / N
    rhs = pdp_matvec(system, X)
    err = float(np.max(np.linalg.norm(lhs - rhs, axis=0) / np.linalg.norm(X, axis=0)))
    return IdentityReport("pdp", n, sample.a.seed, err, tol, {"mode": "probe"})


def check_pdp_spectrum(
    system: CirculantSystem, sample: ToeplitzSample, tol: float = 1e-8
) -> IdentityReport:
    """Spectrum of PDP equals that of ``(2n)^{-1/2} T`` together with n zeros."""
    n = system.n
    lam_pdp = np.sort(eigvalsh_capped(build_pdp(system)))
    lam_t = eigvalsh_capped(sample.matrix / math.sqrt(2 * n))
    expected = np.sort(np.concatenate([lam_t, np.zeros(n)]))
    err = float(np.max(np.abs(lam_pdp - expected)))
    return IdentityReport("pdp_spectrum", n, sample.a.seed, err, tol)


def default_z_points(lo: float, hi: float, count: int = 20) -> np.ndarray:
    """Deterministic quasi-random points with Re in [lo, hi], Im in [0.05, 2]."""
    u = qmc.Halton(d=2, scramble=False).random(count + 1)[1:]
    return (lo + (hi - lo) * u[:, 0]) + 1j * (0.05 + 1.95 * u[:, 1])


def _weights_sum(V: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    W = np.asarray(vectors).T
    return np.sum(np.abs(V.conj().T @ W) ** 2, axis=1)


def check_spectral_equality(
    A: np.ndarray,
    us: Sequence[np.ndarray],
    vs: Sequence[np.ndarray],
    z_points: np.ndarray | None = None,
    tol: float = 1e-9,
    n: int = 0,
    seed: int = 0,
) -> IdentityReport:
    """Sum of spectral measures at ``us`` equals that at ``vs`` when sum u u^* = sum v v^*.

    Measures are compared through their Stieltjes transforms.
    """
    us = [np.asarray(u, dtype=complex).ravel() for u in us]
    vs = [np.asarray(v, dtype=complex).ravel() for v in vs]
    Gu = sum(np.outer(u, u.conj()) for u in us)
    Gv = sum(np.outer(v, v.conj()) for v in vs)
    gap = float(np.max(np.abs(Gu - Gv)))
    if gap > 1e-12 * max(1.0, float(np.max(np.abs(Gu)))):
        raise HypothesisViolated(f"hypothesis violated: max |sum uu* - sum vv*| = {gap:.3e}")
    lam, V = np.linalg.eigh(A)
    if z_points is None:
        z_points = default_z_points(lam[0] - 1.0, lam[-1] + 1.0)
    wu, wv = _weights_sum(V, us), _weights_sum(V, vs)
    su = (wu[None, :] / (lam[None, :] - z_points[:, None])).sum(axis=1)
    sv = (wv[None, :] / (lam[None, :] - z_points[:, None])).sum(axis=1)
    err = float(np.max(np.abs(su - sv)))
    return IdentityReport("spectral_equality", n, seed, err, tol)


def circulant_stieltjes_rhs(system: CirculantSystem, z: np.ndarray) -> np.ndarray:
    """``(sqrt(2) n)^{-1} sum_j <P e_j, (PDP - z / sqrt(2))^{-1} P e_j>`` for each z.

    This is the circulant-side expression for ``s(z; mu(n^{-1/2} T))``.
    ``PDP`` is diagonalised once and reused across all z.
    """
    n = system.n
    mu, W = np.linalg.eigh(build_pdp(system))
    weights = np.sum(np.abs(system.P @ W) ** 2, axis=0)
    w = np.atleast_1d(np.asarray(z, dtype=complex)) / SQRT2
    return (weights[None, :] / (mu[None, :] - w[:, None])).sum(axis=1) / (SQRT2 * n)


def check_toeplitz_stieltjes_identity(
    sample: ToeplitzSample,
    system: CirculantSystem,
    z_grid: np.ndarray | None = None,
    tol: float = 1e-8,
) -> IdentityReport:
    """Per-realization identity between the Toeplitz ESD transform and the PDP side."""
    n = sample.n
    lam = eigvalsh_capped(sample.scaled)
    if z_grid is None:
        z_grid = default_z_points(lam[0] - 1.0, lam[-1] + 1.0)
    z_grid = np.atleast_1d(np.asarray(z_grid, dtype=complex))
    if np.any(z_grid.imag <= 0):
        raise ValueError("z_grid must lie in the open upper half-plane")
    lhs = stieltjes_transform(esd(lam), z_grid)
    rhs = circulant_stieltjes_rhs(system, z_grid)
    err = float(np.max(np.abs(lhs - rhs)))
    return IdentityReport("toeplitz_stieltjes", n, sample.a.seed, err, tol)


def hoffman_wielandt_bound(a: GaussianSequence) -> float:
    """``(sqrt(2) - 1)^2 a_0^2 / n``: squared Frobenius norm of the diagonal change over n."""
    return (SQRT2 - 1.0) ** 2 * a.a[0] ** 2 / a.n


def check_hoffman_wielandt(a: GaussianSequence, rtol: float = 1e-10) -> IdentityReport:
    """W2^2 between the spectra of ``n^{-1/2} T`` and ``n^{-1/2} T_mod`` is below the bound.

    The diagonal change is a multiple of the identity, so the bound is attained
    and the check is an equality up to eigensolver rounding; the tolerance adds
    an absolute allowance of ``1e-13 * max|lambda|`` per eigenvalue.
    """
    plain = eigvalsh_capped(build_toeplitz(a, modified=False).scaled)
    mod = eigvalsh_capped(build_toeplitz(a, modified=True).scaled)
    w2sq = wasserstein2(esd(plain), esd(mod)) ** 2
    bound = hoffman_wielandt_bound(a)
    atol = 1e-13 * max(1.0, float(np.max(np.abs(plain))))
    tol = (math.sqrt(bound) + atol) ** 2 * (1.0 + rtol)
    return IdentityReport(
        "hoffman_wielandt",
        a.n,
        a.seed,
        w2sq,
        tol,
        {"bound": bound, "slack": bound - w2sq, "a0": float(a.a[0])},
    )


CHECK_NAMES = ("embedding", "pdp", "spectral_equality", "toeplitz_stieltjes", "hoffman_wielandt")


def run_checks(n: int, seed: int, tol_scale: float = 1.0) -> list[IdentityReport]:
    """All five identity checks for one ``(n, seed)``, in :data:`CHECK_NAMES` order."""
    a = sample_gaussian(n, seed)
    sample = build_toeplitz(a, modified=True)
    system = build_system(a)
    reports = [
        check_embedding_identity(sample, tol=1e-12 * tol_scale),
        check_pdp_identity(
            system, sample, tol=(1e-10 if n <= DENSE_CHECK_LIMIT else 1e-8) * tol_scale
        ),
    ]
    U = dft_matrix(2 * n)
    us = [U.conj().T[:, j] for j in range(n)]
    vs = [system.P[:, j] for j in range(2 * n)]
    reports.append(
        check_spectral_equality(build_pdp(system), us, vs, tol=1e-9 * tol_scale, n=n, seed=seed)
    )
    reports.append(check_toeplitz_stieltjes_identity(sample, system, tol=1e-8 * tol_scale))
    reports.append(check_hoffman_wielandt(a))
    return reports
