"""Monte Carlo over independent Toeplitz draws.

Sample ``s`` of a run with seed ``seed`` always uses the Philox stream
``(seed, s)``, and per-sample results are stored by index before any
reduction, so the output never depends on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ensemble import (
    SQRT2,
    build_hankel,
    build_system,
    build_toeplitz,
    eigvalsh_capped,
    gaussian_generator,
    sample_gaussian,
)
from .identities import circulant_stieltjes_rhs

KEY_BOUND = 16 * SQRT2
DENSITY_CEILING = KEY_BOUND / math.pi
BOOTSTRAP_STREAM = 2**62


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("SPECTRA_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def parallel_map(fn: Callable[[int], np.ndarray], count: int, threads: int | None = None) -> list:
    """``[fn(0), ..., fn(count - 1)]`` computed on a thread pool; order is by index."""
    threads = resolve_threads(threads)
    if threads == 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


@dataclass(frozen=True)
class McConfig:
    n: int
    samples: int
    seed: int
    z_grid: np.ndarray = field(repr=False)
    threads: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        z = np.atleast_1d(np.asarray(self.z_grid, dtype=complex))
        if np.any(z.imag <= 0):
            raise ValueError("all z must lie in the open upper half-plane")
        object.__setattr__(self, "z_grid", z)


def key_bound_grid(step: float = 0.25, emax: float = 6.0, imz=(0.2, 0.05, 0.01)) -> np.ndarray:
    E = np.round(np.arange(-emax, emax + step / 2, step), 12)
    return np.array([complex(e, y) for y in imz for e in E])


def toeplitz_eigenvalues(n: int, seed: int, stream: int) -> np.ndarray:
    """Sorted eigenvalues of ``n^{-1/2} T_mod`` for one draw."""
    return eigvalsh_capped(build_toeplitz(sample_gaussian(n, seed, stream)).scaled)


def hankel_eigenvalues(n: int, seed: int, stream: int) -> np.ndarray:
    a = sample_gaussian(max(1, 2 * n - 2), seed, stream).a
    return eigvalsh_capped(build_hankel(a, n) / math.sqrt(n))


def _mean_stderr(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    if x.shape[0] < 2:
        return mean, np.zeros_like(mean, dtype=float)
    return mean, x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])


@dataclass
class StieltjesEstimate:
    z: np.ndarray
    mean: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    samples: int
    right_mean: np.ndarray | None = None
    max_gap: float | None = None

    @property
    def stderr(self) -> np.ndarray:
        return np.hypot(self.stderr_re, self.stderr_im)


def expected_stieltjes(cfg: McConfig, side: str = "left") -> StieltjesEstimate:
    """Monte Carlo mean of the Stieltjes transform of the ESD of ``n^{-1/2} T_mod``.

    ``"left"`` uses the n x n eigenvalues; ``"right"`` the circulant side
    ``(sqrt(2) n)^{-1} sum_j <P e_j, (PDP - z/sqrt(2))^{-1} P e_j>``;
    ``"both"`` computes the two and records the largest per-sample gap.
    """
    if side not in ("left", "right", "both"):
        raise ValueError(f"unknown side {side!r}")
    z = cfg.z_grid

    def one(s: int):
        a = sample_gaussian(cfg.n, cfg.seed, s)
        out = []
        if side in ("left", "both"):
            lam = eigvalsh_capped(build_toeplitz(a).scaled)
            out.append((1.0 / (lam[None, :] - z[:, None])).mean(axis=1))
        if side in ("right", "both"):
            out.append(circulant_stieltjes_rhs(build_system(a), z))
        return np.stack(out)

    per = np.stack(parallel_map(one, cfg.samples, cfg.threads))
    main = per[:, 0, :]
    mean, _ = _mean_stderr(main)
    _, se_re = _mean_stderr(main.real)
    _, se_im = _mean_stderr(main.imag)
    est = StieltjesEstimate(z, mean, se_re, se_im, cfg.samples)
    if side == "both":
        est.right_mean = per[:, 1, :].mean(axis=0)
        est.max_gap = float(np.max(np.abs(per[:, 0, :] - per[:, 1, :])))
    return est


@dataclass
class KeyBoundReport:
    max_value: float
    argmax_z: complex
    bound: float
    passed: bool
    n: int
    samples: int
    max_abs_mean: float


def check_key_bound(cfg: McConfig, est: StieltjesEstimate | None = None) -> KeyBoundReport:
    """``|mean s| + 3 stderr <= 16 sqrt(2)`` at every grid point."""
    est = expected_stieltjes(cfg) if est is None else est
    vals = np.abs(est.mean) + 3.0 * est.stderr
    k = int(np.argmax(vals))
    return KeyBoundReport(
        max_value=float(vals[k]),
        argmax_z=complex(est.z[k]),
        bound=KEY_BOUND,
        passed=bool(vals[k] <= KEY_BOUND),
        n=cfg.n,
        samples=cfg.samples,
        max_abs_mean=float(np.max(np.abs(est.mean))),
    )


@dataclass
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    n: int
    samples: int
    ci_halfwidth: np.ndarray
    ensemble: str = "toeplitz"

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    @property
    def peak(self) -> float:
        return float(np.max(self.values))

    @property
    def peak_upper(self) -> float:
        """Largest ``value + ci`` on the grid."""
        return float(np.max(self.values + self.ci_halfwidth))


def silverman_bandwidth(x: np.ndarray) -> float:
    return 0.9 * float(np.std(x)) * x.size ** (-0.2)


def _kde_curve(lam: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    u = (grid[:, None] - lam[None, :]) / h
    return np.exp(-0.5 * u * u).sum(axis=1) / (lam.size * h * math.sqrt(2 * math.pi))


def _density(
    eig_fn: Callable[[int, int, int], np.ndarray],
    n: int,
    samples: int,
    seed: int,
    grid: Sequence[float],
    bandwidth: float | None,
    threads: int | None,
    n_boot: int,
    ensemble: str,
) -> DensityEstimate:
    if bandwidth is not None and not bandwidth > 0:
        raise ValueError("bandwidth must be > 0")
    if n_boot < 50:
        raise ValueError("need at least 50 bootstrap resamples")
    grid = np.asarray(grid, dtype=float)
    eigs = np.stack(parallel_map(lambda s: eig_fn(n, seed, s), samples, threads))
    h = silverman_bandwidth(eigs.ravel()) if bandwidth is None else float(bandwidth)
    curves = np.stack(parallel_map(lambda s: _kde_curve(eigs[s], grid, h), samples, threads))
    values = curves.mean(axis=0)
    # resample whole matrices: eigenvalues within one draw are dependent
    rng = gaussian_generator(seed, BOOTSTRAP_STREAM)
    idx = rng.integers(0, samples, size=(n_boot, samples))
    boot = np.stack([curves[row].mean(axis=0) for row in idx])
    lo, hi = np.percentile(boot, [2.5, 97.5], axis=0)
    return DensityEstimate(grid, values, h, n, samples, 0.5 * (hi - lo), ensemble)


def estimate_gamma_density(
    n: int,
    samples: int,
    seed: int,
    grid: Sequence[float],
    bandwidth: float | None = None,
    threads: int | None = None,
    n_boot: int = 200,
) -> DensityEstimate:
    """Gaussian KDE of the pooled eigenvalues of ``n^{-1/2} T_mod`` with a bootstrap 95% band.

    The default bandwidth is Silverman's ``0.9 sigma N^{-1/5}``.
    """
    return _density(toeplitz_eigenvalues, n, samples, seed, grid, bandwidth, threads, n_boot, "toeplitz")


def hankel_density_explore(
    n: int,
    samples: int,
    seed: int,
    grid: Sequence[float],
    bandwidth: float | None = None,
    threads: int | None = None,
    n_boot: int = 200,
) -> DensityEstimate:
    """Same estimator for ``n^{-1/2}`` times a random Hankel matrix. Exploratory: no bound applies."""
    return _density(hankel_eigenvalues, n, samples, seed, grid, bandwidth, threads, n_boot, "hankel")


def symmetry_gap(est: DensityEstimate) -> np.ndarray:
    """``|f(x) - f(-x)| - 2 (ci(x) + ci(-x))`` on a grid symmetric about 0; <= 0 means consistent."""
    if not np.allclose(est.grid, -est.grid[::-1], atol=1e-12):
        raise ValueError("symmetry check needs a grid symmetric about 0")
    f, c = est.values, est.ci_halfwidth
    return np.abs(f - f[::-1]) - 2.0 * (c + c[::-1])


def check_density_ceiling(est: DensityEstimate) -> dict:
    sym = symmetry_gap(est)
    return {
        "peak": est.peak,
        "peak_upper": est.peak_upper,
        "ceiling": DENSITY_CEILING,
        "margin": DENSITY_CEILING - est.peak_upper,
        "integral": est.integral(),
        "symmetric": bool(np.all(sym <= 0)),
        "passed": bool(est.peak_upper <= DENSITY_CEILING and abs(est.integral() - 1) <= 0.01),
    }


def agreement_fraction(e1: DensityEstimate, e2: DensityEstimate, window=(-3.0, 3.0)) -> float:
    """Fraction of grid points in ``window`` where ``|f1 - f2| <= ci1 + ci2``."""
    if not np.array_equal(e1.grid, e2.grid):
        raise ValueError("estimates must share a grid")
    m = (e1.grid >= window[0]) & (e1.grid <= window[1])
    ok = np.abs(e1.values - e2.values) <= e1.ci_halfwidth + e2.ci_halfwidth
    return float(np.mean(ok[m]))


def moment_diagnostics(
    n: int, samples: int, seed: int, max_order: int = 6, threads: int | None = None
) -> dict[int, tuple[float, float]]:
    """Mean and standard error of ``(1/n) tr((n^{-1/2} T_mod)^k)`` for ``k = 1..max_order``."""
    orders = np.arange(1, max_order + 1)

    def one(s):
        lam = toeplitz_eigenvalues(n, seed, s)
        return (lam[None, :] ** orders[:, None]).mean(axis=1)

    per = np.stack(parallel_map(one, samples, threads))
    mean, se = _mean_stderr(per)
    return {int(k): (float(mean[i]), float(se[i])) for i, k in enumerate(orders)}


def exact_second_moment(n: int) -> float:
    """``E (1/n) tr((n^{-1/2} T_mod)^2)`` by summing entry variances (2 on the diagonal, 1 off it)."""
    var = np.ones((n, n))
    np.fill_diagonal(var, 2.0)
    return float(var.sum()) / n**2


def exact_fourth_moment(n: int) -> float:
    """``E (1/n) tr((n^{-1/2} T_mod)^4)`` by enumerating index quadruples.

    Each entry is ``c * a_lag`` with ``c = sqrt(2)`` on the diagonal; the
    expectation of a product of four standard normals is the sum over the
    three pairings of the lags.
    """
    idx = np.arange(n)
    i2, i3, i4 = np.meshgrid(idx, idx, idx, indexing="ij")
    l23 = np.abs(i2 - i3)
    l34 = np.abs(i3 - i4)
    c23 = np.where(l23 == 0, SQRT2, 1.0)
    c34 = np.where(l34 == 0, SQRT2, 1.0)
    total = 0.0
    for i1 in range(n):
        l12 = np.abs(i1 - i2)
        l41 = np.abs(i4 - i1)
        c = np.where(l12 == 0, SQRT2, 1.0) * c23 * c34 * np.where(l41 == 0, SQRT2, 1.0)
        wick = (
            (l12 == l23) & (l34 == l41)
        ).astype(float) + ((l12 == l34) & (l23 == l41)) + ((l12 == l41) & (l23 == l34))
        total += float(np.sum(c * wick))
    return total / n**3
