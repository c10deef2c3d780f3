"""Spectral averaging for a linear one-parameter family of Hermitian matrices.

For ``H(lam) = H0 + lam * Hdot`` with ``Hdot = V V^*`` of low rank,
``Hdot >= c0 B^2`` and a smooth density ``g``, the averaged projected
resolvent

    F(eps, delta) = int g(lam) <phi, B (H(lam) - E + i delta + i eps Hdot)^{-1} B phi> dlam

is bounded uniformly in ``delta`` by ``(|g|_1 + |g'|_1 + |g''|_1) |phi|^2 / c0``.
This module builds such families (a scalar toy family and the Toeplitz
family obtained by freeing one pair of DFT eigenvalues), evaluates the
regularised resolvent densely and through a rank-r Woodbury update, and
checks every intermediate inequality of the ``eps -> 0`` argument.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erfc, wofz

from .ensemble import CirculantSystem
from .quadrature import QuadResult, integrate, integrate_complex

C0_TOEPLITZ = 2.0
DEFAULT_EPS_LADDER = (1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001)
BOUND_RTOL = 1e-6


@dataclass(frozen=True)
class GaussianDensity:
    """Density of ``scale * Z`` for standard normal Z, with its first two derivatives."""

    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be > 0")

    def pdf(self, x):
        s = self.scale
        return np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2 * math.pi))

    def d1(self, x):
        return -x / self.scale**2 * self.pdf(x)

    def d2(self, x):
        s2 = self.scale**2
        return (x**2 / s2**2 - 1.0 / s2) * self.pdf(x)

    @cached_property
    def norms(self) -> tuple[float, float, float]:
        return gaussian_norms(self.scale)


def gaussian_norms(scale: float, half_width: float = 12.0) -> tuple[float, float, float]:
    """``(|g|_1, |g'|_1, |g''|_1)`` by quadrature, split where each derivative changes sign."""
    g = GaussianDensity(scale)
    L = half_width * scale
    bp = (-scale, 0.0, scale)
    res = integrate(
        lambda x: np.abs(np.stack([g.pdf(x), g.d1(x), g.d2(x)])),
        -L,
        L,
        tol=1e-14,
        panels=24,
        breakpoints=bp,
    )
    return tuple(float(v) for v in res.value)


@dataclass(frozen=True)
class Quadrature:
    """λ-integration settings: domain ``±half_width`` scale units, initial node count, tolerance."""

    half_width: float = 10.0
    nodes: int = 3000
    tol: float = 1e-10

    def __post_init__(self):
        if self.half_width < 8:
            raise ValueError("half_width must be >= 8 standard deviations")
        if self.nodes < 2000:
            raise ValueError("need at least 2000 quadrature nodes")


@dataclass(frozen=True)
class WegnerFamily:
    """``H(lam) = H0 + lam * V V^*`` with coupling ``B``, constant ``c0``, vector ``phi``, density ``g``."""

    H0: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    c0: float
    phi: np.ndarray = field(repr=False)
    g: GaussianDensity
    j: int = 0
    lam0: float = 0.0
    Ej: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.H0.shape[0]

    @property
    def Hdot(self) -> np.ndarray:
        return self.V @ self.V.conj().T

    @property
    def Hddot(self) -> np.ndarray:
        return np.zeros_like(self.H0)

    def H(self, lam: float) -> np.ndarray:
        return self.H0 + lam * self.Hdot

    @property
    def phi_norm2(self) -> float:
        return float(np.vdot(self.phi, self.phi).real)

    @property
    def bound_rhs(self) -> float:
        """``c0^{-1} (|g|_1 + |g'|_1 + |g''|_1) |phi|^2``."""
        return sum(self.g.norms) * self.phi_norm2 / self.c0

    def positivity_margin(self) -> float:
        """Smallest eigenvalue of ``Hdot - c0 B^2``; must be >= 0 up to rounding."""
        M = self.Hdot - self.c0 * self.B @ self.B
        return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


def scalar_family(c0: float = 1.0, scale: float = 1.0) -> WegnerFamily:
    """1x1 family ``H(lam) = lam`` with ``B = 1``, ``phi = 1``."""
    one = np.ones((1, 1), dtype=complex)
    return WegnerFamily(
        H0=np.zeros((1, 1), dtype=complex),
        V=one.copy(),
        B=one.copy(),
        c0=c0,
        phi=np.ones(1, dtype=complex),
        g=GaussianDensity(scale),
    )


def build_family(
    system: CirculantSystem,
    j: int,
    variant: str = "j",
    phi: np.ndarray | None = None,
) -> WegnerFamily:
    """Free the DFT eigenvalue pair ``(d_j, d_{2n-j})`` of ``P D P``.

    ``variant`` chooses ``B = P e_j e_j^* P`` (``"j"``) or
    ``P e_{2n-j} e_{2n-j}^* P`` (``"mirror"``); ``phi`` defaults to the
    matching coordinate vector.
    """
    n = system.n
    N = 2 * n
    if not 0 <= j <= n:
        raise ValueError(f"j must lie in [0, {n}], got {j}")
    if variant not in ("j", "mirror"):
        raise ValueError(f"unknown variant {variant!r}")
    if not system.dense:
        raise ValueError("Wegner families need a dense projection")
    edge = j in (0, n)
    idx = [j] if edge else [j, N - j]
    k = j if (edge or variant == "j") else N - j
    P = system.P
    Ej = np.zeros(N)
    Ej[idx] = 1.0
    frozen = np.array(system.d, dtype=float)
    frozen[idx] = 0.0
    H0 = (P * frozen[None, :]) @ P
    V = P[:, idx]
    B = np.outer(P[:, k], P[:, k].conj())
    if phi is None:
        phi = np.zeros(N, dtype=complex)
        phi[k] = 1.0
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (N,) or not np.any(phi):
        raise ValueError("phi must be a nonzero vector of length 2n")
    return WegnerFamily(
        H0=H0,
        V=V,
        B=B,
        c0=C0_TOEPLITZ,
        phi=phi,
        g=GaussianDensity(math.sqrt(2.0) if edge else 1.0),
        j=j,
        lam0=float(system.d[j]),
        Ej=Ej,
    )


def regularized_resolvent(fam: WegnerFamily, lam: float, eps: float, delta: float, E: float) -> np.ndarray:
    """Dense ``(H(lam) - E + i delta + i eps Hdot)^{-1}``."""
    if eps < 0 or not delta > 0:
        raise ValueError("need eps >= 0 and delta > 0")
    A = fam.H(lam) - E * np.eye(fam.dim) + 1j * delta * np.eye(fam.dim) + 1j * eps * fam.Hdot
    return np.linalg.solve(A, np.eye(fam.dim, dtype=complex))


def kernel_K(fam: WegnerFamily, lam: float, eps: float, delta: float, E: float) -> np.ndarray:
    return fam.B @ regularized_resolvent(fam, lam, eps, delta, E) @ fam.B


class ReducedKernel:
    """``<phi, K(lam, eps, delta) phi>`` as a function of ``mu = lam + i eps``.

    With ``G0 = (H0 - E + i delta)^{-1}`` and ``w = B phi``, Woodbury gives
    ``<w, R w> = c - mu a (I + mu M)^{-1} b`` where ``a = w^* G0 V``,
    ``b = V^* G0 w`` and ``M = V^* G0 V``; every evaluation is an r x r solve.
    """

    def __init__(self, fam: WegnerFamily, E: float, delta: float, phi: np.ndarray | None = None):
        if not delta > 0:
            raise ValueError("delta must be > 0")
        phi = fam.phi if phi is None else phi
        A = fam.H0 - E * np.eye(fam.dim) + 1j * delta * np.eye(fam.dim)
        w = fam.B @ phi
        rhs = np.column_stack([w, fam.V])
        G0_rhs = np.linalg.solve(A, rhs)
        G0_w, G0_V = G0_rhs[:, 0], G0_rhs[:, 1:]
        self.c = complex(np.vdot(w, G0_w))
        self.a = w.conj() @ G0_V
        self.b = fam.V.conj().T @ G0_w
        self.M = fam.V.conj().T @ G0_V
        self.r = fam.V.shape[1]
        # resolvent norm <= 1/delta, so |<w, R w>| <= |w|^2 / delta
        self.sup_bound = float(np.vdot(w, w).real) / delta

    def poles(self) -> np.ndarray:
        """Values of ``mu`` where ``I + mu M`` is singular."""
        m = np.linalg.eigvals(self.M)
        m = m[np.abs(m) > 1e-300]
        return -1.0 / m

    def _solves(self, mu: np.ndarray):
        mu = np.asarray(mu, dtype=complex)
        S = np.eye(self.r)[None, :, :] + mu.ravel()[:, None, None] * self.M[None, :, :]
        X = np.linalg.solve(S, np.broadcast_to(self.b[:, None], (mu.size, self.r, 1)))[..., 0]
        Y = np.linalg.solve(
            np.swapaxes(S, 1, 2), np.broadcast_to(self.a[:, None], (mu.size, self.r, 1))
        )[..., 0]
        return mu.ravel(), X, Y

    def value(self, mu: np.ndarray) -> np.ndarray:
        shape = np.shape(mu)
        m, X, _ = self._solves(mu)
        return (self.c - m * (X @ self.a)).reshape(shape)

    def value_and_derivative(self, mu: np.ndarray):
        """``<w, R w>`` and ``<w, R Hdot R w>`` (so that ``d<w,Rw>/dmu = -<w,R Hdot R w>``)."""
        shape = np.shape(mu)
        m, X, Y = self._solves(mu)
        val = self.c - m * (X @ self.a)
        der = np.sum(Y * X, axis=1)
        return val.reshape(shape), der.reshape(shape)


def _breakpoints(kernels: Iterable[ReducedKernel], eps_values: Iterable[float], lo, hi):
    pts = []
    for ker in kernels:
        for p in ker.poles():
            for e in eps_values:
                x = p.real
                eta = abs(p.imag) + e
                if lo < x < hi:
                    pts.append(x)
                    for s in (1.0, 4.0, 16.0):
                        pts.extend([x - s * eta, x + s * eta])
    return sorted(set(float(x) for x in pts if lo < x < hi))


def _tail_budget(fam: WegnerFamily, ker: ReducedKernel, L: float) -> float:
    # |g|, |g'| mass beyond L standard deviations, times the sup of the kernel
    s = fam.g.scale
    tail_g = erfc(L / math.sqrt(2.0))
    tail_g1 = 2.0 * fam.g.pdf(L * s)
    return ker.sup_bound * max(tail_g, tail_g1)


@dataclass(frozen=True)
class AveragedKernel:
    """Quadrature of ``int w(lam) <phi, K(lam + i eps) phi> dlam`` for several eps at once."""

    values: dict
    error: float
    nodes: int


def averaged_kernel(
    fam: WegnerFamily,
    E: float,
    delta: float,
    eps_values: Sequence[float],
    quad: Quadrature = Quadrature(),
    weights: Sequence[str] = ("g",),
    with_derivative: bool = False,
) -> AveragedKernel:
    """One adaptive mesh for all requested ``(weight, eps)`` combinations.

    ``weights`` entries are ``"g"`` or ``"g1"`` (the derivative of g). With
    ``with_derivative`` the analytic ``int g <phi, B R Hdot R B phi>`` is
    added under key ``("dR", eps)``.
    """
    ker = ReducedKernel(fam, E, delta)
    eps_values = [float(e) for e in eps_values]
    L = quad.half_width * fam.g.scale
    keys = [(w, e) for w in weights for e in eps_values]
    if with_derivative:
        keys += [("dR", e) for e in eps_values]
    wfun = {"g": fam.g.pdf, "g1": fam.g.d1}

    def f(x):
        mu = x[None, :] + 1j * np.array(eps_values)[:, None]
        val, der = ker.value_and_derivative(mu)
        rows = []
        for w in weights:
            rows.append(wfun[w](x)[None, :] * val)
        if with_derivative:
            rows.append(fam.g.pdf(x)[None, :] * der)
        return np.concatenate(rows, axis=0)

    panels = max(1, quad.nodes // 15 + (quad.nodes % 15 > 0))
    res: QuadResult = integrate_complex(
        f, -L, L, tol=quad.tol, panels=panels, breakpoints=_breakpoints([ker], eps_values, -L, L)
    )
    err = res.error + _tail_budget(fam, ker, quad.half_width)
    return AveragedKernel(dict(zip(keys, res.value)), err, res.nodes)


def compute_F(fam: WegnerFamily, eps: float, delta: float, E: float, quad: Quadrature = Quadrature()):
    """``F(eps, delta)`` and its quadrature error estimate."""
    r = averaged_kernel(fam, E, delta, [eps], quad)
    return complex(r.values[("g", float(eps))]), r.error


def compute_Ftilde(fam: WegnerFamily, eps: float, delta: float, E: float, quad: Quadrature = Quadrature()):
    """``F`` with ``g'`` in place of ``g``."""
    r = averaged_kernel(fam, E, delta, [eps], quad, weights=("g1",))
    return complex(r.values[("g1", float(eps))]), r.error


def scalar_F_exact(E: float, delta: float, eps: float, scale: float = 1.0) -> complex:
    """Closed form of F for :func:`scalar_family` via the Faddeeva function."""
    # int g(x) / (x - q) dx with Im q < 0 is the conjugate of the Im q > 0 case
    q = complex(E, -(delta + eps))
    zc = q.conjugate() / (scale * math.sqrt(2.0))
    upper = 1j * math.sqrt(math.pi / 2.0) / scale * complex(wofz(zc))
    return upper.conjugate()


@dataclass
class BoundCheck:
    bound: str
    eps: float
    delta: float
    E: float
    lhs: float
    rhs: float
    budget: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.lhs <= self.rhs * (1.0 + BOUND_RTOL) + self.budget)


@dataclass
class WegnerReport:
    name: str
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_violations": len(self.violations),
            "info": self.info,
            "checks": [asdict(c) for c in self.checks],
        }


def verify_apriori_bound(
    fam: WegnerFamily,
    lam_grid: Sequence[float],
    eps: float,
    delta: float,
    E: float,
    slack: float = 1e-9,
) -> WegnerReport:
    """``|K phi| >= -Im <phi, K phi> >= c0 eps |K phi|^2`` at each lam (phi normalised), dense solves."""
    phi = fam.phi / math.sqrt(fam.phi_norm2)
    rep = WegnerReport("apriori", info={"eps": eps, "delta": delta, "E": E, "slack": slack})
    for lam in lam_grid:
        Kphi = kernel_K(fam, lam, eps, delta, E) @ phi
        norm = float(np.linalg.norm(Kphi))
        mim = -float(np.vdot(phi, Kphi).imag)
        rep.checks.append(BoundCheck("8a", eps, delta, E, mim, norm, slack))
        rep.checks.append(BoundCheck("8b", eps, delta, E, fam.c0 * eps * norm**2, mim, slack))
    return rep


def _fd_step(eps: float) -> float:
    return min(eps / 10.0, 1e-3)


def verify_F_bounds(
    fam: WegnerFamily,
    eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
    delta_list: Sequence[float] = (0.5, 0.05, 0.005),
    E_list: Sequence[float] = (-2.0, 0.0, 2.0),
    quad: Quadrature = Quadrature(),
) -> WegnerReport:
    """The chain of bounds on ``F(eps, delta)`` and ``dF/deps`` that ends in the uniform bound.

    Bound ids: ``9`` ``|F| <= |g|_1/(eps c0)``; ``10`` ``|F'| <= |g'|_1/(eps c0)``;
    ``11`` ``|F| <= (|g'|_1 |log eps| + |g|_1)/c0``; ``12`` ``|F'| <= (|g''|_1 |log eps| + |g'|_1)/c0``;
    ``13`` ``|F| <= (|g|_1 + |g'|_1 + |g''|_1)/c0``. All right-hand sides carry ``|phi|^2``.
    ``dF/deps`` is a central difference with step ``min(eps/10, 1e-3)``.
    """
    eps_ladder = [float(e) for e in eps_ladder]
    if any(not 0 < e <= 1 for e in eps_ladder):
        raise ValueError("eps_ladder must lie in (0, 1]")
    n0, n1, n2 = fam.g.norms
    c0 = fam.c0
    p2 = fam.phi_norm2
    rep = WegnerReport(
        "F_bounds",
        info={"norms": [n0, n1, n2], "c0": c0, "phi_norm2": p2, "eps_ladder": eps_ladder},
    )
    evals = sorted({e for eps in eps_ladder for e in (eps, eps - _fd_step(eps), eps + _fd_step(eps))})
    sup_F = 0.0
    for delta in delta_list:
        for E in E_list:
            r = averaged_kernel(fam, E, delta, evals, quad)
            for eps in eps_ladder:
                h = _fd_step(eps)
                F = r.values[("g", eps)]
                dF = (r.values[("g", eps + h)] - r.values[("g", eps - h)]) / (2 * h)
                budget = r.error
                dbudget = r.error / h
                le = abs(math.log(eps))
                sup_F = max(sup_F, abs(F))
                rep.checks += [
                    BoundCheck("9", eps, delta, E, abs(F), n0 * p2 / (eps * c0), budget),
                    BoundCheck("10", eps, delta, E, abs(dF), n1 * p2 / (eps * c0), dbudget),
                    BoundCheck("11", eps, delta, E, abs(F), (n1 * le + n0) * p2 / c0, budget),
                    BoundCheck("12", eps, delta, E, abs(dF), (n2 * le + n1) * p2 / c0, dbudget),
                    BoundCheck("13", eps, delta, E, abs(F), (n0 + n1 + n2) * p2 / c0, budget),
                ]
    rep.info["sup_abs_F"] = sup_F
    rep.info["bound_13_rhs"] = (n0 + n1 + n2) * p2 / c0
    return rep


def verify_spectral_averaging(
    fam: WegnerFamily,
    E_list: Sequence[float] = (-2.0, 0.0, 2.0),
    delta_list: Sequence[float] = (0.5, 0.05, 0.005),
    quad: Quadrature = Quadrature(),
) -> WegnerReport:
    """``|int g <phi, B (H - E - i delta)^{-1} B phi>| <= c0^{-1}(|g|_1+|g'|_1+|g''|_1)|phi|^2``."""
    rhs = fam.bound_rhs
    rep = WegnerReport("spectral_averaging", info={"rhs": rhs, "values": []})
    for delta in delta_list:
        for E in E_list:
            r = averaged_kernel(fam, E, delta, [0.0], quad)
            # (H - E - i delta)^{-1} is the adjoint of the +i delta resolvent
            val = complex(r.values[("g", 0.0)]).conjugate()
            rep.info["values"].append([E, delta, val.real, val.imag])
            rep.checks.append(BoundCheck("5", 0.0, delta, E, abs(val), rhs, r.error))
    return rep


def derivative_crosscheck(
    fam: WegnerFamily, eps: float, delta: float, E: float, quad: Quadrature = Quadrature()
) -> dict:
    """Compare three routes to ``dF/deps``.

    Richardson-extrapolated central differences of F, the analytic
    ``-i int g <phi, B R Hdot R B phi>`` and ``-i Ftilde``. All share one mesh.
    """
    h = eps / 100.0
    evals = [eps - h, eps + h, eps - h / 2, eps + h / 2, eps]
    r = averaged_kernel(fam, E, delta, evals, quad, weights=("g", "g1"), with_derivative=True)
    v = r.values
    d1 = (v[("g", eps + h)] - v[("g", eps - h)]) / (2 * h)
    d2 = (v[("g", eps + h / 2)] - v[("g", eps - h / 2)]) / h
    fd = (4 * d2 - d1) / 3
    analytic = -1j * v[("dR", eps)]
    by_parts = -1j * v[("g1", eps)]
    return {"fd": complex(fd), "analytic": complex(analytic), "by_parts": complex(by_parts), "error": r.error}


def epsilon_convergence(
    fam: WegnerFamily,
    delta: float,
    E: float,
    eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
    quad: Quadrature = Quadrature(),
) -> list[tuple[float, float]]:
    """``(eps, |F(eps, delta) - F(0, delta)|)`` along the ladder."""
    evals = [0.0] + [float(e) for e in eps_ladder]
    r = averaged_kernel(fam, E, delta, evals, quad)
    F0 = r.values[("g", 0.0)]
    return [(e, float(abs(r.values[("g", float(e))] - F0))) for e in eps_ladder]


def scalar_selftest(quad: Quadrature = Quadrature()) -> WegnerReport:
    """All bound checks on the 1x1 family plus agreement of quadrature with the closed form."""
    fam = scalar_family()
    rep = WegnerReport("scalar_selftest")
    deltas = (1.0, 0.1, 0.01, 0.001)
    Es = (-1.0, 0.0, 0.5, 3.0)
    fb = verify_F_bounds(fam, DEFAULT_EPS_LADDER, deltas, Es, quad)
    sa = verify_spectral_averaging(fam, Es, deltas, quad)
    ap = verify_apriori_bound(fam, np.linspace(-4, 4, 41), 0.1, 0.05, 0.3)
    rep.checks += fb.checks + sa.checks + ap.checks
    worst = 0.0
    for delta in deltas:
        for E in Es:
            r = averaged_kernel(fam, E, delta, DEFAULT_EPS_LADDER, quad)
            for eps in DEFAULT_EPS_LADDER:
                exact = scalar_F_exact(E, delta, eps)
                gap = abs(r.values[("g", eps)] - exact)
                worst = max(worst, gap)
                rep.checks.append(BoundCheck("closed_form", eps, delta, E, gap, 0.0, max(r.error, 1e-12)))
    rep.info.update(
        {
            "max_closed_form_gap": worst,
            "sup_abs_F": fb.info["sup_abs_F"],
            "bound_13_rhs": fb.info["bound_13_rhs"],
            "slack_rtol": BOUND_RTOL,
        }
    )
    return rep
