"""Closed-form ensemble quantities for EGOE(k) and EGOE(1+k).

Everything here is a pure function of (N, m, k, lambda) and the
single-particle energies; nothing samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class SystemParams:
    """Ensemble parameters: N levels, m fermions, k-body rank, quench strength."""

    N: int
    m: int
    k: int
    lam: float = 1.0

    def __post_init__(self):
        if not (1 <= self.k <= self.m <= self.N):
            raise ValueError(
                f"need 1 <= k <= m <= N, got N={self.N}, m={self.m}, k={self.k}"
            )
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    @property
    def dim(self) -> int:
        return math.comb(self.N, self.m)


@dataclass(frozen=True)
class MomentSet:
    m2: float
    m4: float
    gamma1: float
    gamma2: float


def binom(n: int, r: int) -> float:
    """Binomial coefficient C(n, r) as a float, 0 outside 0 <= r <= n."""
    if r < 0 or n < 0 or r > n:
        return 0.0
    exact = math.comb(n, r)
    if exact <= _INT64_MAX:
        return float(exact)
    return math.exp(math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1))


def variance_V(p: SystemParams) -> float:
    """Ensemble-averaged <V^2(k)>^m including the lambda^2 scale."""
    N, m, k = p.N, p.m, p.k
    return p.lam**2 * binom(m, k) * (binom(N - m + k, k) + 1.0)


def _fourth_moment_sum_term(N: int, m: int, k: int, s: int) -> float:
    numer = (
        binom(m - s, k - s) ** 2
        * binom(N - m + k - s, k)
        * binom(m - s, k)
        * binom(N - m, s)
        * binom(m, s)
        * binom(N + 1, s)
    )
    if numer == 0.0:
        return 0.0
    return numer * (N - 2 * s + 1) / (N - s + 1) / binom(N - s, k) / binom(k, s)


def fourth_moment_V(p: SystemParams) -> float:
    """Ensemble-averaged <V^4(k)>^m (binary-correlation form with finite-N terms)."""
    N, m, k = p.N, p.m, p.k
    lead = 2.0 * binom(m, k) ** 2 * (binom(N - m + k, k) + 1.0) ** 2
    corr = sum(_fourth_moment_sum_term(N, m, k, s) for s in range(k + 1))
    return p.lam**4 * (lead + corr)


def gamma2_finite(p: SystemParams) -> float:
    """Excess kurtosis m4/m2^2 - 3 from the finite-N second and fourth moments.

    The ratio is lambda independent; lambda = 0 leaves it undefined.
    """
    if p.lam == 0:
        raise ValueError("gamma2 is undefined for lambda = 0")
    unit = SystemParams(p.N, p.m, p.k, 1.0)
    return fourth_moment_V(unit) / variance_V(unit) ** 2 - 3.0


def gamma2_asymptotic(k: int, m: int) -> float:
    """Leading dilute-limit kurtosis, -k^2/m."""
    if m <= 0:
        raise ValueError("m must be positive")
    return -(k**2) / m


def moment_set(p: SystemParams) -> MomentSet:
    """Analytic moments of V(k); the ensemble density is symmetric so gamma1 = 0."""
    return MomentSet(
        m2=variance_V(p),
        m4=fourth_moment_V(p),
        gamma1=0.0,
        gamma2=gamma2_finite(p) if p.lam > 0 else float("nan"),
    )


def variance_H0(N: int, m: int, eps) -> float:
    """Variance of the C(N, m) configuration energies of H0 = sum_i eps_i n_i.

    Uses the sampling-without-replacement identity
    var = m (N - m) / (N (N - 1)) * sum_i (eps_i - mean(eps))^2.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (N,):
        raise ValueError(f"expected {N} single-particle energies, got {eps.shape}")
    if N < 2 or m in (0, N):
        return 0.0
    spread = float(np.sum((eps - eps.mean()) ** 2))
    return m * (N - m) / (N * (N - 1)) * spread


def sigma0_sq(p: SystemParams, eps=None) -> float:
    """Initial-state variance sigma_V^2 / (sigma_H0^2 + sigma_V^2) in normalized units.

    ``eps=None`` means no mean-field part (pure interaction).
    """
    s2v = variance_V(p)
    s2h0 = 0.0 if eps is None else variance_H0(p.N, p.m, eps)
    total = s2h0 + s2v
    if total == 0.0:
        raise ValueError("sigma_H^2 = 0: H0 is constant and lambda = 0")
    return s2v / total


def hermite_He(n: int, x):
    """Probabilists' Hermite polynomial He_n for n in {3, 4, 6}."""
    x = np.asarray(x, dtype=float)
    if n == 3:
        out = x**3 - 3 * x
    elif n == 4:
        out = x**4 - 6 * x**2 + 3
    elif n == 6:
        out = x**6 - 15 * x**4 + 45 * x**2 - 15
    else:
        raise ValueError(f"He_{n} not supported (only 3, 4, 6)")
    return out if out.ndim else float(out)


def ed_gaussian_density(E, gamma1: float = 0.0, gamma2: float = 0.0):
    """Edgeworth-corrected unit Gaussian; not clipped, so tails may dip below 0."""
    E = np.asarray(E, dtype=float)
    base = np.exp(-0.5 * E**2) / math.sqrt(2 * math.pi)
    corr = (
        1.0
        + gamma1 / 6.0 * hermite_He(3, E)
        + gamma2 / 24.0 * hermite_He(4, E)
        + gamma1**2 / 72.0 * hermite_He(6, E)
    )
    out = base * corr
    return out if out.ndim else float(out)


def semicircle_density(E):
    """Unit-variance semicircle sqrt(4 - E^2) / (2 pi) on [-2, 2]."""
    E = np.asarray(E, dtype=float)
    out = np.sqrt(np.clip(4.0 - E**2, 0.0, None)) / (2 * math.pi)
    return out if out.ndim else float(out)


def gaussian_survival(t, sigma0_sq: float):
    t = np.asarray(t, dtype=float)
    out = np.exp(-sigma0_sq * t**2)
    return out if out.ndim else float(out)


def bessel_j1(x):
    """Bessel function of the first kind, order one (odd in x)."""
    out = special.j1(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


_SERIES_CUTOFF = 1e-4


def bessel_survival(t, sigma0_sq: float):
    """Semicircle strength-function decay [J1(2 s t)]^2 / (s t)^2, s = sqrt(sigma0_sq).

    Below 2 s t = 1e-4 the removable singularity is handled with the series
    J1(x) / (x / 2) = 1 - x^2 / 8 + x^4 / 192.
    """
    if sigma0_sq <= 0:
        raise ValueError("sigma0_sq must be positive for the Bessel law")
    t = np.asarray(t, dtype=float)
    x = 2.0 * math.sqrt(sigma0_sq) * t
    small = np.abs(x) < _SERIES_CUTOFF
    ratio = np.empty_like(x)
    xs = x[small]
    ratio[small] = 1.0 - xs**2 / 8.0 + xs**4 / 192.0
    xl = x[~small]
    ratio[~small] = 2.0 * special.j1(xl) / xl
    out = ratio**2
    return out if out.ndim else float(out)
