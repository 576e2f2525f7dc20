"""Survival probability after a quench H0 -> H0 + lambda V(k).

Initial states are H0 eigenstates, i.e. Fock basis states, picked near the
center of each member's spectrum. Energies and times are in normalized
units (member centroid 0, member variance 1).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analytics import bessel_survival, gaussian_survival, sigma0_sq
from .ensemble import member_hamiltonian
from .fock import sp_energies
from .spectral import (
    DensityHistogram,
    Spectrum,
    SolverError,
    eigendecompose,
    map_members,
    normalize_spectrum,
)

log = logging.getLogger(__name__)


@dataclass
class InitialStateSelection:
    member: int
    indices: np.ndarray
    energies: np.ndarray
    fallback: bool = False


def select_initial_states(
    spectrum: Spectrum, H_diag, delta: float, member: int = 0
) -> InitialStateSelection:
    """Basis states with |(H_ii - centroid) / sigma| <= delta / 2.

    When the window is empty the single closest state is returned and the
    selection is flagged as a fallback.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    e = (np.asarray(H_diag, dtype=float) - spectrum.centroid) / spectrum.sigma
    idx = np.flatnonzero(np.abs(e) <= delta / 2)
    fallback = idx.size == 0
    if fallback:
        idx = np.array([int(np.argmin(np.abs(e)))])
    return InitialStateSelection(member, idx, e[idx], fallback)


def overlaps(spectrum: Spectrum, basis_index: int) -> np.ndarray:
    """|<E|i>|^2 for every eigenstate E."""
    if spectrum.eigenvectors is None:
        raise ValueError("spectrum carries no eigenvectors")
    return spectrum.eigenvectors[basis_index, :] ** 2


def survival_curve(row, energies, times) -> np.ndarray:
    """F(t) = |sum_E p_E exp(-i E t)|^2 / (sum p)^2.

    Row sums and the norm share numpy's pairwise reduction, so the t = 0
    row reproduces the norm bit for bit and F(0) == 1 exactly. Roundoff
    above 1 is clipped.
    """
    p = np.asarray(row, dtype=float)
    E = np.asarray(energies, dtype=float)
    t = np.asarray(times, dtype=float)
    phase = np.outer(t, E)
    re = (np.cos(phase) * p).sum(axis=1)
    im = (np.sin(phase) * p).sum(axis=1)
    norm = p.sum()
    return np.minimum((re * re + im * im) / (norm * norm), 1.0)


@dataclass
class SurvivalCurve:
    times: np.ndarray
    F_numeric: np.ndarray
    F_sem: np.ndarray
    F_gauss: np.ndarray
    F_bessel: np.ndarray
    sigma0_sq: float
    sigma0_sq_numeric: float
    pairs: int
    fallbacks: int
    strength: DensityHistogram
    failures: list = field(default_factory=list)

    def max_deviation(self, law: str, t_max: float | None = None) -> float:
        """max |F_numeric - F_law| over t <= t_max (default 1/sigma0)."""
        if t_max is None:
            t_max = 1.0 / math.sqrt(self.sigma0_sq)
        ref = {"gauss": self.F_gauss, "bessel": self.F_bessel}[law]
        sel = self.times <= t_max
        return float(np.max(np.abs(self.F_numeric[sel] - ref[sel])))


def default_times(tmax: float = 4.0, nt: int = 400) -> np.ndarray:
    return np.linspace(0.0, tmax, nt)


def _member_pairs(config, i, delta, times, eps, strength_edges):
    H = member_hamiltonian(config, i, eps)
    spec = eigendecompose(H)
    En = normalize_spectrum(spec)
    sel = select_initial_states(spec, np.diag(H), delta, member=i)
    curves, variances = [], []
    strength = np.zeros(len(strength_edges) + 1)
    for j in sel.indices:
        p = overlaps(spec, j)
        curves.append(survival_curve(p, En, times))
        mean = p @ En
        variances.append(float(p @ (En - mean) ** 2))
        strength[1:-1] += np.histogram(En, bins=strength_edges, weights=p)[0]
        strength[0] += p[En < strength_edges[0]].sum()
        strength[-1] += p[En > strength_edges[-1]].sum()
    return np.array(curves), variances, strength, sel.fallback


def averaged_survival(
    config,
    delta: float = 0.01,
    times=None,
    eps=None,
    threads: int = 1,
    strength_bins: int = 50,
    strength_range: tuple[float, float] = (-3.5, 3.5),
) -> SurvivalCurve:
    """Equal-weight average of F(t) over all (member, initial state) pairs.

    Comparison laws use the analytic sigma0^2 (sigma_H0^2 is dropped in
    pure-interaction mode); the mean measured strength-function variance is
    reported alongside as ``sigma0_sq_numeric``.
    """
    p = config.params
    times = default_times() if times is None else np.asarray(times, dtype=float)
    if eps is None:
        eps = sp_energies(p.N)
    strength = DensityHistogram.uniform(strength_bins, *strength_range)
    edges = strength.edges
    weights = np.zeros(len(edges) + 1)

    results = map_members(
        lambda i: _member_pairs(config, i, delta, times, eps, edges),
        range(config.members),
        threads,
    )

    total = np.zeros_like(times)
    total_sq = np.zeros_like(times)
    variances = []
    failures = []
    pairs = fallbacks = 0
    for i, res, exc in results:
        if exc is not None:
            failures.append({"member": i, "error": str(exc)})
            continue
        curves, var, w, fb = res
        # fixed member order keeps the reduction reproducible across thread counts
        for c in curves:
            total += c
            total_sq += c * c
        pairs += len(curves)
        fallbacks += int(fb)
        variances.extend(var)
        weights += w
        strength.members += 1
    if pairs == 0:
        raise SolverError("no (member, initial state) pairs survived")
    if fallbacks:
        log.info("%d of %d members used the nearest-state fallback", fallbacks, config.members)

    mean = total / pairs
    if pairs > 1:
        var = np.clip(total_sq / pairs - mean**2, 0.0, None) * pairs / (pairs - 1)
        sem = np.sqrt(var / pairs)
    else:
        sem = np.zeros_like(mean)
    # strength histogram holds the average overlap weight per pair, so it sums to 1
    strength.counts = weights[1:-1] / pairs
    strength.underflow = weights[0] / pairs
    strength.overflow = weights[-1] / pairs

    if p.lam == 0:
        s0 = 0.0
        F_bessel = np.ones_like(times)
    else:
        s0 = sigma0_sq(p, None if config.pure_interaction else eps)
        F_bessel = bessel_survival(times, s0)
    return SurvivalCurve(
        times=times,
        F_numeric=mean,
        F_sem=sem,
        F_gauss=gaussian_survival(times, s0),
        F_bessel=F_bessel,
        sigma0_sq=s0,
        sigma0_sq_numeric=float(np.mean(variances)),
        pairs=pairs,
        fallbacks=fallbacks,
        strength=strength,
        failures=failures,
    )
