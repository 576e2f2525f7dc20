"""Eigendecomposition, per-member normalization, pooled densities and moments."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytics import ed_gaussian_density, semicircle_density

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The dense eigensolver failed for one ensemble member."""


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    centroid: float
    sigma: float

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


def eigendecompose(H: np.ndarray, vectors: bool = True) -> Spectrum:
    """Full spectrum of a real symmetric matrix, eigenvalues ascending.

    Centroid and sigma use the population (1/d) convention.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    try:
        if vectors:
            E, U = np.linalg.eigh(H)
        else:
            E, U = np.linalg.eigvalsh(H), None
    except np.linalg.LinAlgError as exc:
        raise SolverError(str(exc)) from exc
    if not np.all(np.isfinite(E)):
        raise SolverError("non-finite eigenvalues")
    return Spectrum(E, U, float(E.mean()), float(E.std()))


def normalize_spectrum(s: Spectrum) -> np.ndarray:
    """(E - centroid) / sigma with the member's own centroid and sigma."""
    if s.dim < 2:
        raise ValueError("need at least two eigenvalues to normalize")
    if s.sigma == 0.0:
        raise ValueError("degenerate spectrum: sigma = 0")
    return (s.eigenvalues - s.centroid) / s.sigma


@dataclass
class DensityHistogram:
    """Accumulating histogram of normalized energies with explicit overflow tallies."""

    edges: np.ndarray
    counts: np.ndarray = field(default=None)
    underflow: int = 0
    overflow: int = 0
    members: int = 0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        if self.counts is None:
            self.counts = np.zeros(len(self.edges) - 1, dtype=np.int64)

    @classmethod
    def uniform(cls, bins: int = 50, lo: float = -3.5, hi: float = 3.5):
        return cls(np.linspace(lo, hi, bins + 1))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def merge(self, other: DensityHistogram) -> DensityHistogram:
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different bin edges")
        return DensityHistogram(
            self.edges,
            self.counts + other.counts,
            self.underflow + other.underflow,
            self.overflow + other.overflow,
            self.members + other.members,
        )

    def density(self, mode: str = "unit", dim: int | None = None) -> np.ndarray:
        """Finalized density; out-of-range counts stay in the denominator.

        ``unit`` integrates to 1 minus the overflow fraction, ``dim`` to
        ``dim`` times that.
        """
        if self.total == 0:
            return np.zeros_like(self.widths)
        rho = self.counts / (self.total * self.widths)
        if mode == "unit":
            return rho
        if mode == "dim":
            if dim is None:
                raise ValueError("dimension normalization needs dim")
            return rho * dim
        raise ValueError(f"unknown normalization mode {mode!r}")


def accumulate_density(h: DensityHistogram, energies) -> DensityHistogram:
    """Add one member's normalized energies to ``h`` in place and return it."""
    x = np.asarray(energies, dtype=float)
    under = int(np.count_nonzero(x < h.edges[0]))
    over = int(np.count_nonzero(x > h.edges[-1]))
    counts, _ = np.histogram(x, bins=h.edges)
    h.counts += counts
    h.underflow += under
    h.overflow += over
    h.members += 1
    return h


@dataclass(frozen=True)
class SampleMoments:
    variance: float
    gamma1: float
    gamma2: float
    count: int


def sample_moments(x) -> SampleMoments:
    """Population variance, skewness and excess kurtosis of a pooled sample."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 100:
        raise ValueError(f"need at least 100 values, got {x.size}")
    c = x - x.mean()
    m2 = np.mean(c**2)
    m3 = np.mean(c**3)
    m4 = np.mean(c**4)
    return SampleMoments(float(m2), float(m3 / m2**1.5), float(m4 / m2**2 - 3.0), x.size)


def chi2_distance(observed, expected) -> float:
    """Symmetric chi-square sum (o - e)^2 / (o + e) over bins where o + e > 0."""
    o = np.asarray(observed, dtype=float)
    e = np.asarray(expected, dtype=float)
    s = o + e
    ok = s > 0
    return float(np.sum((o[ok] - e[ok]) ** 2 / s[ok]))


def model_columns(centers, gamma1: float, gamma2: float):
    """ED-Gaussian and semicircle comparison densities at the bin centers."""
    return ed_gaussian_density(centers, gamma1, gamma2), semicircle_density(centers)


def map_members(fn, indices, threads: int = 1):
    """Run ``fn(i)`` for each index; results come back in index order.

    Exceptions are captured per member as ``(i, exc)`` so callers can decide
    on failure thresholds without losing the other members.
    """

    def safe(i):
        try:
            return i, fn(i), None
        except SolverError as exc:
            log.warning("member %d: eigensolver failed: %s", i, exc)
            return i, None, exc

    if threads <= 1:
        return [safe(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(safe, indices))


@dataclass
class DensityResult:
    histogram: DensityHistogram
    moments: SampleMoments
    failures: list = field(default_factory=list)
    trace_v2: np.ndarray | None = None
    member_gamma2: np.ndarray | None = None


def ensemble_density(
    config,
    bins: int = 50,
    lo: float = -3.5,
    hi: float = 3.5,
    threads: int = 1,
    eps=None,
) -> DensityResult:
    """Pool per-member normalized eigenvalues of an ensemble into a histogram.

    Also records (1/d) tr H^2 for each member, which for pure-interaction
    runs is the Monte Carlo estimate of the ensemble variance.
    """
    from .ensemble import member_hamiltonian

    def one(i):
        H = member_hamiltonian(config, i, eps)
        tr2 = float(np.sum(H * H)) / H.shape[0]
        x = normalize_spectrum(eigendecompose(H, vectors=False))
        return x, tr2

    results = map_members(one, range(config.members), threads)
    hist = DensityHistogram.uniform(bins, lo, hi)
    pooled, tr2, g2, failures = [], [], [], []
    for i, res, exc in results:
        if exc is not None:
            failures.append({"member": i, "error": str(exc)})
            continue
        x, t = res
        accumulate_density(hist, x)
        pooled.append(x)
        tr2.append(t)
        g2.append(np.mean(x**4) - 3.0)
    if not pooled:
        raise SolverError("every ensemble member failed")
    return DensityResult(
        histogram=hist,
        moments=sample_moments(np.concatenate(pooled)),
        failures=failures,
        trace_v2=np.array(tr2),
        member_gamma2=np.array(g2),
    )
