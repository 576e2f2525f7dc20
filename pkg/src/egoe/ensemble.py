"""Random k-body coefficients, member random streams, and H = H0 + lambda V(k).

Reproducibility scheme
----------------------
Member ``i`` of a run with ``base_seed`` draws from
``numpy.random.Generator(PCG64(SeedSequence(base_seed, spawn_key=(i,))))``.
``SeedSequence`` hashes the (seed, index) pair into the PCG64 state, so
members are independent of each other and of the order in which they are
generated. Gaussian variates come from ``Generator.standard_normal``
(NumPy's ziggurat transform).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytics import SystemParams, binom
from .fock import build_H0_matrix, build_V_matrix, sp_energies


@dataclass(frozen=True)
class EnsembleConfig:
    params: SystemParams
    members: int = 1000
    base_seed: int = 20170101
    pure_interaction: bool = False

    def __post_init__(self):
        if self.members < 1:
            raise ValueError("members must be >= 1")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")


def member_stream(base_seed: int, member_index: int) -> np.random.Generator:
    """Independent, order-free random stream for one ensemble member."""
    if member_index < 0:
        raise ValueError("member_index must be >= 0")
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(member_index,))
    return np.random.Generator(np.random.PCG64(seq))


def draw_coefficients(N: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """GOE over the C(N, k) k-particle subsets with v = 1.

    Off-diagonal entries are N(0, 1), diagonal entries N(0, 2). Variates are
    consumed in row-major order over the upper triangle, diagonal included.
    """
    D = int(binom(N, k))
    iu = np.triu_indices(D)
    z = rng.standard_normal(len(iu[0]))
    z[iu[0] == iu[1]] *= np.sqrt(2.0)
    v = np.zeros((D, D))
    v[iu] = z
    v = v + v.T
    v[np.diag_indices(D)] *= 0.5
    return v


def assemble_H(H0: np.ndarray, V: np.ndarray, lam: float) -> np.ndarray:
    """Quenched Hamiltonian H0 + lambda V."""
    if H0.shape != V.shape:
        raise ValueError(f"shape mismatch: H0 {H0.shape} vs V {V.shape}")
    return H0 + lam * V


def member_V(params: SystemParams, base_seed: int, index: int) -> np.ndarray:
    """Unscaled V(k) of ensemble member ``index``."""
    rng = member_stream(base_seed, index)
    coeffs = draw_coefficients(params.N, params.k, rng)
    return build_V_matrix(params.N, params.m, params.k, coeffs)


def member_hamiltonian(config: EnsembleConfig, index: int, eps=None) -> np.ndarray:
    """H = H0 + lambda V(k) for one member, or lambda V(k) in pure-interaction mode."""
    p = config.params
    V = member_V(p, config.base_seed, index)
    if config.pure_interaction:
        return p.lam * V
    if eps is None:
        eps = sp_energies(p.N)
    return assemble_H(build_H0_matrix(p.N, p.m, eps), V, p.lam)
