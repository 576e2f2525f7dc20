"""Spinless-fermion Fock space on N levels and k-body operators in it.

Basis states are plain ``int`` bitmasks: level i (1-based) lives in bit
i - 1. Level subsets used as operator labels are bitmasks too.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

MAX_LEVELS = 63


def mask_of(levels) -> int:
    """Bitmask for an iterable of 1-based levels."""
    out = 0
    for lv in levels:
        out |= 1 << (lv - 1)
    return out


def levels_of(mask: int) -> list[int]:
    """Ascending 1-based levels set in ``mask``."""
    out = []
    lv = 1
    while mask:
        if mask & 1:
            out.append(lv)
        mask >>= 1
        lv += 1
    return out


def popcount(x: int) -> int:
    return bin(x).count("1")


def enumerate_basis(N: int, m: int) -> np.ndarray:
    """All C(N, m) configurations as int64 masks in increasing mask order."""
    if not 0 <= N <= MAX_LEVELS:
        raise ValueError(f"N must be in [0, {MAX_LEVELS}], got {N}")
    if not 0 <= m <= N:
        raise ValueError(f"need 0 <= m <= N, got m={m}, N={N}")
    masks = sorted(sum(1 << i for i in c) for c in combinations(range(N), m))
    return np.array(masks, dtype=np.int64)


def subset_index(N: int, k: int) -> dict[int, int]:
    """Map each k-subset mask to its rank in increasing mask order."""
    return {int(s): r for r, s in enumerate(enumerate_basis(N, k))}


def _sign_below(state: int, level: int) -> int:
    return -1 if popcount(state & ((1 << (level - 1)) - 1)) & 1 else 1


def annihilate_subset(state: int, subset: int):
    """Apply beta(k) = (a+_{l1} ... a+_{lk})^dagger, l1 < ... < lk.

    Single annihilators act in ascending level order. Returns
    ``(new_state, phase)`` or ``None`` when a level of ``subset`` is empty.
    """
    if state & subset != subset:
        return None
    phase = 1
    for lv in levels_of(subset):
        phase *= _sign_below(state, lv)
        state ^= 1 << (lv - 1)
    return state, phase


def create_subset(state: int, subset: int):
    """Apply alpha+(k) = a+_{l1} ... a+_{lk}, l1 < ... < lk (rightmost first).

    Returns ``(new_state, phase)`` or ``None`` on a Pauli-blocked level.
    """
    if state & subset:
        return None
    phase = 1
    for lv in reversed(levels_of(subset)):
        phase *= _sign_below(state, lv)
        state |= 1 << (lv - 1)
    return state, phase


@dataclass(frozen=True)
class KBodyStructure:
    """Sparse recipe for V(k) in the m-particle basis, upper triangle only.

    Entry n contributes ``phase[n] * v[alpha[n], beta[n]]`` to
    ``V[row[n], col[n]]`` with ``row[n] <= col[n]``.
    """

    N: int
    m: int
    k: int
    dim: int
    n_sub: int
    row: np.ndarray
    col: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    phase: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        return self.row * self.dim + self.col


@lru_cache(maxsize=32)
def kbody_structure(N: int, m: int, k: int) -> KBodyStructure:
    """Enumerate every (I, J, alpha, beta) with <I| alpha+ beta |J> != 0, I <= J."""
    if not 1 <= k <= m <= N:
        raise ValueError(f"need 1 <= k <= m <= N, got N={N}, m={m}, k={k}")
    basis = enumerate_basis(N, m)
    state_rank = {int(s): i for i, s in enumerate(basis)}
    sub_rank = subset_index(N, k)
    full = (1 << N) - 1

    rows, cols, alphas, betas, phases = [], [], [], [], []
    for j, sj in enumerate(basis.tolist()):
        for bl in combinations(levels_of(sj), k):
            beta = mask_of(bl)
            rest, ph_b = annihilate_subset(sj, beta)
            for al in combinations(levels_of(full & ~rest), k):
                alpha = mask_of(al)
                si, ph_a = create_subset(rest, alpha)
                i = state_rank[si]
                if i > j:
                    continue
                rows.append(i)
                cols.append(j)
                alphas.append(sub_rank[alpha])
                betas.append(sub_rank[beta])
                phases.append(ph_a * ph_b)

    return KBodyStructure(
        N=N,
        m=m,
        k=k,
        dim=len(basis),
        n_sub=len(sub_rank),
        row=np.array(rows, dtype=np.int64),
        col=np.array(cols, dtype=np.int64),
        alpha=np.array(alphas, dtype=np.int64),
        beta=np.array(betas, dtype=np.int64),
        phase=np.array(phases, dtype=np.float64),
    )


def build_V_matrix(N: int, m: int, k: int, coeffs: np.ndarray) -> np.ndarray:
    """Dense many-body matrix of V(k) = sum v[a, b] alpha+ beta for given coefficients."""
    st = kbody_structure(N, m, k)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (st.n_sub, st.n_sub):
        raise ValueError(
            f"coefficient matrix must be {st.n_sub}x{st.n_sub} for N={N}, k={k}, "
            f"got {coeffs.shape}"
        )
    vals = st.phase * coeffs[st.alpha, st.beta]
    d = st.dim
    upper = np.bincount(st.flat, weights=vals, minlength=d * d).reshape(d, d)
    V = upper + upper.T
    np.fill_diagonal(V, np.diag(upper))
    return V


def sp_energies(N: int) -> np.ndarray:
    """Non-degenerate single-particle energies eps_i = i + 1/i, i = 1..N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    i = np.arange(1, N + 1, dtype=float)
    return i + 1.0 / i


def configuration_energies(N: int, m: int, eps) -> np.ndarray:
    """sum_{i in s} eps_i for every basis state s."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (N,):
        raise ValueError(f"expected {N} single-particle energies, got {eps.shape}")
    basis = enumerate_basis(N, m)
    bits = (basis[:, None] >> np.arange(N)) & 1
    return bits @ eps


def build_H0_matrix(N: int, m: int, eps) -> np.ndarray:
    """Diagonal mean-field Hamiltonian H0 = sum_i eps_i n_i."""
    return np.diag(configuration_energies(N, m, eps))


_DUMP_MAGIC = b"EGOEMAT1"


def dump_matrix(path, H: np.ndarray, N: int, m: int, k: int) -> None:
    """Debug dump: 8-byte magic, int64 N, m, k, dim, then row-major float64."""
    H = np.ascontiguousarray(H, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<4q", N, m, k, H.shape[0]))
        fh.write(H.tobytes())


def load_matrix(path):
    """Inverse of :func:`dump_matrix`; returns ``(H, (N, m, k))``."""
    with open(path, "rb") as fh:
        if fh.read(8) != _DUMP_MAGIC:
            raise ValueError(f"{path}: not an EGOE matrix dump")
        N, m, k, dim = struct.unpack("<4q", fh.read(32))
        H = np.frombuffer(fh.read(8 * dim * dim), dtype="<f8").reshape(dim, dim)
    if dim != math.comb(N, m):
        raise ValueError(f"{path}: header dim {dim} != C({N},{m})")
    return H.copy(), (N, m, k)
