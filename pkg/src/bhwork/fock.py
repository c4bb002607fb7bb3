"""Fock basis enumeration and the Bose-Hubbard Hamiltonian in sparse form.

States are occupation tuples ``(n_1, ..., n_L)`` with fixed total ``N``.
The basis is ordered lexicographically *descending*, so for two sites it
runs ``(N, 0), (N-1, 1), ..., (0, N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ResourceLimitError

DEFAULT_MAX_BASIS = 2_000_000
DEFAULT_MAX_DENSE = 5000

FockState = tuple


@dataclass(frozen=True)
class ModelParams:
    """Lattice size, particle number, interaction and boundary condition.

    ``boundary=None`` picks the convention used in the experiments: a single
    open bond for two sites, a ring for three or more.
    """

    L: int
    N: int
    U: float
    hbar: float = 1.0
    boundary: str | None = None

    def __post_init__(self):
        if self.L < 1 or self.N < 1:
            raise ConfigError(f"need L >= 1 and N >= 1, got L={self.L}, N={self.N}")
        if self.hbar <= 0:
            raise ConfigError("hbar must be positive")
        if self.boundary is None:
            object.__setattr__(self, "boundary", "open" if self.L <= 2 else "periodic")
        if self.boundary not in ("open", "periodic"):
            raise ConfigError(f"unknown boundary {self.boundary!r}")

    @classmethod
    def paper(cls, L: int, N: int, **kw) -> "ModelParams":
        """Parameters with the ``U = 5/N`` rule."""
        return cls(L=L, N=N, U=5.0 / N, **kw)

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour bonds ``(j, j+1)``; the wrap bond only for rings of L >= 3."""
        out = [(j, j + 1) for j in range(self.L - 1)]
        if self.boundary == "periodic" and self.L >= 3:
            out.append((self.L - 1, 0))
        return out

    def neighbours(self) -> np.ndarray:
        """``(L, 2)`` neighbour table, ``-1`` where a site has fewer than two bonds."""
        nbr = -np.ones((self.L, 2), dtype=np.int64)
        fill = np.zeros(self.L, dtype=np.int64)
        for a, b in self.bonds():
            nbr[a, fill[a]] = b
            fill[a] += 1
            nbr[b, fill[b]] = a
            fill[b] += 1
        return nbr


def basis_size(L: int, N: int) -> int:
    return math.comb(N + L - 1, N)


def _enumerate(L: int, N: int) -> np.ndarray:
    dim = basis_size(L, N)
    out = np.zeros((dim, L), dtype=np.int64)
    row = 0
    # iterative depth-first walk, first site counting down
    stack = [(0, N, [])]
    while stack:
        site, left, prefix = stack.pop()
        if site == L - 1:
            out[row, :-1] = prefix
            out[row, -1] = left
            row += 1
            continue
        # push ascending so the largest occupation pops first
        for n in range(0, left + 1):
            stack.append((site + 1, left - n, prefix + [n]))
    return out


@dataclass(frozen=True)
class FockBasis:
    params: ModelParams
    states: np.ndarray
    index_of: dict = field(repr=False, compare=False)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def index(self, occupations: Sequence[int]) -> int:
        key = tuple(int(n) for n in occupations)
        try:
            return self.index_of[key]
        except KeyError:
            raise ConfigError(f"{key} is not a state of the N={self.params.N}, "
                              f"L={self.params.L} basis") from None

    def state(self, k: int) -> FockState:
        return tuple(int(n) for n in self.states[k])

    def basis_vector(self, occupations: Sequence[int]) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.complex128)
        v[self.index(occupations)] = 1.0
        return v

    def paper_order(self) -> np.ndarray:
        """Basis indices in ascending lexicographic order (reverse of storage order)."""
        return np.arange(self.dim)[::-1]


def build_basis(params: ModelParams, max_dim: int = DEFAULT_MAX_BASIS) -> FockBasis:
    dim = basis_size(params.L, params.N)
    if dim > max_dim:
        raise ResourceLimitError(f"basis dimension {dim} exceeds cap {max_dim}")
    states = _enumerate(params.L, params.N)
    states.setflags(write=False)
    index_of = {tuple(int(n) for n in s): k for k, s in enumerate(states)}
    return FockBasis(params=params, states=states, index_of=index_of)


def interaction_energies(states: np.ndarray, U: float) -> np.ndarray:
    """``U/2 * sum_j n_j (n_j - 1)`` for each row of ``states``."""
    n = np.asarray(states, dtype=np.float64)
    return 0.5 * U * np.sum(n * (n - 1.0), axis=-1)


@dataclass(frozen=True)
class SparseHamiltonian:
    """``H(J) = diag(diagonal) - J * hopping``.

    ``hopping`` is the real symmetric CSR matrix of the kinetic operator
    ``sum_bonds (a_j^dag a_k + h.c.)``.
    """

    basis: FockBasis
    diagonal: np.ndarray
    hopping: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.diagonal.shape[0]

    @property
    def hopping_terms(self) -> list[tuple[int, int, float]]:
        coo = self.hopping.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def dense(self, J: float) -> np.ndarray:
        return np.diag(self.diagonal) - J * self.hopping.toarray()


def build_hamiltonian(basis: FockBasis) -> SparseHamiltonian:
    params = basis.params
    states = basis.states
    diag = interaction_energies(states, params.U)
    rows, cols, vals = [], [], []
    for col, occ in enumerate(states):
        for a, b in params.bonds():
            for src, dst in ((a, b), (b, a)):
                if occ[src] == 0:
                    continue
                new = list(occ)
                amp = math.sqrt(new[src] * (new[dst] + 1))
                new[src] -= 1
                new[dst] += 1
                rows.append(basis.index_of[tuple(int(n) for n in new)])
                cols.append(col)
                vals.append(amp)
    dim = basis.dim
    hop = sp.csr_matrix((np.asarray(vals, dtype=np.float64), (rows, cols)), shape=(dim, dim))
    hop.sum_duplicates()
    hop.sort_indices()
    diag.setflags(write=False)
    return SparseHamiltonian(basis=basis, diagonal=diag, hopping=hop)


def apply_hamiltonian(h: SparseHamiltonian, J: float, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != h.dim:
        raise ValueError(f"vector length {v.shape[0]} != basis size {h.dim}")
    if v.ndim == 1:
        return h.diagonal * v - J * (h.hopping @ v)
    return h.diagonal[:, None] * v - J * (h.hopping @ v)


def dense_spectrum(h: SparseHamiltonian, J: float, eigenvectors: bool = False,
                   max_dim: int = DEFAULT_MAX_DENSE):
    """Sorted eigenvalues of ``H(J)`` (and eigenvectors as columns if asked)."""
    if h.dim > max_dim:
        raise ResourceLimitError(f"dense diagonalization of dim {h.dim} exceeds cap {max_dim}")
    mat = h.dense(J)
    if eigenvectors:
        return np.linalg.eigh(mat)
    return np.linalg.eigvalsh(mat)


def spectrum_sweep(h: SparseHamiltonian, J_values: Iterable[float],
                   max_dim: int = DEFAULT_MAX_DENSE) -> np.ndarray:
    """Eigenvalues for each ``J``, shape ``(len(J_values), dim)``."""
    return np.array([dense_spectrum(h, J, max_dim=max_dim) for J in J_values])
