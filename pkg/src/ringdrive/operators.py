"""Sparse Hermitian operators on ring-lattice bases.

Hamiltonians are assembled bond by bond with both hopping directions written
explicitly, then symmetrized with `(M + M^dag)/2`, which is exact in floating
point for matrices that are already Hermitian up to conjugate pairing.  All
energies are measured in units of the hopping scale (J for the occupation
model, J_E for the phase model) and hbar = 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .basis import ChargeBasis, FockBasis
from .errors import BasisMismatchError

DENSE_DIM_LIMIT = 2000


@dataclass
class HermitianOperator:
    """A Hermitian matrix stored in CSR form, tagged with its basis."""

    matrix: sp.csr_matrix
    basis: FockBasis | ChargeBasis | None = None

    def __post_init__(self):
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"matrix must be square, got {self.matrix.shape}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def basis_key(self) -> tuple | None:
        return None if self.basis is None else self.basis.key

    def entries(self) -> Iterator[tuple[int, int, complex]]:
        """Iterate stored (row, col, value) triplets."""
        coo = self.matrix.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            yield int(r), int(c), complex(v)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def max_abs(self) -> float:
        data = self.matrix.data
        return float(np.max(np.abs(data))) if data.size else 0.0

    def is_real(self) -> bool:
        return not np.iscomplexobj(self.matrix.data) or bool(
            np.all(self.matrix.data.imag == 0.0)
        )

    def expectation(self, amplitudes: np.ndarray) -> float:
        """<psi|M|psi> for a Hermitian M; returns the real part."""
        return float(np.vdot(amplitudes, self.matrix.dot(amplitudes)).real)

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.getH()
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0

    def __matmul__(self, other: "HermitianOperator") -> "HermitianOperator":
        if self.basis_key != other.basis_key:
            raise BasisMismatchError("operator product across different bases")
        return HermitianOperator(
            matrix=(self.matrix @ other.matrix).tocsr(), basis=self.basis
        )


def _hermitized(mat: sp.spmatrix, basis) -> HermitianOperator:
    m = mat.tocsr()
    m = (m + m.getH()) * 0.5
    return HermitianOperator(matrix=m.tocsr(), basis=basis)


def bose_hubbard_parts(
    basis: FockBasis, hop: float, interaction: float
) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """Potential-independent pieces of the occupation-model Hamiltonian.

    Returns (hopping matrix, onsite-interaction diagonal, occupation table);
    the full Hamiltonian for site potentials P is
    `hopping + diag(interaction_diag + occupations @ P)`.
    """
    L = basis.sites
    occ = basis.occupations().astype(float)
    int_diag = 0.5 * interaction * np.sum(occ * (occ - 1.0), axis=1)

    rows, cols, vals = [], [], []
    for col, s in enumerate(basis.states):
        for j in range(L):
            jp = (j + 1) % L
            if s[jp] > 0:  # a_j^dag a_{j+1}
                t = list(s)
                amp = math.sqrt(t[jp])
                t[jp] -= 1
                amp *= math.sqrt(t[j] + 1)
                t[j] += 1
                rows.append(basis.index[tuple(t)])
                cols.append(col)
                vals.append(-hop * amp)
            if s[j] > 0:  # a_{j+1}^dag a_j
                t = list(s)
                amp = math.sqrt(t[j])
                t[j] -= 1
                amp *= math.sqrt(t[jp] + 1)
                t[jp] += 1
                rows.append(basis.index[tuple(t)])
                cols.append(col)
                vals.append(-hop * amp)
    hop_mat = sp.coo_matrix(
        (np.array(vals), (rows, cols)), shape=(basis.dim, basis.dim)
    ).tocsr()
    return hop_mat, int_diag, occ


def bh_hamiltonian(
    basis: FockBasis, hop: float, interaction: float, potentials
) -> HermitianOperator:
    """Bose-Hubbard ring Hamiltonian with periodic boundaries.

    H = sum_j [ -J (a_j^dag a_{j+1} + h.c.) + P_j n_j + (U/2) n_j (n_j - 1) ].
    """
    if hop <= 0:
        raise ValueError(f"hopping amplitude must be positive, got {hop}")
    p = np.asarray(potentials, dtype=float)
    if p.shape != (basis.sites,):
        raise ValueError(
            f"potentials must have length {basis.sites}, got shape {p.shape}"
        )
    hop_mat, int_diag, occ = bose_hubbard_parts(basis, hop, interaction)
    diag = int_diag + occ @ p
    return _hermitized(hop_mat + sp.diags(diag), basis)


def quantum_phase_parts(
    basis: ChargeBasis, hop: float, interaction: float, flux: float
) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """Potential-independent pieces of the phase-model Hamiltonian.

    The bond term is -J_E (e^{-i flux} T_{j,j+1} + h.c.) where T_{j,j+1}
    raises Q_j and lowers Q_{j+1}; transfers leaving |Q| <= cutoff are
    dropped (hard truncation).  Returns (bond matrix, interaction diagonal,
    charge table).
    """
    L = basis.sites
    dq = basis.cutoff
    charges = basis.charges().astype(float)
    int_diag = 0.5 * interaction * np.sum(charges**2, axis=1)

    fwd = -hop * np.exp(-1j * flux)
    bwd = -hop * np.exp(1j * flux)
    rows, cols, vals = [], [], []
    for col, s in enumerate(basis.states):
        for j in range(L):
            jp = (j + 1) % L
            if s[j] + 1 <= dq and s[jp] - 1 >= -dq:
                t = list(s)
                t[j] += 1
                t[jp] -= 1
                rows.append(basis.index[tuple(t)])
                cols.append(col)
                vals.append(fwd)
            if s[j] - 1 >= -dq and s[jp] + 1 <= dq:
                t = list(s)
                t[j] -= 1
                t[jp] += 1
                rows.append(basis.index[tuple(t)])
                cols.append(col)
                vals.append(bwd)
    bond = sp.coo_matrix(
        (np.array(vals, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim)
    ).tocsr()
    if flux == 0.0:
        bond = bond.real.tocsr()
    return bond, int_diag, charges


def qpm_hamiltonian(
    basis: ChargeBasis,
    hop: float,
    interaction: float,
    potentials,
    flux: float = 0.0,
) -> HermitianOperator:
    """Truncated quantum-phase-model Hamiltonian on a charge basis.

    H = sum_j [ -J_E (e^{-i flux} T_{j,j+1} + h.c.) + P_j Q_j + (U/2) Q_j^2 ].
    """
    p = np.asarray(potentials, dtype=float)
    if p.shape != (basis.sites,):
        raise ValueError(
            f"potentials must have length {basis.sites}, got shape {p.shape}"
        )
    bond, int_diag, charges = quantum_phase_parts(basis, hop, interaction, flux)
    diag = int_diag + charges @ p
    return _hermitized(bond + sp.diags(diag), basis)


def momentum_occupation(basis: FockBasis, k: int) -> HermitianOperator:
    """Number operator of quasi-momentum mode k on the occupation basis.

    n_k = (1/L) sum_{n,m} e^{i 2 pi k (n-m)/L} a_n^dag a_m.
    """
    L = basis.sites
    if not 0 <= k < L:
        raise ValueError(f"mode index must satisfy 0 <= k < {L}, got {k}")
    phase = np.exp(2j * np.pi * k * np.arange(L) / L)
    rows, cols, vals = [], [], []
    for col, s in enumerate(basis.states):
        for m in range(L):
            if s[m] == 0:
                continue
            for n in range(L):
                t = list(s)
                amp = math.sqrt(t[m])
                t[m] -= 1
                amp *= math.sqrt(t[n] + 1)
                t[n] += 1
                rows.append(basis.index[tuple(t)])
                cols.append(col)
                vals.append(amp * phase[n] * np.conj(phase[m]) / L)
    mat = sp.coo_matrix(
        (np.array(vals, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim)
    )
    return _hermitized(mat, basis)


def momentum_mode_operator(
    basis: FockBasis, k: int
) -> tuple[HermitianOperator, HermitianOperator]:
    """(n_k, n_k^2) as operators on the occupation basis."""
    n_k = momentum_occupation(basis, k)
    return n_k, n_k @ n_k
