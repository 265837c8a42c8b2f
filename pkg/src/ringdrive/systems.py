"""Ring systems: cached Hamiltonian assembly for the two lattice models.

A system owns a basis and the model couplings; the potential-independent
matrix is built once, so per-step Hamiltonians during a drive only cost a
diagonal update.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .basis import ChargeBasis, FockBasis
from .evolution import StateVector, ground_state
from .operators import HermitianOperator, bose_hubbard_parts, quantum_phase_parts


class _RingSystem:
    """Shared plumbing; subclasses fill _fixed and _site_table."""

    basis: FockBasis | ChargeBasis
    hop: float
    interaction: float
    _fixed: sp.csr_matrix
    _site_table: np.ndarray

    @property
    def sites(self) -> int:
        return self.basis.sites

    @property
    def dim(self) -> int:
        return self.basis.dim

    def hamiltonian(self, potentials=None) -> HermitianOperator:
        """Hamiltonian for one row of site potentials (zeros if omitted)."""
        if potentials is None:
            return HermitianOperator(matrix=self._fixed, basis=self.basis)
        p = np.asarray(potentials, dtype=float)
        if p.shape != (self.sites,):
            raise ValueError(
                f"potentials must have length {self.sites}, got shape {p.shape}"
            )
        mat = (self._fixed + sp.diags(self._site_table @ p)).tocsr()
        return HermitianOperator(matrix=mat, basis=self.basis)

    def ground_state(self, potentials=None) -> tuple[float, StateVector]:
        return ground_state(self.hamiltonian(potentials))


class BoseHubbardRing(_RingSystem):
    """Periodic occupation-model ring: hopping J, onsite interaction U."""

    def __init__(self, basis: FockBasis, hop: float = 1.0, interaction: float = 0.0):
        if hop <= 0:
            raise ValueError(f"hopping amplitude must be positive, got {hop}")
        self.basis = basis
        self.hop = float(hop)
        self.interaction = float(interaction)
        hop_mat, int_diag, occ = bose_hubbard_parts(basis, self.hop, self.interaction)
        herm = (hop_mat + hop_mat.getH()) * 0.5
        self._fixed = (herm + sp.diags(int_diag)).tocsr()
        self._site_table = occ


class QuantumPhaseRing(_RingSystem):
    """Truncated phase-model ring: bond coupling J_E, charging energy U.

    `flux` threads a phase e^{-i flux} onto every forward charge transfer;
    the dressed ground state at flux 2 pi m / L carries winding m.
    """

    def __init__(
        self,
        basis: ChargeBasis,
        hop: float = 1.0,
        interaction: float = 0.0,
        flux: float = 0.0,
    ):
        if hop <= 0:
            raise ValueError(f"bond coupling must be positive, got {hop}")
        self.basis = basis
        self.hop = float(hop)
        self.interaction = float(interaction)
        self.flux = float(flux)
        bond, int_diag, charges = quantum_phase_parts(
            basis, self.hop, self.interaction, self.flux
        )
        herm = (bond + bond.getH()) * 0.5
        self._fixed = (herm + sp.diags(int_diag)).tocsr()
        self._site_table = charges
