"""State vectors, ground states, and exact piecewise-constant propagation.

Propagation uses a dense eigendecomposition up to `DENSE_DIM_LIMIT` states
and a Lanczos (Krylov) matrix exponential above it; both paths target a
1e-9 accuracy on the propagated vector.  Time is measured in units of the
inverse hopping energy with hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .basis import ChargeBasis, FockBasis
from .errors import BasisMismatchError, ConvergenceError
from .operators import DENSE_DIM_LIMIT, HermitianOperator

NORM_TOLERANCE = 1e-10
_KRYLOV_MAX_VECTORS = 60
_KRYLOV_MAX_SPLITS = 40


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitudes over a tagged basis."""

    amplitudes: np.ndarray
    basis: FockBasis | ChargeBasis | None = field(default=None, compare=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"state norm {nrm!r} deviates from 1 beyond tolerance")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, amplitudes, basis=None) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        nrm = np.linalg.norm(amps)
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amplitudes=amps / nrm, basis=basis)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def basis_key(self) -> tuple | None:
        return None if self.basis is None else self.basis.key

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        _check_same_basis(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def permuted(self, perm: np.ndarray) -> "StateVector":
        """State with amplitude i moved to position perm[i]."""
        out = np.empty_like(self.amplitudes)
        out[perm] = self.amplitudes
        return StateVector(amplitudes=out, basis=self.basis)


def _check_same_basis(a, b) -> None:
    ka, kb = a.basis_key, b.basis_key
    if ka is not None and kb is not None and ka != kb:
        raise BasisMismatchError(f"bases differ: {ka} vs {kb}")
    if a.dim != b.dim:
        raise BasisMismatchError(f"dimensions differ: {a.dim} vs {b.dim}")


def ground_state(
    op: HermitianOperator, max_iter: int = 10_000
) -> tuple[float, StateVector]:
    """Lowest eigenpair of a Hermitian operator.

    Dense path below `DENSE_DIM_LIMIT`, implicitly restarted Lanczos above.
    The residual ||H psi - E psi|| is verified against 1e-8 * max|H|.
    """
    if op.dim == 1:
        e = float(op.to_dense()[0, 0].real)
        return e, StateVector(amplitudes=np.ones(1), basis=op.basis)
    if op.dim <= DENSE_DIM_LIMIT:
        dense = op.to_dense()
        vals, vecs = np.linalg.eigh(dense.real if op.is_real() else dense)
        energy, vec = float(vals[0]), vecs[:, 0].astype(complex)
    else:
        try:
            vals, vecs = spla.eigsh(op.matrix, k=1, which="SA", maxiter=max_iter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos ground state failed: {exc}") from exc
        energy, vec = float(vals[0]), vecs[:, 0].astype(complex)
    residual = np.linalg.norm(op.matrix.dot(vec) - energy * vec)
    scale = max(op.max_abs(), 1e-300)
    if residual > 1e-8 * scale:
        raise ConvergenceError(
            f"eigenpair residual {residual:.3e} exceeds 1e-8 * {scale:.3e}"
        )
    return energy, StateVector.from_unnormalized(vec, basis=op.basis)


def _dense_expm_apply(op: HermitianOperator, amps: np.ndarray, dt: float) -> np.ndarray:
    dense = op.to_dense()
    if op.is_real():
        vals, vecs = np.linalg.eigh(dense.real)
    else:
        vals, vecs = np.linalg.eigh(dense)
    coeff = vecs.conj().T @ amps
    return vecs @ (np.exp(-1j * vals * dt) * coeff)


def _lanczos_expm_apply(
    op: HermitianOperator, amps: np.ndarray, dt: float, tol: float, depth: int = 0
) -> np.ndarray:
    """exp(-i H dt) amps via a Lanczos subspace with full reorthogonalization.

    The subspace grows until two successive approximations agree below
    `tol`; if the vector budget is exhausted the step is split in half.
    """
    mat = op.matrix
    vecs = np.empty((_KRYLOV_MAX_VECTORS, amps.shape[0]), dtype=complex)
    vecs[0] = amps
    alphas: list[float] = []
    betas: list[float] = []
    prev = None
    for m in range(1, _KRYLOV_MAX_VECTORS + 1):
        w = mat.dot(vecs[m - 1])
        alpha = float(np.vdot(vecs[m - 1], w).real)
        alphas.append(alpha)
        w = w - alpha * vecs[m - 1]
        if m > 1:
            w = w - betas[-1] * vecs[m - 2]
        # Full reorthogonalization keeps the small problem faithful.
        overlaps = vecs[:m].conj() @ w
        w = w - vecs[:m].T @ overlaps

        tvals, tvecs = sla.eigh_tridiagonal(alphas, betas)
        small = tvecs @ (np.exp(-1j * tvals * dt) * tvecs[0, :].conj())
        approx = vecs[:m].T @ small
        if prev is not None and np.linalg.norm(approx - prev) <= tol:
            return approx
        prev = approx
        beta = float(np.linalg.norm(w))
        if beta < 1e-14:
            return approx  # exact invariant subspace
        betas.append(beta)
        if m < _KRYLOV_MAX_VECTORS:
            vecs[m] = w / beta
    if depth >= _KRYLOV_MAX_SPLITS:
        raise ConvergenceError("Krylov propagation failed to converge")
    half = _lanczos_expm_apply(op, amps, dt / 2, tol / 2, depth + 1)
    return _lanczos_expm_apply(op, half, dt / 2, tol / 2, depth + 1)


def evolve(
    psi: StateVector,
    op: HermitianOperator,
    dt: float,
    method: str = "auto",
    tol: float = 1e-9,
) -> StateVector:
    """Propagate psi by exp(-i H dt) under a constant Hamiltonian."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    _check_same_basis(psi, op)
    if dt == 0.0:
        return StateVector(amplitudes=psi.amplitudes, basis=psi.basis)
    if method == "auto":
        method = "dense" if op.dim <= DENSE_DIM_LIMIT else "krylov"
    if method == "dense":
        out = _dense_expm_apply(op, psi.amplitudes, dt)
    elif method == "krylov":
        out = _lanczos_expm_apply(op, psi.amplitudes, dt, tol)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    return StateVector(amplitudes=out, basis=psi.basis)
