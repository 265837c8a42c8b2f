"""Target states on ring lattices and the observables that score them.

Winding-mode targets live in the occupation basis and are built from the
mode-product amplitude rule: for a single-particle mode with site weights
w_n, the N_p-fold product state has amplitude

    sqrt(N_p!) * prod_n w_n^{m_n} / sqrt(m_n!)

on the occupation vector m.  Phase-model targets are flux-dressed ground
states of the truncated ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .basis import FockBasis
from .errors import BasisMismatchError
from .evolution import StateVector
from .operators import HermitianOperator, momentum_mode_operator
from .systems import BoseHubbardRing, QuantumPhaseRing


class TargetKind(str, Enum):
    SINGLE_WINDING = "single_winding"
    PRODUCT_SUPERPOSITION = "product_superposition"
    ENTANGLED_SUPERPOSITION = "entangled_superposition"
    FLUX_GROUND_STATE = "flux_ground_state"


@dataclass(frozen=True)
class TargetSpec:
    """What to aim for: a kind plus the winding numbers that define it.

    `windings` holds the mode set Omega for occupation-basis targets and is
    ignored for flux targets, which use `flux_index` (target flux is
    2 pi flux_index / L).
    """

    kind: TargetKind
    windings: tuple[int, ...] = ()
    flux_index: int | None = None


def _validated_windings(windings, sites: int) -> tuple[int, ...]:
    ks = tuple(int(k) for k in windings)
    if not ks:
        raise ValueError("at least one winding number is required")
    reduced = [k % sites for k in ks]
    if len(set(reduced)) != len(reduced):
        raise ValueError(f"winding numbers {ks} collide modulo {sites}")
    return ks


def _mode_weights(windings, sites: int) -> np.ndarray:
    """Site weights of the equal superposition of the given winding modes."""
    n = np.arange(sites)
    w = np.zeros(sites, dtype=complex)
    for k in windings:
        w += np.exp(2j * np.pi * k * n / sites)
    return w / math.sqrt(sites * len(windings))


def _product_amplitudes(weights: np.ndarray, basis: FockBasis) -> np.ndarray:
    occ = basis.occupations()
    fact = np.array([math.factorial(i) for i in range(basis.particles + 1)], float)
    amps = np.prod(weights[None, :] ** occ, axis=1)
    amps *= math.sqrt(math.factorial(basis.particles))
    amps /= np.sqrt(np.prod(fact[occ], axis=1))
    return amps


def make_target(spec: TargetSpec, system) -> StateVector:
    """Construct the target state vector on the system's basis."""
    if spec.kind is TargetKind.FLUX_GROUND_STATE:
        if not isinstance(system, QuantumPhaseRing):
            raise TypeError("flux ground-state targets require a phase-model ring")
        if spec.flux_index is None:
            raise ValueError("flux_index is required for flux ground-state targets")
        dressed = QuantumPhaseRing(
            system.basis,
            hop=system.hop,
            interaction=system.interaction,
            flux=2.0 * np.pi * spec.flux_index / system.sites,
        )
        return dressed.ground_state()[1]

    if not isinstance(system, BoseHubbardRing):
        raise TypeError("winding targets require an occupation-model ring")
    basis = system.basis
    ks = _validated_windings(spec.windings, basis.sites)
    if spec.kind is TargetKind.SINGLE_WINDING:
        if len(ks) != 1:
            raise ValueError("single-winding targets take exactly one winding")
        amps = _product_amplitudes(_mode_weights(ks, basis.sites), basis)
    elif spec.kind is TargetKind.PRODUCT_SUPERPOSITION:
        amps = _product_amplitudes(_mode_weights(ks, basis.sites), basis)
    elif spec.kind is TargetKind.ENTANGLED_SUPERPOSITION:
        amps = np.zeros(basis.dim, dtype=complex)
        for k in ks:
            amps += _product_amplitudes(_mode_weights([k], basis.sites), basis)
        amps /= math.sqrt(len(ks))
    else:
        raise ValueError(f"unknown target kind {spec.kind!r}")
    return StateVector(amplitudes=amps, basis=basis)


def fidelity(psi: StateVector, target: StateVector) -> float:
    """|<psi|target>|^2."""
    ov = psi.overlap(target)
    return float(abs(ov) ** 2)


def mode_number_squares(
    basis: FockBasis, windings
) -> dict[int, HermitianOperator]:
    """n_k^2 operators for each winding in the set, keyed by reduced k."""
    out = {}
    for k in _validated_windings(windings, basis.sites):
        kk = k % basis.sites
        out[kk] = momentum_mode_operator(basis, kk)[1]
    return out


def certification_measure(
    psi: StateVector,
    windings,
    mode_ops: dict[int, HermitianOperator] | None = None,
) -> float:
    """Interferometric figure of merit for a winding superposition.

    W = (N_C^{N_C} / N_p^{2 N_C}) * prod_{k in Omega} <n_k^2>, built from
    the second moments of the winding-mode occupations.  Equals 1 on the
    entangled superposition and is bounded by ((N_p+N_C-1)/(N_C N_p))^{N_C}
    on the product superposition; needs at least two modes.
    """
    basis = psi.basis
    if not isinstance(basis, FockBasis):
        raise BasisMismatchError("certification requires an occupation basis")
    ks = _validated_windings(windings, basis.sites)
    n_modes = len(ks)
    if n_modes < 2:
        raise ValueError("certification needs at least two winding modes")
    if mode_ops is None:
        mode_ops = mode_number_squares(basis, ks)
    n_p = basis.particles
    value = float(n_modes**n_modes) / float(n_p) ** (2 * n_modes)
    for k in ks:
        value *= mode_ops[k % basis.sites].expectation(psi.amplitudes)
    return float(value)
