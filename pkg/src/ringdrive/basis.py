"""Many-body bases for ring lattices.

Two bases are supported: site-occupation (Fock) states of a fixed number of
bosons, and bounded zero-sum charge-fluctuation states used by the phase-model
truncation.  Both enumerate their states in descending lexicographic order so
that state indices are reproducible across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionCapError

DEFAULT_DIMENSION_CAP = 500_000


def _fock_tuples(sites: int, particles: int) -> list[tuple[int, ...]]:
    # Descending lexicographic: site 0 occupancy counted down first.
    if sites == 1:
        return [(particles,)]
    out = []
    for n in range(particles, -1, -1):
        for rest in _fock_tuples(sites - 1, particles - n):
            out.append((n,) + rest)
    return out


def _charge_tuples(sites: int, cutoff: int) -> list[tuple[int, ...]]:
    # Zero-sum vectors in [-cutoff, cutoff]^sites, descending lexicographic.
    # Prune branches whose remaining sites cannot cancel the partial sum.
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], total: int, remaining: int) -> None:
        if remaining == 0:
            if total == 0:
                out.append(prefix)
            return
        for q in range(cutoff, -cutoff - 1, -1):
            if abs(total + q) <= (remaining - 1) * cutoff:
                rec(prefix + (q,), total + q, remaining - 1)

    rec((), 0, sites)
    return out


@dataclass(frozen=True)
class FockBasis:
    """Occupation-number basis of `particles` bosons on a `sites`-site ring."""

    sites: int
    particles: int
    states: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int] = field(compare=False, repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def key(self) -> tuple:
        return ("fock", self.sites, self.particles)

    def occupations(self) -> np.ndarray:
        """dim x sites integer matrix of site occupations."""
        return np.array(self.states, dtype=np.int64)

    def rotated_indices(self, shift: int) -> np.ndarray:
        """Index permutation realizing the ring rotation site j -> j+shift.

        If `perm = rotated_indices(shift)` then the rotated state has
        amplitudes `rotated[perm[i]] = original[i]`.
        """
        shift %= self.sites
        perm = np.empty(self.dim, dtype=np.int64)
        for i, s in enumerate(self.states):
            rotated = s[-shift:] + s[:-shift] if shift else s
            perm[i] = self.index[rotated]
        return perm


@dataclass(frozen=True)
class ChargeBasis:
    """Zero-sum charge-fluctuation basis with per-site bound `cutoff`."""

    sites: int
    cutoff: int
    states: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int] = field(compare=False, repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def key(self) -> tuple:
        return ("charge", self.sites, self.cutoff)

    def charges(self) -> np.ndarray:
        """dim x sites integer matrix of charge fluctuations."""
        return np.array(self.states, dtype=np.int64)

    def rotated_indices(self, shift: int) -> np.ndarray:
        shift %= self.sites
        perm = np.empty(self.dim, dtype=np.int64)
        for i, s in enumerate(self.states):
            rotated = s[-shift:] + s[:-shift] if shift else s
            perm[i] = self.index[rotated]
        return perm


def build_fock_basis(
    sites: int, particles: int, dimension_cap: int = DEFAULT_DIMENSION_CAP
) -> FockBasis:
    """Enumerate all occupation vectors of `particles` bosons on `sites` sites."""
    if sites < 3:
        raise ValueError(f"need at least 3 sites, got {sites}")
    if particles < 1:
        raise ValueError(f"need at least 1 particle, got {particles}")
    count = math.comb(sites + particles - 1, particles)
    if count > dimension_cap:
        raise DimensionCapError(
            f"basis of {count} states exceeds cap of {dimension_cap}"
        )
    states = tuple(_fock_tuples(sites, particles))
    index = {s: i for i, s in enumerate(states)}
    return FockBasis(sites=sites, particles=particles, states=states, index=index)


def build_charge_basis(
    sites: int, cutoff: int, dimension_cap: int = DEFAULT_DIMENSION_CAP
) -> ChargeBasis:
    """Enumerate zero-sum charge vectors bounded by `cutoff` per site."""
    if sites < 2:
        raise ValueError(f"need at least 2 sites, got {sites}")
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    states = tuple(_charge_tuples(sites, cutoff))
    if len(states) > dimension_cap:
        raise DimensionCapError(
            f"basis of {len(states)} states exceeds cap of {dimension_cap}"
        )
    index = {s: i for i, s in enumerate(states)}
    return ChargeBasis(sites=sites, cutoff=cutoff, states=states, index=index)
