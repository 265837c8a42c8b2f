"""Piecewise-constant site-potential schedules, including moving barriers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PotentialSchedule:
    """A drive protocol: one row of site potentials per time step.

    `potentials` has shape (steps, sites); step i is held constant on
    [i*dt, (i+1)*dt).  `p_max` is the declared amplitude bound; it defaults
    to the largest magnitude actually present.
    """

    potentials: np.ndarray
    dt: float
    p_max: float | None = None  # resolved to a float after validation

    def __post_init__(self):
        pots = np.array(self.potentials, dtype=float)
        if pots.ndim != 2 or pots.shape[0] < 1 or pots.shape[1] < 1:
            raise ValueError(f"potentials must be (steps, sites), got {pots.shape}")
        if not np.all(np.isfinite(pots)):
            raise ValueError("potentials must be finite")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        largest = float(np.max(np.abs(pots))) if pots.size else 0.0
        bound = largest if self.p_max is None else float(self.p_max)
        if bound < 0:
            raise ValueError(f"p_max must be non-negative, got {bound}")
        if largest > bound + 1e-12:
            raise ValueError(
                f"potential magnitude {largest} exceeds declared bound {bound}"
            )
        pots.flags.writeable = False
        object.__setattr__(self, "potentials", pots)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "p_max", bound)

    @property
    def steps(self) -> int:
        return self.potentials.shape[0]

    @property
    def sites(self) -> int:
        return self.potentials.shape[1]

    @property
    def duration(self) -> float:
        return self.steps * self.dt

    def boundaries(self) -> np.ndarray:
        """Step boundary times 0, dt, ..., steps*dt."""
        return np.arange(self.steps + 1) * self.dt

    def row(self, i: int) -> np.ndarray:
        return self.potentials[i]


def barrier_schedule(
    height: float,
    speed: float,
    duration: float,
    sites: int,
    dt_sample: float | None = None,
) -> PotentialSchedule:
    """Stirring protocol: a single-site barrier hopping around the ring.

    The barrier of the given height moves at `speed` sites per unit time
    and is sampled piecewise-constantly every `dt_sample`; the site for a
    step is the one under the barrier at the step midpoint.  The sampling
    step must divide the per-site dwell time 1/speed (within 1e-9) so the
    discretized barrier spends the same number of steps on every site;
    the default is a quarter of the dwell time.
    """
    if speed <= 0:
        raise ValueError(f"barrier speed must be positive, got {speed}")
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if sites < 3:
        raise ValueError(f"need at least 3 sites, got {sites}")
    dwell = 1.0 / speed
    if dt_sample is None:
        dt_sample = dwell / 4.0
    if dt_sample <= 0:
        raise ValueError(f"dt_sample must be positive, got {dt_sample}")
    ratio = dwell / dt_sample
    if abs(ratio - round(ratio)) > 1e-9:
        raise ValueError(
            f"dt_sample {dt_sample} must divide the per-site dwell time {dwell}"
        )
    steps = math.ceil(duration / dt_sample - 1e-9)
    pots = np.zeros((steps, sites))
    for i in range(steps):
        t_mid = (i + 0.5) * dt_sample
        site = int(math.floor(t_mid * speed)) % sites
        pots[i, site] = height
    return PotentialSchedule(potentials=pots, dt=dt_sample, p_max=abs(height))
