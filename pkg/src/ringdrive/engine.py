"""Scoring drive protocols: fidelity/certification traces and barrier scans."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import FockBasis
from .evolution import StateVector, evolve
from .schedule import PotentialSchedule, barrier_schedule
from .targets import TargetKind, TargetSpec, certification_measure, fidelity, \
    make_target, mode_number_squares

MEASURE_FIDELITY = "fidelity"
MEASURE_CERTIFICATION = "certification"


@dataclass(frozen=True)
class EvaluationTrace:
    """Measures sampled at every step boundary of a schedule, t=0 included."""

    times: np.ndarray
    fidelities: np.ndarray | None
    certifications: np.ndarray | None
    final_state: StateVector

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelities[-1])

    @property
    def best_fidelity(self) -> float:
        return float(np.max(self.fidelities))

    def first_reach_time(self, threshold: float) -> float:
        """Earliest boundary where fidelity has reached `threshold`; NaN if never."""
        hits = np.nonzero(self.fidelities >= threshold)[0]
        return float(self.times[hits[0]]) if hits.size else math.nan


def _certification_ops(system, spec: TargetSpec):
    basis = system.basis
    if not isinstance(basis, FockBasis):
        raise ValueError("certification is defined on occupation-basis rings only")
    if spec.kind is TargetKind.FLUX_GROUND_STATE or len(spec.windings) < 2:
        raise ValueError("certification needs a winding target with >= 2 modes")
    return mode_number_squares(basis, spec.windings)


def evaluate(
    schedule: PotentialSchedule,
    system,
    target: TargetSpec,
    initial: StateVector | None = None,
    measures: tuple[str, ...] = (MEASURE_FIDELITY,),
) -> EvaluationTrace:
    """Propagate through a schedule and record measures at every boundary.

    The initial state defaults to the undriven ground state of the system.
    """
    if schedule.sites != system.sites:
        raise ValueError(
            f"schedule has {schedule.sites} sites but system has {system.sites}"
        )
    unknown = set(measures) - {MEASURE_FIDELITY, MEASURE_CERTIFICATION}
    if unknown or not measures:
        raise ValueError(f"unsupported measures: {sorted(unknown) or measures}")
    target_state = make_target(target, system)
    mode_ops = (
        _certification_ops(system, target) if MEASURE_CERTIFICATION in measures else None
    )
    psi = system.ground_state()[1] if initial is None else initial

    n = schedule.steps
    fids = np.empty(n + 1) if MEASURE_FIDELITY in measures else None
    certs = np.empty(n + 1) if MEASURE_CERTIFICATION in measures else None

    def record(i, state):
        if fids is not None:
            fids[i] = fidelity(state, target_state)
        if certs is not None:
            certs[i] = certification_measure(state, target.windings, mode_ops)

    record(0, psi)
    for i in range(n):
        h = system.hamiltonian(schedule.row(i))
        psi = evolve(psi, h, schedule.dt)
        record(i + 1, psi)
    return EvaluationTrace(
        times=schedule.boundaries(),
        fidelities=fids,
        certifications=certs,
        final_state=psi,
    )


def min_reach_time(
    system,
    target: TargetSpec,
    height: float,
    speed: float,
    f_min: float,
    t_cap: float | None = None,
    dt_sample: float | None = None,
    initial: StateVector | None = None,
) -> float:
    """Earliest time a stirring barrier reaches fidelity f_min; NaN if never.

    The barrier runs until `t_cap` (default 40 inverse hoppings) and the
    fidelity is checked at every sampling boundary.
    """
    if not 0.0 <= f_min < 1.0:
        raise ValueError(f"f_min must lie in [0, 1), got {f_min}")
    if t_cap is None:
        t_cap = 40.0 / system.hop
    sched = barrier_schedule(height, speed, t_cap, system.sites, dt_sample)
    trace = evaluate(sched, system, target, initial=initial)
    return trace.first_reach_time(f_min)


@dataclass(frozen=True)
class SweepPoint:
    height: float
    speed: float
    best_fidelity: float
    reach_time: float  # NaN when f_min was never reached


def barrier_sweep(
    system,
    target: TargetSpec,
    heights,
    speeds,
    f_min: float = 0.0,
    t_cap: float | None = None,
    dt_sample: float | None = None,
) -> list[SweepPoint]:
    """Grid scan over barrier height and speed.

    Each grid point records the running-best fidelity over a drive of
    length `t_cap` and the earliest time `f_min` was reached.
    """
    if not 0.0 <= f_min < 1.0:
        raise ValueError(f"f_min must lie in [0, 1), got {f_min}")
    if t_cap is None:
        t_cap = 40.0 / system.hop
    initial = system.ground_state()[1]
    points = []
    for height in heights:
        for speed in speeds:
            sched = barrier_schedule(height, speed, t_cap, system.sites, dt_sample)
            trace = evaluate(sched, system, target, initial=initial)
            points.append(
                SweepPoint(
                    height=float(height),
                    speed=float(speed),
                    best_fidelity=trace.best_fidelity,
                    reach_time=trace.first_reach_time(f_min),
                )
            )
    return points
