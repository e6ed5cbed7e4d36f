"""Rule-based signal controllers: fixed-time, random, and the two
threshold-integral schemes (cyclic cut-off and acyclic max-pressure variant)."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .core import IntersectionSpec
from .sim import APPROACHING, SimState


def fixed_policy(clock: int, n_phases: int, green_seconds: int = 20) -> int:
    """Rotate through phases on a fixed wall-clock schedule."""
    return (clock // green_seconds) % n_phases


def random_policy(rng: random.Random, n_phases: int) -> int:
    """Draw a target phase uniformly."""
    return rng.randrange(n_phases)


@dataclass
class SotlParams:
    threshold: float = 50.0        # vehicle-seconds of integrated demand to trigger
    cluster_split: int = 3         # platoon size above which cutting it off is allowed
    min_green: int = 5             # seconds a phase must hold before switching
    detection_distance: float = 80.0

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.min_green < 1:
            raise ValueError("min_green must be at least 1 second")
        if self.detection_distance <= 0:
            raise ValueError("detection_distance must be positive")


class FixedTimeController:
    def __init__(self, spec: IntersectionSpec, green_seconds: int = 20):
        self.n_phases = spec.n_phases
        self.green_seconds = green_seconds

    def reset(self) -> None:
        pass

    def decide(self, state: SimState) -> int:
        return fixed_policy(state.clock, self.n_phases, self.green_seconds)


class RandomController:
    def __init__(self, spec: IntersectionSpec, seed: int = 0):
        self.n_phases = spec.n_phases
        self.seed = seed
        self.rng = random.Random(seed)

    def reset(self) -> None:
        self.rng = random.Random(self.seed)

    def decide(self, state: SimState) -> int:
        return random_policy(self.rng, self.n_phases)


class CutoffController:
    """Cyclic threshold scheme: integrate red-lane vehicle counts per phase and
    advance to the next phase once its integral exceeds the threshold."""

    def __init__(self, spec: IntersectionSpec, params: SotlParams | None = None):
        self.spec = spec
        self.params = params or SotlParams()
        self.phase_integral = [0.0] * spec.n_phases
        self._phase_lanes = [spec.green_lanes(p) for p in range(spec.n_phases)]

    def reset(self) -> None:
        self.phase_integral = [0.0] * self.spec.n_phases

    def step(self, red_lane_counts, current_phase: int, phase_green_seconds: int) -> int:
        """Pure counter logic; red_lane_counts[j] must be 0 for green lanes."""
        for i, lanes in enumerate(self._phase_lanes):
            self.phase_integral[i] += sum(red_lane_counts[j] for j in lanes)
        nxt = (current_phase + 1) % self.spec.n_phases
        if phase_green_seconds > self.params.min_green and self.phase_integral[nxt] > self.params.threshold:
            self.phase_integral[nxt] = 0.0
            return nxt
        return current_phase

    def decide(self, state: SimState) -> int:
        counts = _detection_counts(state, self.params.detection_distance)
        sig = state.signal
        in_yellow = sig.yellow_remaining > 0
        green_lanes = set() if in_yellow else self._phase_lanes[sig.current_phase]
        red_counts = [0 if j in green_lanes else c for j, c in enumerate(counts)]
        # A decision mid-yellow would be ignored by the environment, so the
        # phase clock is reported as 0 until the pending phase lands.
        phase_green = 0 if in_yellow else sig.time_in_phase
        return self.step(red_counts, sig.current_phase, phase_green)


class MaxIntegralController:
    """Acyclic threshold scheme using per-lane integrals so that serving a lane
    clears its demand from every phase that shares it."""

    def __init__(self, spec: IntersectionSpec, params: SotlParams | None = None):
        self.spec = spec
        self.params = params or SotlParams()
        self.lane_integral = [0.0] * spec.n_lanes
        self._phase_lanes = [spec.green_lanes(p) for p in range(spec.n_phases)]

    def reset(self) -> None:
        self.lane_integral = [0.0] * self.spec.n_lanes

    def phase_integrals(self) -> list[float]:
        return [
            sum(self.lane_integral[j] for j in lanes) for lanes in self._phase_lanes
        ]

    def step(self, lane_counts, vehicles_near_green: int, current_phase: int,
             phase_green_seconds: int) -> int:
        """One controller tick: integrate counts, then maybe pick a new phase.

        The switch gate requires the minimum green to have elapsed, the platoon
        guard to be clear (never cut a crossing group smaller than
        cluster_split), and some phase integral to exceed the threshold. The
        winning phase is the integral argmax (lowest index on ties) and the
        integrals of its lanes reset to zero.
        """
        for j, c in enumerate(lane_counts):
            self.lane_integral[j] += c
        if phase_green_seconds <= self.params.min_green:
            return current_phase
        if 0 < vehicles_near_green < self.params.cluster_split:
            return current_phase
        kappa = self.phase_integrals()
        best = max(range(len(kappa)), key=lambda i: (kappa[i], -i))
        if kappa[best] <= self.params.threshold:
            return current_phase
        for j in self._phase_lanes[best]:
            self.lane_integral[j] = 0.0
        return best

    def decide(self, state: SimState) -> int:
        counts = _detection_counts(state, self.params.detection_distance)
        sig = state.signal
        in_yellow = sig.yellow_remaining > 0
        near_green = 0
        if not in_yellow:
            # Vehicles passing a green light are being served, not waiting, so
            # they contribute nothing to the demand integrals.
            for j in self._phase_lanes[sig.current_phase]:
                counts[j] = 0
            near_green = _approaching_near_line(
                state, self._phase_lanes[sig.current_phase], self.params.detection_distance
            )
        phase_green = 0 if in_yellow else sig.time_in_phase
        return self.step(counts, near_green, sig.current_phase, phase_green)


def _detection_counts(state: SimState, detection_distance: float) -> list[int]:
    """Vehicles (moving or waiting) within detection range of each stop line."""
    counts = []
    for j, lane in enumerate(state.lanes):
        edge = state.spec.lanes[j].length_m - detection_distance
        counts.append(sum(1 for veh in lane if veh.position >= edge))
    return counts


def _approaching_near_line(state: SimState, lanes, detection_distance: float) -> int:
    total = 0
    for j in lanes:
        edge = state.spec.lanes[j].length_m - detection_distance
        total += sum(
            1 for veh in state.lanes[j] if veh.status == APPROACHING and veh.position >= edge
        )
    return total


def make_controller(name: str, spec: IntersectionSpec, sotl: SotlParams | None = None,
                    seed: int = 0):
    if name == "fixed":
        return FixedTimeController(spec)
    if name == "random":
        return RandomController(spec, seed=seed)
    if name == "sotl1":
        return CutoffController(spec, sotl)
    if name == "sotl2":
        return MaxIntegralController(spec, sotl)
    raise ValueError(f"unknown controller {name!r}")
