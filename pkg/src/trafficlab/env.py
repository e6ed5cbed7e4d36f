"""RL view of the simulator: state encodings, reward, MDP and SMDP stepping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sim
from .core import FlowDataset, IntersectionSpec
from .sim import DEFAULT_MIN_SPACING_M, SimState

# Observation variants. "combined" folds waiting and approaching counts into a
# single per-lane total; the others expose separate blocks in the order
# [waiting | approaching | distance | speed], each followed by the phase one-hot.
VARIANTS = ("combined", "wa", "wad", "wads")
_BLOCKS = {"combined": 1, "wa": 2, "wad": 3, "wads": 4}


def observation_dim(variant: str, n_lanes: int, n_phases: int) -> int:
    if variant not in _BLOCKS:
        raise ValueError(f"unknown state variant {variant!r}")
    return _BLOCKS[variant] * n_lanes + n_phases


def lane_capacity(length_m: float) -> int:
    """Structural normalizer: how many jam-spaced vehicles fit on the lane."""
    return max(1, int(length_m // DEFAULT_MIN_SPACING_M))


def observe(state: SimState, variant: str) -> np.ndarray:
    """Encode the world as a vector in [0, 1]^dim with a trailing phase one-hot.

    Counts normalize by lane capacity, distances by lane length, speeds by the
    lane speed limit; all entries are clamped to [0, 1].
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown state variant {variant!r}")
    spec = state.spec
    j = spec.n_lanes
    metrics = sim.lane_metrics(state)
    blocks = _BLOCKS[variant]
    out = np.zeros(blocks * j + spec.n_phases, dtype=np.float64)
    for lane, (w, a, d, s) in enumerate(metrics):
        cap = lane_capacity(spec.lanes[lane].length_m)
        if variant == "combined":
            out[lane] = (w + a) / cap
        else:
            out[lane] = w / cap
            out[j + lane] = a / cap
            if blocks >= 3:
                out[2 * j + lane] = d / spec.lanes[lane].length_m
            if blocks >= 4:
                out[3 * j + lane] = s / spec.lanes[lane].vmax_ms
    np.clip(out, 0.0, 1.0, out=out)
    out[blocks * j + state.signal.current_phase] = 1.0
    return out


def reward(state: SimState) -> float:
    """Negative total queue length (raw waiting-vehicle count over all lanes)."""
    total = 0
    for lane in state.lanes:
        for veh in lane:
            if veh.status == sim.WAITING:
                total += 1
    return -float(total)


@dataclass(frozen=True)
class ActionSpace:
    """cyclic: {keep, advance to next phase}. acyclic: pick any phase directly."""

    mode: str
    n_phases: int

    def __post_init__(self):
        if self.mode not in ("cyclic", "acyclic"):
            raise ValueError(f"unknown action mode {self.mode!r}")
        if self.size < 2:
            raise ValueError("need at least two actions; acyclic control requires 2+ phases")

    @property
    def size(self) -> int:
        return 2 if self.mode == "cyclic" else self.n_phases


def decode_action(space: ActionSpace, action: int, current_phase: int) -> int:
    if not (0 <= action < space.size):
        raise ValueError(f"action {action} out of range for {space.mode} space")
    if space.mode == "cyclic":
        return current_phase if action == 0 else (current_phase + 1) % space.n_phases
    return action


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    duration: int
    terminal: bool


class TrafficEnv:
    """One episode is one flow file; the episode ends at the flow horizon.

    mdp_step advances one second per decision; smdp_step folds the whole
    yellow period of a switch into a single variable-duration transition with
    discount-weighted reward.
    """

    def __init__(
        self,
        spec: IntersectionSpec,
        flow: FlowDataset,
        variant: str = "wads",
        action_mode: str = "acyclic",
        gamma: float = 0.99,
        horizon: int | None = None,
    ):
        if not (0.0 <= gamma <= 1.0):
            raise ValueError("gamma must be in [0, 1]")
        self.spec = spec
        self.flow = flow
        self.variant = variant
        self.action_space = ActionSpace(action_mode, spec.n_phases)
        self.gamma = gamma
        self.horizon = flow.duration if horizon is None else horizon
        self.state: SimState | None = None
        self.raw_return = 0.0  # undiscounted per-tick reward sum this episode

    def reset(self) -> np.ndarray:
        self.state = sim.init(self.spec, self.flow)
        self.raw_return = 0.0
        return observe(self.state, self.variant)

    @property
    def terminal(self) -> bool:
        return self.state is None or self.state.clock >= self.horizon

    def _tick_reward(self) -> float:
        sim.tick(self.state)
        r = reward(self.state)
        self.raw_return += r
        return r

    def mdp_step(self, action: int) -> Transition:
        if self.terminal:
            raise RuntimeError("cannot step a terminal episode")
        before = observe(self.state, self.variant)
        target = decode_action(self.action_space, action, self.state.signal.current_phase)
        sim.command_signal(self.state, target)
        r = self._tick_reward()
        return Transition(
            state=before,
            action=action,
            reward=r,
            next_state=observe(self.state, self.variant),
            duration=1,
            terminal=self.terminal,
        )

    def smdp_step(self, action: int) -> Transition:
        if self.terminal:
            raise RuntimeError("cannot step a terminal episode")
        if self.state.signal.yellow_remaining > 0:
            raise RuntimeError("smdp_step owns the yellow period; the simulator is mid-yellow")
        before = observe(self.state, self.variant)
        current = self.state.signal.current_phase
        target = decode_action(self.action_space, action, current)
        if target == current:
            r = self.gamma * self._tick_reward()
            duration = 1
        else:
            sim.command_signal(self.state, target)
            r = 0.0
            duration = 0
            for t in range(1, self.spec.yellow_duration + 2):
                r += (self.gamma ** t) * self._tick_reward()
                duration += 1
                if self.terminal:
                    break
        return Transition(
            state=before,
            action=action,
            reward=r,
            next_state=observe(self.state, self.variant),
            duration=duration,
            terminal=self.terminal,
        )
