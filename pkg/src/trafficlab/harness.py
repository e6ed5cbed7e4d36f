"""Experiment orchestration: training loops, evaluation, controller comparison,
the Q-value generalization sweep, and CSV reporting."""

from __future__ import annotations

import csv
import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, sim
from .agents import DQNAgent, DQNConfig, load_checkpoint, save_checkpoint
from .baselines import SotlParams, make_controller
from .core import FlowDataset, IntersectionSpec
from .env import ActionSpace, TrafficEnv, observation_dim, lane_capacity

# Figure-of-merit bookkeeping runs on weight updates; one epoch is 900 updates.
UPDATES_PER_EPOCH = 900

METRICS_COLUMNS = (
    "epoch",
    "weight_updates",
    "mean_reward",
    "val_avg_travel_time_s",
    "wall_clock_s",
    "transitions",
)

COMPARE_COLUMNS = ("controller", "flow", "split", "avg_travel_time_s")


@dataclass
class ExperimentConfig:
    intersection: str
    flows: list = field(default_factory=list)          # paths to flow documents
    flow_profiles: list = field(default_factory=list)  # [{profile, seed, duration}]
    holdout_index: int = -1
    variant: str = "wad"
    action_mode: str = "acyclic"
    process: str = "smdp"
    dqn: dict = field(default_factory=dict)
    sotl: dict = field(default_factory=dict)
    horizon: int | None = None
    eval_every: int = 50
    total_epochs: int = 200
    seed: int = 0
    out_dir: str = "runs/experiment"
    controllers: list = field(default_factory=lambda: ["fixed", "random", "sotl1", "sotl2"])
    repeats: int = 1

    def __post_init__(self):
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")
        if self.process not in ("mdp", "smdp"):
            raise ValueError("process must be 'mdp' or 'smdp'")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        config = cls(**doc)
        base = path.parent
        config.intersection = str(_resolve(base, config.intersection))
        config.flows = [str(_resolve(base, f)) for f in config.flows]
        return config


def _resolve(base: Path, p: str) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def load_materials(config: ExperimentConfig):
    """Resolve the intersection and flow set named by a config."""
    spec = core.load_intersection(Path(config.intersection).read_text(encoding="utf-8"))
    flows = [core.load_flow(Path(f).read_text(encoding="utf-8")) for f in config.flows]
    for item in config.flow_profiles:
        profile = core.parse_profile(item["profile"])
        flows.append(
            core.generate_flow(
                profile,
                seed=int(item["seed"]),
                duration=int(item["duration"]),
                label=item.get("label", item["profile"]),
            )
        )
    if not flows:
        raise ValueError("config names no flows")
    return spec, flows


def evaluate(policy, spec: IntersectionSpec, flow: FlowDataset, mode: str = "mdp",
             variant: str = "wads", action_mode: str = "acyclic",
             horizon: int | None = None, on_tick=None) -> float:
    """Average travel time of one deterministic episode under the given policy.

    `policy` is either a controller (has .decide) consulted every second, or a
    DQNAgent stepped greedily under `mode` ("mdp" or "smdp").
    """
    if not flow.vehicles:
        raise ValueError("empty flow")
    if hasattr(policy, "decide"):
        state = sim.init(spec, flow)
        policy.reset()
        stop = flow.duration if horizon is None else horizon
        while state.clock < stop:
            sim.command_signal(state, policy.decide(state))
            sim.tick(state)
            if on_tick is not None:
                on_tick(state)
        return sim.avg_travel_time(state, flow)
    tt, _ = greedy_rollout(policy, spec, flow, mode, variant, action_mode, horizon, on_tick)
    return tt


def greedy_rollout(agent: DQNAgent, spec: IntersectionSpec, flow: FlowDataset,
                   mode: str, variant: str, action_mode: str,
                   horizon: int | None = None, on_tick=None) -> tuple[float, float]:
    """Run one greedy episode; returns (avg travel time, raw episode return)."""
    env = TrafficEnv(
        spec,
        flow,
        variant=variant,
        action_mode=action_mode,
        gamma=agent.config.gamma,
        horizon=horizon,
    )
    obs = env.reset()
    while not env.terminal:
        action = int(np.argmax(agent.q_values(obs)))
        transition = env.mdp_step(action) if mode == "mdp" else env.smdp_step(action)
        if on_tick is not None:
            on_tick(env.state)
        obs = transition.next_state
    return sim.avg_travel_time(env.state, flow), env.raw_return


@dataclass
class TrainResult:
    metrics_path: str
    best_checkpoint: str
    best_val_travel_time: float
    rows: list


def run_training(config: ExperimentConfig) -> TrainResult:
    """Train a DQN agent on the train flows, validating every eval_every epochs
    and checkpointing whenever the validation travel time improves."""
    spec, flows = load_materials(config)
    holdout = config.holdout_index % len(flows)
    if len(flows) >= 2:
        train_flows, val_flow, _ = core.split_dataset(flows, holdout)
    else:
        # Single-flow smoke setups: train on the full flow, validate on its first half.
        train_flows = flows
        val_flow, _ = core.split_halves(flows[0])

    space = ActionSpace(config.action_mode, spec.n_phases)
    in_dim = observation_dim(config.variant, spec.n_lanes, spec.n_phases)
    total_updates = config.total_epochs * UPDATES_PER_EPOCH

    dqn_kwargs = dict(config.dqn)
    dqn_kwargs.setdefault("seed", config.seed)
    if "eps_decay_steps" not in dqn_kwargs:
        probe = DQNConfig(**dqn_kwargs)
        dqn_kwargs["eps_decay_steps"] = max(1, (probe.warmup + total_updates) // 2)
    dqn_config = DQNConfig(**dqn_kwargs)
    agent = DQNAgent(in_dim, space.size, dqn_config)

    meta = {
        "variant": config.variant,
        "action_mode": config.action_mode,
        "process": config.process,
        "intersection": core.intersection_to_document(spec),
    }

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    best_path = out_dir / "best.npz"

    envs = [
        TrafficEnv(spec, f, variant=config.variant, action_mode=config.action_mode,
                   gamma=dqn_config.gamma, horizon=config.horizon)
        for f in train_flows
    ]

    rows = []
    best_val = float("inf")
    started = time.perf_counter()

    def run_eval() -> None:
        nonlocal best_val
        val_tt, val_return = greedy_rollout(
            agent, spec, val_flow, config.process, config.variant,
            config.action_mode, config.horizon,
        )
        row = {
            "epoch": agent.updates_done // UPDATES_PER_EPOCH,
            "weight_updates": agent.updates_done,
            "mean_reward": val_return,
            "val_avg_travel_time_s": val_tt,
            "wall_clock_s": time.perf_counter() - started,
            "transitions": agent.transitions_seen,
        }
        rows.append(row)
        if val_tt < best_val:
            best_val = val_tt
            save_checkpoint(best_path, agent, meta)

    run_eval()
    eval_stride = config.eval_every * UPDATES_PER_EPOCH
    next_eval = eval_stride
    env_cycle = itertools.cycle(envs)
    env = next(env_cycle)
    obs = env.reset()
    while agent.updates_done < total_updates:
        action = agent.act(obs)
        transition = env.mdp_step(action) if config.process == "mdp" else env.smdp_step(action)
        agent.observe(transition)
        obs = transition.next_state
        if transition.terminal:
            env = next(env_cycle)
            obs = env.reset()
        if agent.updates_done >= next_eval:
            run_eval()
            next_eval += eval_stride
    if rows[-1]["weight_updates"] != agent.updates_done:
        run_eval()

    write_csv(metrics_path, METRICS_COLUMNS, rows)
    return TrainResult(
        metrics_path=str(metrics_path),
        best_checkpoint=str(best_path),
        best_val_travel_time=best_val,
        rows=rows,
    )


def compare(config: ExperimentConfig):
    """Evaluate every configured controller on the val/test halves of every flow.

    Returns rows shaped like the output CSV: controller, flow, split,
    avg_travel_time_s.
    """
    spec, flows = load_materials(config)
    sotl = SotlParams(**config.sotl) if config.sotl else SotlParams()
    repeats = max(1, config.repeats)
    rows = []
    for name in config.controllers:
        for k, flow in enumerate(flows):
            label = flow.label or f"flow{k}"
            val, test = core.split_halves(flow)
            for split, part in (("val", val), ("test", test)):
                # Repeats only spread stochastic policies; the seed is offset
                # per repeat and the reported value is the mean. Identical
                # repeats short-circuit so deterministic rows stay bit-exact.
                tts = []
                for r in range(repeats):
                    policy, eval_kwargs = _build_policy(name, spec, sotl, config,
                                                        seed_offset=r)
                    tts.append(evaluate(policy, spec, part, horizon=config.horizon,
                                        **eval_kwargs))
                mean_tt = tts[0] if len(set(tts)) == 1 else sum(tts) / len(tts)
                rows.append(
                    {
                        "controller": name,
                        "flow": label,
                        "split": split,
                        "avg_travel_time_s": mean_tt,
                    }
                )
    return rows


def _build_policy(name: str, spec: IntersectionSpec, sotl: SotlParams,
                  config: ExperimentConfig, seed_offset: int = 0):
    if name.startswith("dqn:"):
        agent, meta = load_checkpoint(name.split(":", 1)[1])
        return agent, {
            "mode": meta.get("process", config.process),
            "variant": meta.get("variant", config.variant),
            "action_mode": meta.get("action_mode", config.action_mode),
        }
    return make_controller(name, spec, sotl, seed=config.seed + seed_offset), {}


def qvalue_sweep(checkpoint_path, grid_max: int, lane_pair=None):
    """Q(keep) vs Q(switch) over artificial two-lane queue states.

    For every (n1, n2) in [0, grid_max]^2, build the observation with n1
    vehicles waiting on the first lane of the held phase and n2 on the
    opposing phase's lane, everything else empty, and report the action-value
    gap between switching and keeping.
    """
    if grid_max < 1:
        raise ValueError("grid_max must be at least 1")
    agent, meta = load_checkpoint(checkpoint_path)
    spec = core.load_intersection(json.dumps(meta["intersection"]))
    variant = meta["variant"]
    action_mode = meta["action_mode"]
    if spec.n_phases != 2:
        raise ValueError("q-value sweep requires a two-phase checkpoint")
    if agent.n_actions != 2:
        raise ValueError("checkpoint action space does not match a two-phase sweep")
    if lane_pair is None:
        lane_pair = (min(spec.green_lanes(0)), min(spec.green_lanes(1)))
    keep_phase = next(p for p in range(2) if lane_pair[0] in spec.green_lanes(p))
    switch_phase = 1 - keep_phase

    j = spec.n_lanes
    dim = observation_dim(variant, j, spec.n_phases)
    blocks = dim - spec.n_phases
    rows = []
    for n1 in range(grid_max + 1):
        for n2 in range(grid_max + 1):
            obs = np.zeros(dim)
            for lane, n in ((lane_pair[0], n1), (lane_pair[1], n2)):
                cap = lane_capacity(spec.lanes[lane].length_m)
                obs[lane] = min(n / cap, 1.0)  # waiting block is first in every variant
            obs[blocks + keep_phase] = 1.0
            q = agent.q_values(obs)
            if action_mode == "cyclic":
                q_keep, q_switch = float(q[0]), float(q[1])
            else:
                q_keep, q_switch = float(q[keep_phase]), float(q[switch_phase])
            rows.append(
                {
                    "n1": n1,
                    "n2": n2,
                    "q_keep": q_keep,
                    "q_switch": q_switch,
                    "q_switch_minus_q_keep": q_switch - q_keep,
                }
            )
    return rows


def sotl_grid_search(spec: IntersectionSpec, flow: FlowDataset, thresholds,
                     cluster_splits=(1, 3, 5), min_greens=(5,),
                     detection_distances=(80.0,)):
    """Brute tuning helper for the acyclic threshold controller; returns
    (params, avg travel time) pairs sorted best first."""
    results = []
    for th, mu, mg, dd in itertools.product(
        thresholds, cluster_splits, min_greens, detection_distances
    ):
        params = SotlParams(threshold=th, cluster_split=mu, min_green=mg,
                            detection_distance=dd)
        tt = evaluate(make_controller("sotl2", spec, params), spec, flow)
        results.append((params, tt))
    results.sort(key=lambda item: item[1])
    return results


def write_csv(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])


def _format_cell(value):
    if isinstance(value, float):
        return f"{value:.6f}"
    return value


def pearson(xs, ys) -> float:
    """Correlation between two equal-length sequences."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need at least two paired samples")
    return float(np.corrcoef(x, y)[0, 1])
