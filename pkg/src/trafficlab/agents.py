"""DQN learner: replay memory, epsilon-greedy behavior, TD fitting, checkpoints."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import qnet
from .env import Transition
from .qnet import Adam, QNetwork

REPLAY_CAPACITY = 360_000


@dataclass
class DQNConfig:
    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 512
    tau: float = 1e-3
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 10_000
    replay_capacity: int = REPLAY_CAPACITY
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must be in [0, 1]")
        if self.lr <= 0 or self.batch_size < 1 or self.replay_capacity < 1:
            raise ValueError("lr, batch_size and replay_capacity must be positive")
        if not (0.0 <= self.eps_end <= self.eps_start <= 1.0):
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if self.eps_decay_steps < 1:
            raise ValueError("eps_decay_steps must be positive")

    @property
    def warmup(self) -> int:
        return 2 * self.batch_size


class ReplayBuffer:
    """Ring buffer of transitions with uniform, with-replacement sampling."""

    def __init__(self, capacity: int = REPLAY_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.count = 0
        self._states = None
        self._actions = None
        self._rewards = None
        self._next_states = None
        self._durations = None
        self._terminals = None

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    def _allocate(self, dim: int) -> None:
        self._states = np.empty((self.capacity, dim), dtype=np.float64)
        self._next_states = np.empty((self.capacity, dim), dtype=np.float64)
        self._actions = np.empty(self.capacity, dtype=np.int64)
        self._rewards = np.empty(self.capacity, dtype=np.float64)
        self._durations = np.empty(self.capacity, dtype=np.int64)
        self._terminals = np.empty(self.capacity, dtype=bool)

    def store(self, transition: Transition) -> None:
        if self._states is None:
            self._allocate(transition.state.shape[0])
        idx = self.count % self.capacity
        self._states[idx] = transition.state
        self._actions[idx] = transition.action
        self._rewards[idx] = transition.reward
        self._next_states[idx] = transition.next_state
        self._durations[idx] = transition.duration
        self._terminals[idx] = transition.terminal
        self.count += 1

    def sample(self, n: int, rng: np.random.Generator):
        size = len(self)
        if size < n:
            raise ValueError(f"cannot sample {n} transitions from a buffer of {size}")
        idx = rng.integers(0, size, size=n)
        return (
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
            self._durations[idx],
            self._terminals[idx],
        )


def select_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the action values; greedy ties go to the lowest index."""
    q_values = np.asarray(q_values)
    if q_values.size == 0:
        raise ValueError("empty action-value vector")
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError("epsilon must be in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(q_values.size))
    return int(np.argmax(q_values))


def td_targets(target_net: QNetwork, rewards, next_states, durations, terminals,
               gamma: float) -> np.ndarray:
    """y = r + gamma^duration * max_a' Q_target(s', a'), bootstrap dropped at terminals."""
    next_q = qnet.forward(target_net, next_states)
    best_next = next_q.max(axis=1)
    discount = np.power(gamma, np.asarray(durations, dtype=np.float64))
    return np.asarray(rewards, dtype=np.float64) + discount * best_next * (
        ~np.asarray(terminals, dtype=bool)
    )


def train_step(net: QNetwork, target_net: QNetwork, batch, config: DQNConfig,
               optimizer: Adam) -> float:
    """One Adam step on the live network against targets from the target network."""
    states, actions, rewards, next_states, durations, terminals = batch
    if len(states) == 0:
        raise ValueError("empty batch")
    targets = td_targets(target_net, rewards, next_states, durations, terminals, config.gamma)
    if not np.all(np.isfinite(targets)):
        raise RuntimeError("non-finite TD target; training step aborted")
    loss, grad_w, grad_b = qnet.loss_and_grads(net, states, actions, targets)
    if not np.isfinite(loss):
        raise RuntimeError(f"non-finite loss {loss}; training step aborted")
    optimizer.step(net, grad_w, grad_b)
    return loss


@dataclass
class EpsilonSchedule:
    """Linear start -> end over decay_steps collected transitions, then flat."""

    start: float
    end: float
    decay_steps: int

    def value(self, step: int) -> float:
        if step >= self.decay_steps:
            return self.end
        frac = step / self.decay_steps
        return self.start + frac * (self.end - self.start)


class DQNAgent:
    """Value network, its slow target copy, replay memory, and the update rule.

    One gradient update per stored transition once the warmup (two batches)
    has been collected; target parameters are soft-updated after every step.
    """

    def __init__(self, in_dim: int, n_actions: int, config: DQNConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.net = QNetwork.build(in_dim, n_actions, self.rng)
        self.target = self.net.copy()
        self.optimizer = Adam(self.net, lr=config.lr)
        self.buffer = ReplayBuffer(config.replay_capacity)
        self.epsilon = EpsilonSchedule(config.eps_start, config.eps_end, config.eps_decay_steps)
        self.transitions_seen = 0
        self.updates_done = 0

    @property
    def n_actions(self) -> int:
        return self.net.out_dim

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return qnet.forward(self.net, state)

    def act(self, state: np.ndarray, greedy: bool = False) -> int:
        eps = 0.0 if greedy else self.epsilon.value(self.transitions_seen)
        return select_action(self.q_values(state), eps, self.rng)

    def observe(self, transition: Transition) -> float | None:
        """Store a transition; train once the warmup is met. Returns the loss."""
        self.buffer.store(transition)
        self.transitions_seen += 1
        if len(self.buffer) < self.config.warmup:
            return None
        batch = self.buffer.sample(self.config.batch_size, self.rng)
        loss = train_step(self.net, self.target, batch, self.config, self.optimizer)
        qnet.soft_update(self.target, self.net, self.config.tau)
        self.updates_done += 1
        return loss


CHECKPOINT_VERSION = 1


def save_checkpoint(path, agent: DQNAgent, meta: dict | None = None) -> None:
    """Write agent parameters, optimizer moments, config, and RNG state.

    The round trip through load_checkpoint is bit-exact.
    """
    arrays = {"version": np.asarray(CHECKPOINT_VERSION, dtype=np.int64)}
    arrays.update(qnet.save_network_arrays("net", agent.net))
    arrays.update(qnet.save_network_arrays("target", agent.target))
    for k, m in enumerate(agent.optimizer.m):
        arrays[f"adam_m{k}"] = m
    for k, v in enumerate(agent.optimizer.v):
        arrays[f"adam_v{k}"] = v
    arrays["adam_t"] = np.asarray(agent.optimizer.t, dtype=np.int64)
    arrays["counters"] = np.asarray(
        [agent.transitions_seen, agent.updates_done], dtype=np.int64
    )
    arrays["config"] = qnet.encode_json(asdict(agent.config))
    arrays["meta"] = qnet.encode_json(meta or {})
    arrays["rng_state"] = qnet.encode_json(agent.rng.bit_generator.state)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[DQNAgent, dict]:
    """Rebuild an agent (and its experiment metadata) from save_checkpoint output."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        config = DQNConfig(**qnet.decode_json(data["config"]))
        meta = qnet.decode_json(data["meta"])
        net = qnet.load_network_arrays("net", data)
        agent = DQNAgent(net.in_dim, net.out_dim, config)
        agent.net = net
        agent.target = qnet.load_network_arrays("target", data)
        agent.optimizer = Adam(agent.net, lr=config.lr)
        agent.optimizer.t = int(data["adam_t"])
        for k in range(len(agent.optimizer.m)):
            agent.optimizer.m[k][...] = data[f"adam_m{k}"]
            agent.optimizer.v[k][...] = data[f"adam_v{k}"]
        agent.transitions_seen, agent.updates_done = (int(x) for x in data["counters"])
        agent.rng.bit_generator.state = qnet.decode_json(data["rng_state"])
    return agent, meta
