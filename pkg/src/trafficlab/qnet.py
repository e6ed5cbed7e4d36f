"""Action-value network: a small numpy MLP with analytic gradients and Adam."""

from __future__ import annotations

import json

import numpy as np

HIDDEN = (64, 64)


class QNetwork:
    """Affine-ReLU-affine-ReLU-affine map from a state vector to K action values."""

    def __init__(self, layer_sizes, rng: np.random.Generator | None = None):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output layers")
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            if rng is None:
                w = np.zeros((fan_in, fan_out))
                b = np.zeros(fan_out)
            else:
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
                b = rng.uniform(-bound, bound, size=fan_out)
            self.weights.append(w)
            self.biases.append(b)

    @classmethod
    def build(cls, in_dim: int, n_actions: int, rng: np.random.Generator) -> "QNetwork":
        return cls((in_dim,) + HIDDEN + (n_actions,), rng)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "QNetwork":
        clone = QNetwork(self.layer_sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def parameters(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat_parameters(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError("flat parameter vector has the wrong length")


def forward(net: QNetwork, states: np.ndarray) -> np.ndarray:
    """Q values for one state vector or a batch of them."""
    x = np.asarray(states, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != net.in_dim:
        raise ValueError(f"state dimension {x.shape[1]} does not match network input {net.in_dim}")
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if k < last:
            np.maximum(h, 0.0, out=h)
    return h[0] if single else h


def _forward_cached(net: QNetwork, x: np.ndarray):
    activations = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k < last else z
        activations.append(h)
    return pre, activations


def loss_and_grads(net: QNetwork, states, actions, targets):
    """Mean squared TD error over the batch and its gradient in net parameters.

    Returns (loss, grad_weights, grad_biases) with grads shaped like the net.
    """
    x = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.intp)
    targets = np.asarray(targets, dtype=np.float64)
    n = x.shape[0]
    pre, acts = _forward_cached(net, x)
    q = acts[-1]
    picked = q[np.arange(n), actions]
    err = picked - targets
    loss = float(np.mean(err ** 2))

    dq = np.zeros_like(q)
    dq[np.arange(n), actions] = 2.0 * err / n
    grad_w = [None] * len(net.weights)
    grad_b = [None] * len(net.biases)
    delta = dq
    for k in range(len(net.weights) - 1, -1, -1):
        grad_w[k] = acts[k].T @ delta
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.weights[k].T) * (pre[k - 1] > 0.0)
    return loss, grad_w, grad_b


class Adam:
    """Adam optimizer state for one QNetwork."""

    def __init__(self, net: QNetwork, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self, net: QNetwork, grad_w, grad_b) -> None:
        grads = []
        for gw, gb in zip(grad_w, grad_b):
            grads.append(gw)
            grads.append(gb)
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(net.parameters(), grads, self.m, self.v):
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def soft_update(target: QNetwork, net: QNetwork, tau: float) -> None:
    """Move target parameters toward the live network: t := tau*p + (1-tau)*t."""
    if target.layer_sizes != net.layer_sizes:
        raise ValueError("architecture mismatch between target and live networks")
    for t, p in zip(target.parameters(), net.parameters()):
        t *= 1.0 - tau
        t += tau * p


def save_network_arrays(prefix: str, net: QNetwork) -> dict:
    arrays = {}
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"{prefix}_w{k}"] = w
        arrays[f"{prefix}_b{k}"] = b
    arrays[f"{prefix}_layers"] = np.asarray(net.layer_sizes, dtype=np.int64)
    return arrays


def load_network_arrays(prefix: str, data) -> QNetwork:
    layers = tuple(int(s) for s in data[f"{prefix}_layers"])
    net = QNetwork(layers)
    for k in range(len(layers) - 1):
        net.weights[k][...] = data[f"{prefix}_w{k}"]
        net.biases[k][...] = data[f"{prefix}_b{k}"]
    return net


def encode_json(obj) -> np.ndarray:
    return np.asarray(json.dumps(obj, sort_keys=True))


def decode_json(arr) -> object:
    return json.loads(str(arr))
