"""Minimal dense-network machinery.

Reverse-mode differentiation over the small op set the agents actually
need (affine maps, rectifier, tanh, exp/log, elementwise arithmetic,
reductions, concatenation, elementwise minimum), two-hidden-layer
perceptrons, a tanh-squashed Gaussian policy head, the Adam update, a ring
replay buffer, and a flat binary checkpoint format.

Everything is float64 numpy and deterministic; no hardware acceleration,
no convolutions, no recurrence.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6  # guards log(1 - tanh(u)^2) near the saturation points

_LOG_2PI = math.log(2.0 * math.pi)


class DimensionMismatch(ValueError):
    """Input width does not match the network's first layer."""


# ---------------------------------------------------------------------------
# Reverse-mode tensors
# ---------------------------------------------------------------------------


class Tensor:
    """Array node in a backward-differentiable expression graph."""

    __slots__ = ("data", "grad", "_parents", "_push")

    def __init__(self, data, parents=(), push=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self._parents = parents
        self._push = push  # push(out_grad): accumulate into parents

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Accumulate gradients of this scalar into every upstream tensor."""
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._push is not None and node.grad is not None:
                node._push(node.grad)


def _binary(a: Tensor, b: Tensor, out, da, db) -> Tensor:
    def push(g):
        a._accumulate(da(g))
        b._accumulate(db(g))

    return Tensor(out, (a, b), push)


def _unary(a: Tensor, out, da) -> Tensor:
    def push(g):
        a._accumulate(da(g))

    return Tensor(out, (a,), push)


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, a.data * b.data, lambda g: g * b.data, lambda g: g * a.data)


def scale(a: Tensor, c: float) -> Tensor:
    return _unary(a, a.data * c, lambda g: g * c)


def shift(a: Tensor, c) -> Tensor:
    return _unary(a, a.data + c, lambda g: g)


def mul_const(a: Tensor, c) -> Tensor:
    c = np.asarray(c, dtype=float)
    return _unary(a, a.data * c, lambda g: g * c)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with x (B, n_in), w (n_in, n_out), b (n_out,)."""
    if x.data.shape[-1] != w.data.shape[0]:
        raise DimensionMismatch(
            f"input width {x.data.shape[-1]} != layer width {w.data.shape[0]}"
        )
    out = x.data @ w.data + b.data

    def push(g):
        x._accumulate(g @ w.data.T)
        w._accumulate(x.data.T @ g)
        b._accumulate(g.sum(axis=0) if g.ndim > 1 else g)

    return Tensor(out, (x, w, b), push)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _unary(a, a.data * mask, lambda g: g * mask)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _unary(a, t, lambda g: g * (1.0 - t * t))


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)
    return _unary(a, e, lambda g: g * e)


def log(a: Tensor) -> Tensor:
    return _unary(a, np.log(a.data), lambda g: g / a.data)


def square(a: Tensor) -> Tensor:
    return _unary(a, a.data * a.data, lambda g: 2.0 * g * a.data)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    mask = (a.data > lo) & (a.data < hi)
    return _unary(a, np.clip(a.data, lo, hi), lambda g: g * mask)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    take_a = a.data <= b.data  # ties route to the first argument
    out = np.where(take_a, a.data, b.data)
    return _binary(a, b, out, lambda g: g * take_a, lambda g: g * ~take_a)


def concat(a: Tensor, b: Tensor) -> Tensor:
    na = a.data.shape[-1]
    out = np.concatenate([a.data, b.data], axis=-1)

    def push(g):
        a._accumulate(g[..., :na])
        b._accumulate(g[..., na:])

    return Tensor(out, (a, b), push)


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    out = a.data[..., start:stop]

    def push(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        a._accumulate(full)

    return Tensor(out, (a,), push)


def sum_last(a: Tensor) -> Tensor:
    return _unary(a, a.data.sum(axis=-1), lambda g: np.repeat(
        g[..., None], a.data.shape[-1], axis=-1
    ))


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    return _unary(a, np.asarray(a.data.mean()), lambda g: np.full_like(a.data, g / n))


def constant(data) -> Tensor:
    return Tensor(data)


def gradients(loss: Tensor, params: list[Tensor]) -> list[np.ndarray]:
    """Backward pass; returns one gradient array per parameter tensor."""
    loss.backward()
    return [
        p.grad if p.grad is not None else np.zeros_like(p.data) for p in params
    ]


# ---------------------------------------------------------------------------
# Perceptrons
# ---------------------------------------------------------------------------


@dataclass
class Mlp:
    """Fully connected network with rectifier hidden layers, linear output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def create(cls, widths: list[int], rng) -> "Mlp":
        """He-style initialization: W ~ N(0, 2 / fan_in), zero biases."""
        weights, biases = [], []
        for n_in, n_out in zip(widths[:-1], widths[1:]):
            weights.append(rng.standard_normal((n_in, n_out)) * math.sqrt(2.0 / n_in))
            biases.append(np.zeros(n_out))
        return cls(weights=weights, biases=biases)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Plain ndarray forward pass (no graph)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.weights[0].shape[0]:
        raise DimensionMismatch(
            f"input width {x.shape[-1]} != network input {net.weights[0].shape[0]}"
        )
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def mlp_forward_graph(x: Tensor, params: list[Tensor]) -> Tensor:
    """Graph-building forward pass over parameter tensors from :meth:`Mlp.params`."""
    h = x
    n_layers = len(params) // 2
    for i in range(n_layers):
        h = affine(h, params[2 * i], params[2 * i + 1])
        if i < n_layers - 1:
            h = relu(h)
    return h


def wrap_params(net: Mlp) -> list[Tensor]:
    """Leaf tensors sharing the network's storage, ready for a backward pass."""
    return [Tensor(p) for p in net.params()]


def mlp_gradients(net: Mlp, loss_fn) -> list[np.ndarray]:
    """Gradients of ``loss_fn(param_tensors) -> scalar Tensor`` for every parameter."""
    params = wrap_params(net)
    loss = loss_fn(params)
    return gradients(loss, params)


# ---------------------------------------------------------------------------
# Squashed Gaussian head
# ---------------------------------------------------------------------------


def squashed_sample(mean_: np.ndarray, log_std: np.ndarray, rng):
    """Sample a = tanh(mean + std * xi) and its log density (ndarray path).

    The log density includes the change-of-variables correction
    -sum log(1 - a^2 + eps).  Returns (action, log_prob, xi) so callers can
    replay the same noise through a differentiable graph.
    """
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    xi = rng.standard_normal(mean_.shape)
    u = mean_ + np.exp(log_std) * xi
    a = np.tanh(u)
    lp = -0.5 * xi**2 - log_std - 0.5 * _LOG_2PI - np.log(1.0 - a * a + SQUASH_EPS)
    return a, lp.sum(axis=-1), xi


def squashed_sample_graph(mean_: Tensor, log_std: Tensor, xi: np.ndarray):
    """Reparameterized squashed sample as a graph: returns (action, log_prob).

    ``xi`` is fixed noise, so gradients flow through mean and log-std only.
    With u = mean + std * xi the standardized Gaussian residual is exactly
    xi, so the quadratic density term is a constant whose parameter
    gradient vanishes; only -log std and the tanh correction carry
    gradients, matching the exact density of the realized sample.
    """
    log_std = clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    u = add(mean_, mul_const(exp(log_std), xi))
    a = tanh(u)
    correction = log(shift(scale(square(a), -1.0), 1.0 + SQUASH_EPS))
    lp = shift(
        sub(scale(log_std, -1.0), correction), -0.5 * (xi * xi) - 0.5 * _LOG_2PI
    )
    return a, sum_last(lp)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


class Adam:
    """First/second-moment adaptive updates applied in place."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], lr: float,
              state: Adam | None = None) -> Adam:
    """One Adam update on ``params`` (in place); returns the carried state."""
    if state is None:
        state = Adam(params, lr)
    state.lr = lr
    state.step(grads)
    return state


# ---------------------------------------------------------------------------
# Replay buffer
# ---------------------------------------------------------------------------


class ReplayBuffer:
    """FIFO ring of (s, a, r, s', done) with uniform without-replacement batches."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, state, action, reward, next_state, done):
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch: int, rng) -> dict:
        if batch > self._size:
            raise ValueError(f"batch {batch} exceeds buffer size {self._size}")
        idx = rng.choice(self._size, size=batch, replace=False)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
        }


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"WCNN"
_CKPT_VERSION = 1


def save_params(path, arrays: list[np.ndarray]):
    """Flat binary dump: magic, version, count, then (ndim, shape, f64 data) per array."""
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<2i", _CKPT_VERSION, len(arrays)))
        for a in arrays:
            a = np.asarray(a, dtype="<f8")
            f.write(struct.pack("<i", a.ndim))
            f.write(struct.pack(f"<{a.ndim}i", *a.shape))
            f.write(a.tobytes())


def load_params(path) -> list[np.ndarray]:
    """Exact inverse of :func:`save_params`."""
    with open(path, "rb") as f:
        if f.read(4) != _CKPT_MAGIC:
            raise ValueError(f"{path} is not a parameter checkpoint")
        version, count = struct.unpack("<2i", f.read(8))
        if version != _CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        out = []
        for _ in range(count):
            (ndim,) = struct.unpack("<i", f.read(4))
            shape = struct.unpack(f"<{ndim}i", f.read(4 * ndim)) if ndim else ()
            size = int(np.prod(shape)) if shape else 1
            out.append(np.frombuffer(f.read(8 * size), dtype="<f8").reshape(shape).copy())
        return out
