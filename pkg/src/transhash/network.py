"""Feedforward hashing towers: ReLU hidden layers and a tanh hash layer.

Gradients are derived by hand; the objective module supplies the residuals
dC/dz~ at the final pre-activation and :func:`backward` pushes them down.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import as_matrix, tanh_elementwise

CHECKPOINT_MAGIC = "TRANSHASH-TOWER"
CHECKPOINT_VERSION = 1


@dataclass
class Tower:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def d_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def bits(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Tower":
        return Tower(self.layer_sizes, [w.copy() for w in self.weights],
                     [b.copy() for b in self.biases])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tower):
            return NotImplemented
        return (self.layer_sizes == other.layer_sizes
                and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))


@dataclass
class ForwardTrace:
    """Layer inputs and pre-activations; ``pre[-1]`` is z~ and ``z`` is tanh(z~)."""

    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    z: np.ndarray


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class OptimizerState:
    velocity_w: list[np.ndarray]
    velocity_b: list[np.ndarray]
    momentum: float = 0.9
    learning_rate: float = 1e-3
    # Per-layer learning-rate multipliers; the hash layer trains 10x faster by default.
    lr_mult: tuple[float, ...] | None = None

    @classmethod
    def for_tower(cls, tower: Tower, momentum=0.9, learning_rate=1e-3,
                  hash_lr_mult=10.0) -> "OptimizerState":
        n = len(tower.weights)
        return cls([np.zeros_like(w) for w in tower.weights],
                   [np.zeros_like(b) for b in tower.biases],
                   momentum, learning_rate, (1.0,) * (n - 1) + (float(hash_lr_mult),))


def _check_sizes(layer_sizes) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError(f"need at least input and output sizes, got {list(sizes)}")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {list(sizes)}")
    return sizes


def init_tower(layer_sizes, seed) -> Tower:
    """Glorot-uniform weights, zero biases."""
    sizes = _check_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Tower(sizes, weights, biases)


def forward(tower: Tower, batch) -> ForwardTrace:
    a = as_matrix(batch, "batch")
    if a.shape[1] != tower.d_in:
        raise ValueError(f"batch has {a.shape[1]} columns, tower expects {tower.d_in}")
    inputs, pre = [], []
    last = len(tower.weights) - 1
    for k, (w, b) in enumerate(zip(tower.weights, tower.biases)):
        inputs.append(a)
        h = a @ w.T + b
        pre.append(h)
        a = tanh_elementwise(h) if k == last else np.maximum(h, 0.0)
    return ForwardTrace(inputs, pre, a)


def backward(tower: Tower, trace: ForwardTrace, residuals) -> Gradients:
    """Back-propagate dC/dz~ (one row per batch item); gradients are summed over rows."""
    delta = as_matrix(residuals, "residuals")
    if delta.shape != trace.pre[-1].shape:
        raise ValueError(f"residuals shape {delta.shape} != output shape {trace.pre[-1].shape}")
    n = len(tower.weights)
    gw, gb = [None] * n, [None] * n
    for k in range(n - 1, -1, -1):
        gw[k] = delta.T @ trace.inputs[k]
        gb[k] = delta.sum(axis=0)
        if k:
            # ReLU derivative, taken as 0 at exactly 0.
            delta = (delta @ tower.weights[k]) * (trace.pre[k - 1] > 0)
    return Gradients(gw, gb)


def sgd_step(tower: Tower, grads: Gradients, state: OptimizerState) -> tuple[Tower, OptimizerState]:
    """Momentum SGD, updating ``tower`` and ``state`` in place: v <- m v - lr g; p <- p + v."""
    n = len(tower.weights)
    if len(grads.weights) != n or len(state.velocity_w) != n:
        raise ValueError("gradient/state layer count does not match tower")
    mult = state.lr_mult or (1.0,) * n
    for k in range(n):
        lr = state.learning_rate * mult[k]
        for p, g, v in ((tower.weights[k], grads.weights[k], state.velocity_w[k]),
                        (tower.biases[k], grads.biases[k], state.velocity_b[k])):
            if p.shape != g.shape or p.shape != v.shape:
                raise ValueError(f"shape mismatch at layer {k}: {p.shape}, {g.shape}, {v.shape}")
            v *= state.momentum
            v -= lr * g
            p += v
    return tower, state


def save_tower(tower: Tower, path) -> None:
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
             "layers " + " ".join(str(s) for s in tower.layer_sizes)]
    for w, b in zip(tower.weights, tower.biases):
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in w)
        lines.append(" ".join(f"{v:.17g}" for v in b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_tower(path) -> Tower:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or lines[0].split() != [CHECKPOINT_MAGIC, str(CHECKPOINT_VERSION)]:
        raise ValueError(f"{path}: not a tower checkpoint (bad header)")
    head = lines[1].split()
    if not head or head[0] != "layers":
        raise ValueError(f"{path}: line 2 must list layer sizes")
    sizes = _check_sizes(head[1:])
    pos = 2
    weights, biases = [], []

    def row(width):
        nonlocal pos
        if pos >= len(lines):
            raise ValueError(f"{path}: truncated at line {pos + 1}")
        vals = lines[pos].split()
        if len(vals) != width:
            raise ValueError(f"{path}: line {pos + 1} has {len(vals)} values, expected {width}")
        pos += 1
        return [float(v) for v in vals]

    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(np.array([row(fan_in) for _ in range(fan_out)]).reshape(fan_out, fan_in))
        biases.append(np.array(row(fan_out)))
    if any(line.strip() for line in lines[pos:]):
        raise ValueError(f"{path}: trailing data after line {pos}")
    return Tower(sizes, weights, biases)
