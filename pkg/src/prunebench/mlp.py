"""Dense ReLU networks trained with softmax cross-entropy and momentum SGD."""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from prunebench.errors import DimensionError, DomainError, FormatError, TrainingDivergedError
from prunebench.numerics import Rng

ACTIVATIONS = ("relu", "identity")

PRESETS: dict[str, list[int]] = {
    "mnist-small": [784, 512, 30, 10],
    "mnist-paper": [784, 6000, 30, 10],
    "cifar-paper": [3072, 6000, 300, 10],
    "cifar-small": [3072, 512, 300, 10],
}


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"bias shape {self.biases.shape} does not match weights {self.weights.shape}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.biases.copy(), self.activation)


@dataclass
class Mlp:
    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise DomainError("an Mlp needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DimensionError(f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}")
        if self.layers[-1].activation != "identity":
            raise DomainError("the final layer must emit logits (identity activation)")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    def copy(self) -> "Mlp":
        return Mlp([layer.copy() for layer in self.layers])

    def n_params(self) -> int:
        return sum(layer.weights.size + layer.biases.size for layer in self.layers)


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            # lr = 0 is allowed as a no-op probe
            raise DomainError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise DomainError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    wall_time: float = 0.0


def init_mlp(layer_widths, seed: int) -> Mlp:
    """He-uniform weights in ``±sqrt(6 / fan_in)``, zero biases."""
    widths = [int(w) for w in layer_widths]
    if len(widths) < 3:
        raise DomainError(f"need input, at least one hidden and an output width, got {widths}")
    if any(w <= 0 for w in widths):
        raise DomainError(f"all widths must be positive, got {widths}")
    rng = Rng(seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        act = "identity" if i == len(widths) - 2 else "relu"
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return Mlp(layers)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    return np.maximum(z, 0.0) if activation == "relu" else z


def forward(net: Mlp, x) -> np.ndarray:
    """Logits for a single input vector or a ``(batch, input_dim)`` array."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.input_dim or x.ndim not in (1, 2):
        raise DimensionError(f"input shape {x.shape} does not match input_dim {net.input_dim}")
    h = x
    for layer in net.layers:
        h = _activate(h @ layer.weights.T + layer.biases, layer.activation)
    return h


def hidden_activations(net: Mlp, x, depth: int = 1) -> np.ndarray:
    """Output of the first ``depth`` layers (post-activation)."""
    h = np.asarray(x, dtype=np.float64)
    for layer in net.layers[:depth]:
        h = _activate(h @ layer.weights.T + layer.biases, layer.activation)
    return h


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_batch(net: Mlp, x, labels) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels))
    if x.shape[0] == 0:
        raise DomainError("empty batch")
    if x.shape[0] != labels.shape[0]:
        raise DimensionError(f"{x.shape[0]} inputs but {labels.shape[0]} labels")
    if x.shape[1] != net.input_dim:
        raise DimensionError(f"input dim {x.shape[1]} does not match {net.input_dim}")
    if labels.min() < 0 or labels.max() >= net.output_dim:
        raise DomainError(f"labels must lie in [0, {net.output_dim})")
    return x, labels.astype(np.int64)


def loss_and_grads(net: Mlp, x, labels) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean softmax cross-entropy over the batch and its exact gradients.

    Returns ``(loss, [(dW, db) per layer])``.
    """
    x, labels = _check_batch(net, x, labels)
    n = x.shape[0]
    inputs = []
    pre = []
    h = x
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weights.T + layer.biases
        pre.append(z)
        h = _activate(z, layer.activation)

    logp = log_softmax(h)
    rows = np.arange(n)
    loss = float(-logp[rows, labels].mean())

    delta = np.exp(logp)
    delta[rows, labels] -= 1.0
    delta /= n
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if layer.activation == "relu":
            delta = delta * (pre[i] > 0)
        grads[i] = (delta.T @ inputs[i], delta.sum(axis=0))
        if i:
            delta = delta @ layer.weights
    return loss, grads


def train(net: Mlp, data, cfg: TrainConfig, log=None) -> TrainReport:
    """Momentum SGD in place: ``v <- momentum*v - lr*g``, ``p <- p + v``.

    ``data`` is anything with ``inputs`` and ``labels`` arrays. Examples are
    reshuffled every epoch from a stream seeded by ``cfg.seed``.
    """
    x = np.asarray(data.inputs, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    if x.shape[0] == 0:
        raise DomainError("cannot train on an empty dataset")
    _check_batch(net, x[:1], y[:1])
    if y.min() < 0 or y.max() >= net.output_dim:
        raise DomainError(f"labels must lie in [0, {net.output_dim})")

    rng = Rng(cfg.seed).child(1)
    velocity = [(np.zeros_like(l.weights), np.zeros_like(l.biases)) for l in net.layers]
    report = TrainReport()
    start = time.perf_counter()
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for b, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            loss, grads = loss_and_grads(net, x[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, b, loss)
            total_loss += loss * idx.shape[0]
            for layer, (vw, vb), (gw, gb) in zip(net.layers, velocity, grads):
                vw *= cfg.momentum
                vw -= cfg.learning_rate * gw
                vb *= cfg.momentum
                vb -= cfg.learning_rate * gb
                layer.weights += vw
                layer.biases += vb
        report.losses.append(total_loss / n)
        report.train_accuracy.append(evaluate(net, data))
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs} loss={report.losses[-1]:.4f} "
                f"train_acc={report.train_accuracy[-1]:.4f}")
    report.wall_time = time.perf_counter() - start
    return report


def predict(net: Mlp, x, chunk: int = 8192) -> np.ndarray:
    """Argmax class per row; ties go to the lowest index."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.empty(x.shape[0], dtype=np.int64)
    for lo in range(0, x.shape[0], chunk):
        out[lo:lo + chunk] = np.argmax(forward(net, x[lo:lo + chunk]), axis=1)
    return out


def evaluate(net: Mlp, data) -> float:
    labels = np.asarray(data.labels)
    if labels.shape[0] == 0:
        raise DomainError("cannot evaluate on an empty dataset")
    return float(np.mean(predict(net, data.inputs) == labels))


# -- checkpoints ---------------------------------------------------------------
#
# Layout (little-endian):
#   b"RPRN" | u32 version | u32 layer count
#   per layer: u32 out | u32 in | u32 activation code
#   per layer: f64[out*in] weights (row-major) | f64[out] biases

MAGIC = b"RPRN"
FORMAT_VERSION = 1


def checkpoint_bytes(net: Mlp) -> bytes:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(net.layers))]
    for layer in net.layers:
        parts.append(struct.pack("<III", layer.out_dim, layer.in_dim,
                                 ACTIVATIONS.index(layer.activation)))
    for layer in net.layers:
        parts.append(layer.weights.astype("<f8").tobytes(order="C"))
        parts.append(layer.biases.astype("<f8").tobytes())
    return b"".join(parts)


def mlp_from_bytes(buf: bytes) -> Mlp:
    if buf[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic: expected {MAGIC!r}, got {buf[:4]!r}")
    if len(buf) < 12:
        raise FormatError("truncated checkpoint header")
    version, n_layers = struct.unpack_from("<II", buf, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    off = 12
    dims = []
    for _ in range(n_layers):
        if off + 12 > len(buf):
            raise FormatError("truncated checkpoint header")
        out, inp, act = struct.unpack_from("<III", buf, off)
        if act >= len(ACTIVATIONS):
            raise FormatError(f"unknown activation code {act}")
        dims.append((out, inp, ACTIVATIONS[act]))
        off += 12
    expected = off + 8 * sum(o * i + o for o, i, _ in dims)
    if len(buf) != expected:
        raise FormatError(f"checkpoint payload is {len(buf)} bytes, expected {expected}")
    layers = []
    for out, inp, act in dims:
        w = np.frombuffer(buf, dtype="<f8", count=out * inp, offset=off).reshape(out, inp)
        off += 8 * out * inp
        b = np.frombuffer(buf, dtype="<f8", count=out, offset=off)
        off += 8 * out
        layers.append(DenseLayer(w.astype(np.float64), b.astype(np.float64), act))
    return Mlp(layers)


def save_checkpoint(net: Mlp, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(net))


def load_checkpoint(path) -> Mlp:
    return mlp_from_bytes(Path(path).read_bytes())
