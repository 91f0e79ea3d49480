"""A small fully connected embedding network with explicit backprop.

The map is a chain of affine layers with ReLU between them and an identity
output, initialized with Glorot-uniform weights and zero biases.  Forward
returns both the embedding and an activation trace; backward consumes the
trace and a gradient w.r.t. the output and produces per-layer parameter
gradients, zeroing the leading ``frozen_layer_count`` layers so a frozen
prefix never moves under any optimizer.

Checkpoints are a versioned binary format::

    magic   8 bytes   b"SCLCKPT\\x00"
    version u32 LE    currently 1
    layers  u32 LE    layer count, then per layer: out u32, in u32, act u8
    data    per layer: weight row-major float64 LE, then bias float64 LE
    meta    u32 LE byte length + UTF-8 JSON (epoch, seed, loss history, ...)

Loading refuses unknown versions and raises on truncated or mangled files;
a save/load round trip reproduces parameters bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ConfigError, DataError, DimensionMismatchError

_MAGIC = b"SCLCKPT\x00"
CHECKPOINT_VERSION = 1
_ACT_CODES = {"identity": 0, "relu": 1}
_ACT_NAMES = {code: name for name, code in _ACT_CODES.items()}


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise DataError(f"layer shapes inconsistent: weight {w.shape}, bias {b.shape}")
        if self.activation not in _ACT_CODES:
            raise DataError(f"unknown activation {self.activation!r}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True, eq=False)
class ModelParams:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise DataError("model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DataError(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        if self.layers[-1].activation != "identity":
            raise DataError("final layer activation must be identity")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        if len(self.layers) != len(other.layers):
            return False
        return all(
            a.activation == b.activation
            and np.array_equal(a.weight, b.weight)
            and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers)
        )


@dataclass(frozen=True)
class FreezeMask:
    """How many leading layers are excluded from parameter updates."""

    frozen_layer_count: int = 0

    def __post_init__(self):
        if self.frozen_layer_count < 0:
            raise ConfigError("frozen_layer_count must be >= 0")


@dataclass(frozen=True)
class ForwardTrace:
    """Per-layer inputs and pre-activations retained for the backward pass."""

    inputs: tuple[np.ndarray, ...]
    preacts: tuple[np.ndarray, ...]
    output: np.ndarray


@dataclass(frozen=True)
class Checkpoint:
    format_version: int
    params: ModelParams
    metadata: dict


def init_model(dims: list[int], seed: int) -> ModelParams:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.

    ``dims`` lists layer widths input-first, e.g. ``[4, 8, 3]`` builds two
    layers (8x4 relu, 3x8 identity).  Deterministic per seed.
    """
    if len(dims) < 2:
        raise ConfigError("dims must list at least input and output widths")
    if any(d < 1 for d in dims):
        raise ConfigError(f"layer widths must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    for li, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        scale = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-scale, scale, size=(fan_out, fan_in))
        activation = "identity" if li == len(dims) - 2 else "relu"
        layers.append(Layer(weight, np.zeros(fan_out), activation))
    return ModelParams(tuple(layers))


def identity_model(dim: int) -> ModelParams:
    """A single identity layer; handy wherever raw inputs should pass through."""
    return ModelParams((Layer(np.eye(dim), np.zeros(dim), "identity"),))


def forward(m: ModelParams, x) -> tuple[np.ndarray, ForwardTrace]:
    """Apply the network to one input vector, keeping the activation trace."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] != m.input_dim:
        raise DimensionMismatchError(
            f"input shape {a.shape} does not match model input dim {m.input_dim}"
        )
    inputs = []
    preacts = []
    for layer in m.layers:
        inputs.append(a)
        z = layer.weight @ a + layer.bias
        preacts.append(z)
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return a, ForwardTrace(tuple(inputs), tuple(preacts), a)


def backward(m: ModelParams, trace: ForwardTrace, grad_out, freeze: FreezeMask = FreezeMask()):
    """Chain-rule the output gradient into per-layer (dW, db) pairs.

    Layers with index < ``frozen_layer_count`` receive exactly-zero
    gradients.  The trace must come from a forward pass of the same model.
    """
    if freeze.frozen_layer_count > len(m.layers):
        raise ConfigError(
            f"cannot freeze {freeze.frozen_layer_count} of {len(m.layers)} layers"
        )
    if len(trace.inputs) != len(m.layers):
        raise DataError("trace does not match model depth")
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != (m.output_dim,):
        raise DimensionMismatchError(
            f"grad_out shape {g.shape} does not match output dim {m.output_dim}"
        )
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(m.layers)
    for li in range(len(m.layers) - 1, -1, -1):
        layer = m.layers[li]
        x_in, z = trace.inputs[li], trace.preacts[li]
        if x_in.shape[0] != layer.in_dim or z.shape[0] != layer.out_dim:
            raise DataError("trace shapes do not match model layer shapes")
        dz = g * (z > 0.0) if layer.activation == "relu" else g
        if li < freeze.frozen_layer_count:
            grads[li] = (np.zeros_like(layer.weight), np.zeros_like(layer.bias))
        else:
            grads[li] = (np.outer(dz, x_in), dz.copy())
        g = layer.weight.T @ dz
    return tuple(grads)


def zero_gradients(m: ModelParams):
    """An all-zero gradient structure shaped like the model's parameters."""
    return tuple((np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in m.layers)


def add_gradients(total, extra):
    """Accumulate two gradient structures (elementwise sum)."""
    return tuple((tw + ew, tb + eb) for (tw, tb), (ew, eb) in zip(total, extra))


def scale_gradients(grads, factor: float):
    return tuple((gw * factor, gb * factor) for gw, gb in grads)


def save_checkpoint(m: ModelParams, metadata: dict, path) -> None:
    """Write the versioned binary checkpoint described in the module docs."""
    meta_bytes = json.dumps(metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(m.layers)))
        for layer in m.layers:
            fh.write(struct.pack("<IIB", layer.out_dim, layer.in_dim, _ACT_CODES[layer.activation]))
        for layer in m.layers:
            fh.write(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"corrupt checkpoint: truncated while reading {what}")
    return data


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint, refusing unknown versions and mangled files."""
    with open(path, "rb") as fh:
        if _read_exact(fh, len(_MAGIC), "magic") != _MAGIC:
            raise CheckpointError("corrupt checkpoint: bad magic string")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )
        (n_layers,) = struct.unpack("<I", _read_exact(fh, 4, "layer count"))
        if n_layers == 0:
            raise CheckpointError("corrupt checkpoint: zero layers")
        shapes = []
        for li in range(n_layers):
            out_dim, in_dim, act = struct.unpack("<IIB", _read_exact(fh, 9, f"layer {li} header"))
            if act not in _ACT_NAMES or out_dim == 0 or in_dim == 0:
                raise CheckpointError(f"corrupt checkpoint: bad layer {li} header")
            shapes.append((out_dim, in_dim, _ACT_NAMES[act]))
        layers = []
        for li, (out_dim, in_dim, act) in enumerate(shapes):
            wbuf = _read_exact(fh, 8 * out_dim * in_dim, f"layer {li} weights")
            bbuf = _read_exact(fh, 8 * out_dim, f"layer {li} bias")
            weight = np.frombuffer(wbuf, dtype="<f8").reshape(out_dim, in_dim)
            bias = np.frombuffer(bbuf, dtype="<f8")
            layers.append(Layer(weight, bias, act))
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        meta_bytes = _read_exact(fh, meta_len, "metadata")
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError("corrupt checkpoint: trailing bytes after metadata")
    try:
        metadata = json.loads(meta_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: bad metadata ({exc})") from None
    try:
        params = ModelParams(tuple(layers))
    except DataError as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from None
    return Checkpoint(version, params, metadata)
