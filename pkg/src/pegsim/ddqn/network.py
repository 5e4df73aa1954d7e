"""From-scratch Q-network: topology, flat parameters, forward and backward.

The network is a plain feed-forward stack of strided valid convolutions and
fully-connected layers with rectified-linear activations everywhere except
the output. All parameters live in one flat array with per-layer offsets,
which keeps target-network syncing, checkpointing and finite-difference
probing trivial.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CheckpointError",
    "Conv",
    "Dense",
    "QNetwork",
    "default_feature_topology",
    "default_vision_topology",
    "load_checkpoint",
    "save_checkpoint",
]


@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel: int
    stride: int


@dataclass(frozen=True)
class Dense:
    width: int


LayerSpec = Conv | Dense


def default_vision_topology(n_actions: int = 27) -> tuple[LayerSpec, ...]:
    """Smallest standard frame-stack topology for 84x84x4 input."""
    return (Conv(16, 8, 4), Conv(32, 4, 2), Dense(256), Dense(n_actions))


def default_feature_topology(n_actions: int = 27) -> tuple[LayerSpec, ...]:
    return (Dense(64), Dense(64), Dense(n_actions))


def _im2col(x: np.ndarray, k: int, s: int) -> tuple[np.ndarray, int, int]:
    """Extract conv patches as rows of shape (B*oh*ow, C*k*k)."""
    b, c, h, w = x.shape
    oh = (h - k) // s + 1
    ow = (w - k) // s + 1
    shape = (b, c, oh, ow, k, k)
    strides = (
        x.strides[0], x.strides[1],
        x.strides[2] * s, x.strides[3] * s,
        x.strides[2], x.strides[3],
    )
    patches = np.lib.stride_tricks.as_strided(x, shape=shape, strides=strides)
    cols = patches.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, c * k * k)
    return np.ascontiguousarray(cols), oh, ow


def _col2im(dcols: np.ndarray, x_shape: tuple[int, ...], k: int, s: int,
            oh: int, ow: int) -> np.ndarray:
    b, c, _, _ = x_shape
    dx = np.zeros(x_shape, dtype=dcols.dtype)
    dpatch = dcols.reshape(b, oh, ow, c, k, k).transpose(0, 3, 1, 2, 4, 5)
    for ki in range(k):
        for kj in range(k):
            dx[:, :, ki:ki + oh * s:s, kj:kj + ow * s:s] += dpatch[:, :, :, :, ki, kj]
    return dx


class QNetwork:
    """Action-value network over a fixed topology.

    Parameters are a single flat vector ``theta``; ``layer_slices`` maps each
    layer to its (weight, bias) views. Forward is deterministic; backward
    returns a gradient vector of the same flat shape.
    """

    def __init__(
        self,
        input_shape: tuple[int, ...],
        layers: tuple[LayerSpec, ...] | list[LayerSpec],
        seed: int | np.random.Generator | np.random.SeedSequence = 0,
        dtype: np.dtype = np.float32,
    ) -> None:
        if not layers or not isinstance(layers[-1], Dense):
            raise ValueError("topology must end in a fully-connected layer")
        self.input_shape = tuple(int(v) for v in input_shape)
        self.layers = tuple(layers)
        self.dtype = np.dtype(dtype)

        self._meta: list[dict] = []
        shape = self.input_shape
        offset = 0
        for spec in self.layers:
            if isinstance(spec, Conv):
                if len(shape) != 3:
                    raise ValueError("convolution requires a (C, H, W) input")
                c, h, w = shape
                oh = (h - spec.kernel) // spec.stride + 1
                ow = (w - spec.kernel) // spec.stride + 1
                if oh <= 0 or ow <= 0:
                    raise ValueError("kernel does not fit the input")
                fan_in = c * spec.kernel * spec.kernel
                w_shape = (spec.out_channels, fan_in)
                b_shape = (spec.out_channels,)
                shape = (spec.out_channels, oh, ow)
            else:
                fan_in = int(np.prod(shape))
                w_shape = (spec.width, fan_in)
                b_shape = (spec.width,)
                shape = (spec.width,)
            w_size = int(np.prod(w_shape))
            b_size = int(np.prod(b_shape))
            self._meta.append({
                "spec": spec,
                "fan_in": fan_in,
                "w_shape": w_shape,
                "w_slice": slice(offset, offset + w_size),
                "b_slice": slice(offset + w_size, offset + w_size + b_size),
            })
            offset += w_size + b_size
        self.n_actions = shape[0]
        self.num_params = offset

        rng = np.random.default_rng(seed)
        self.theta = np.zeros(offset, dtype=self.dtype)
        for meta in self._meta:
            limit = 1.0 / np.sqrt(meta["fan_in"])
            block = rng.uniform(-limit, limit, size=meta["w_shape"])
            self.theta[meta["w_slice"]] = block.reshape(-1).astype(self.dtype)
            # biases start at zero

    def clone_topology(self, seed: int | np.random.Generator | np.random.SeedSequence) -> "QNetwork":
        return QNetwork(self.input_shape, self.layers, seed=seed, dtype=self.dtype)

    def weights(self, layer: int) -> tuple[np.ndarray, np.ndarray]:
        meta = self._meta[layer]
        w = self.theta[meta["w_slice"]].reshape(meta["w_shape"])
        b = self.theta[meta["b_slice"]]
        return w, b

    def set_weights(self, layer: int, w: np.ndarray, b: np.ndarray | None = None) -> None:
        meta = self._meta[layer]
        self.theta[meta["w_slice"]] = np.asarray(w, dtype=self.dtype).reshape(-1)
        if b is not None:
            self.theta[meta["b_slice"]] = np.asarray(b, dtype=self.dtype).reshape(-1)

    def _prepare(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=self.dtype)
        if arr.shape == self.input_shape:
            return arr[None, ...], True
        if arr.shape[1:] == self.input_shape:
            return arr, False
        raise ValueError(
            f"input shape {arr.shape} does not match network input {self.input_shape}"
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, _ = self._run(x, keep_cache=False)
        return out

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        return self._run(x, keep_cache=True)

    def _run(self, x: np.ndarray, keep_cache: bool) -> tuple[np.ndarray, list]:
        arr, single = self._prepare(x)
        cache: list = []
        cur = arr
        last = len(self._meta) - 1
        for i, meta in enumerate(self._meta):
            spec = meta["spec"]
            w = self.theta[meta["w_slice"]].reshape(meta["w_shape"])
            b = self.theta[meta["b_slice"]]
            entry: dict = {"meta": meta}
            if isinstance(spec, Conv):
                cols, oh, ow = _im2col(cur, spec.kernel, spec.stride)
                z = cols @ w.T + b
                entry.update(cols=cols, x_shape=cur.shape, oh=oh, ow=ow)
                z = z.reshape(cur.shape[0], oh, ow, spec.out_channels)
                z = z.transpose(0, 3, 1, 2)
            else:
                flat = cur.reshape(cur.shape[0], -1)
                z = flat @ w.T + b
                entry.update(x=flat, x_shape=cur.shape)
            if i != last:
                entry["mask"] = z > 0
                cur = z * entry["mask"]
            else:
                cur = z
            if keep_cache:
                cache.append(entry)
        out = cur[0] if single else cur
        return out, cache

    def backward(self, cache: list, dout: np.ndarray) -> np.ndarray:
        """Backpropagate d(loss)/d(output); returns the flat parameter gradient."""
        grad = np.zeros_like(self.theta)
        d = np.asarray(dout, dtype=self.dtype)
        if d.ndim == 1:
            d = d[None, :]
        for i in range(len(cache) - 1, -1, -1):
            entry = cache[i]
            meta = entry["meta"]
            spec = meta["spec"]
            w = self.theta[meta["w_slice"]].reshape(meta["w_shape"])
            if "mask" in entry:
                d = d * entry["mask"]
            if isinstance(spec, Conv):
                b_, oh, ow = entry["x_shape"][0], entry["oh"], entry["ow"]
                d_cols = d.transpose(0, 2, 3, 1).reshape(b_ * oh * ow, spec.out_channels)
                grad[meta["w_slice"]] = (d_cols.T @ entry["cols"]).reshape(-1)
                grad[meta["b_slice"]] = d_cols.sum(axis=0)
                dx_cols = d_cols @ w
                d = _col2im(dx_cols, entry["x_shape"], spec.kernel, spec.stride, oh, ow)
            else:
                grad[meta["w_slice"]] = (d.T @ entry["x"]).reshape(-1)
                grad[meta["b_slice"]] = d.sum(axis=0)
                d = (d @ w).reshape(entry["x_shape"])
        return grad

    def topology_descriptor(self) -> list[list]:
        out = []
        for spec in self.layers:
            if isinstance(spec, Conv):
                out.append(["conv", spec.out_channels, spec.kernel, spec.stride])
            else:
                out.append(["fc", spec.width])
        return out


def _layers_from_descriptor(desc: list[list]) -> tuple[LayerSpec, ...]:
    layers: list[LayerSpec] = []
    for item in desc:
        if item[0] == "conv":
            layers.append(Conv(int(item[1]), int(item[2]), int(item[3])))
        elif item[0] == "fc":
            layers.append(Dense(int(item[1])))
        else:
            raise CheckpointError(f"unknown layer kind {item[0]!r}")
    return tuple(layers)


class CheckpointError(ValueError):
    """Raised for malformed, truncated or mismatched checkpoint files."""


_MAGIC = b"PGQN"
CHECKPOINT_VERSION = 1


def save_checkpoint(net: QNetwork, target: QNetwork, path: str) -> None:
    """Write both parameter sets with a versioned self-describing header."""
    if net.theta.shape != target.theta.shape:
        raise CheckpointError("online and target parameter shapes differ")
    header = {
        "input_shape": list(net.input_shape),
        "layers": net.topology_descriptor(),
        "actions": net.n_actions,
        "params": int(net.num_params),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(net.theta.astype("<f4").tobytes())
        fh.write(target.theta.astype("<f4").tobytes())


def load_checkpoint(path: str, expected_actions: int | None = None) -> tuple[QNetwork, QNetwork]:
    """Load (online, target) networks; validates header, sizes and action count."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != _MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    hlen = struct.unpack("<I", raw[8:12])[0]
    if len(raw) < 12 + hlen:
        raise CheckpointError("truncated header")
    try:
        header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from exc

    layers = _layers_from_descriptor(header["layers"])
    input_shape = tuple(header["input_shape"])
    net = QNetwork(input_shape, layers, seed=0)
    if net.num_params != header.get("params"):
        raise CheckpointError("declared parameter count does not match topology")
    if expected_actions is not None and net.n_actions != expected_actions:
        raise CheckpointError(
            f"checkpoint has {net.n_actions} actions, expected {expected_actions}"
        )

    body = raw[12 + hlen:]
    need = 2 * net.num_params * 4
    if len(body) != need:
        raise CheckpointError(
            f"parameter payload is {len(body)} bytes, expected {need}"
        )
    flat = np.frombuffer(body, dtype="<f4")
    target = net.clone_topology(seed=0)
    net.theta = flat[: net.num_params].astype(np.float32).copy()
    target.theta = flat[net.num_params:].astype(np.float32).copy()
    return net, target
