"""Self-weighted grid-graph convolutional classifier.

Each layer is a linear graph propagation (degree-normalized 8-neighbor
stencil with a trainable self-loop weight) followed by two shared-weight
per-vertex transforms, each a matmul + batch norm + ReLU. Global average
pooling over the vertex set maps the equivariant features to an embedding
that a small fully connected head classifies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    DEFAULT_DTYPE,
    BatchNormState,
    Parameter,
    Tape,
    Tensor,
    _accumulate,
    add_bias,
    batch_norm,
    matmul,
    relu,
)
from .grid import NEIGHBOR_OFFSETS, GridGraph, build_grid_graph


@dataclass(frozen=True)
class LayerConfig:
    in_channels: int
    hidden_channels: int
    out_channels: int

    def __post_init__(self):
        if min(self.in_channels, self.hidden_channels, self.out_channels) < 1:
            raise ValueError(f"channel sizes must be positive: {self}")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; every field has a config-file default."""

    width: int = 28
    height: int = 28
    in_channels: int = 1
    channels: tuple[int, ...] = (16, 32, 64, 128, 256, 512)
    hidden_channels: tuple[int, ...] | None = None  # per-layer, defaults to `channels`
    head: tuple[int, ...] = (256,)
    classes: int = 10

    def layer_configs(self) -> list[LayerConfig]:
        chain = (self.in_channels,) + tuple(self.channels)
        hidden = self.hidden_channels or tuple(self.channels)
        if len(hidden) != len(self.channels):
            raise ValueError("hidden_channels must have one entry per layer")
        return [
            LayerConfig(chain[i], hidden[i], chain[i + 1])
            for i in range(len(self.channels))
        ]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


class SwnGcnLayer:
    """One propagation layer: self-weighted stencil pass + two vertex transforms."""

    def __init__(self, config: LayerConfig, index: int, rng: np.random.Generator, dtype):
        name = f"layer{index}"
        self.config = config
        self.beta = Parameter(np.asarray(1.0), f"{name}.beta", dtype=dtype)
        self.w1 = Parameter(_glorot(rng, config.in_channels, config.hidden_channels, dtype),
                            f"{name}.w1")
        self.w2 = Parameter(_glorot(rng, config.hidden_channels, config.out_channels, dtype),
                            f"{name}.w2")
        self.bn1 = BatchNormState(config.hidden_channels, f"{name}.bn1", dtype=dtype)
        self.bn2 = BatchNormState(config.out_channels, f"{name}.bn2", dtype=dtype)

    def parameters(self) -> list[Parameter]:
        return [self.beta, self.w1, self.w2,
                *self.bn1.parameters(), *self.bn2.parameters()]


def _shifted_neighbor_sum(x: np.ndarray) -> np.ndarray:
    """Sum of the 8 border-clipped neighbor shifts of a (..., H, W, C) array."""
    height, width = x.shape[-3], x.shape[-2]
    out = np.zeros_like(x)
    for dr, dc in NEIGHBOR_OFFSETS:
        dst_r = slice(max(0, -dr), height - max(0, dr))
        dst_c = slice(max(0, -dc), width - max(0, dc))
        src_r = slice(max(0, dr), height - max(0, -dr))
        src_c = slice(max(0, dc), width - max(0, -dc))
        out[..., dst_r, dst_c, :] += x[..., src_r, src_c, :]
    return out


def _stencil_apply(values: np.ndarray, graph: GridGraph, inv_sqrt_deg: np.ndarray,
                   inv_deg: np.ndarray, beta: float) -> np.ndarray:
    """Normalized propagation D^(-1/2) (A + beta*I) D^(-1/2) applied per image.

    `values` is (rows, channels) with rows = batch * vertex_count.
    """
    rows, channels = values.shape
    batch = rows // graph.vertex_count
    x = values.reshape(batch, graph.height, graph.width, channels)
    scaled = inv_sqrt_deg * x
    out = inv_sqrt_deg * _shifted_neighbor_sum(scaled) + (beta * inv_deg) * x
    return out.reshape(rows, channels)


def smp_forward(tape: Tape | None, values: Tensor, graph: GridGraph,
                beta: Parameter) -> Tensor:
    """Self-weighted message passing over the grid stencil.

    The operator is symmetric and linear in the features, so the input
    gradient is the same stencil applied to the output gradient; the
    self-weight gradient is sum_i d_i^(-1) <v_i, g_i>.
    """
    rows = values.data.shape[0]
    if rows % graph.vertex_count != 0:
        raise ValueError(
            f"{rows} rows is not a multiple of {graph.vertex_count} vertices"
        )
    dtype = values.data.dtype
    inv_sqrt_deg = (graph.degrees ** -0.5).astype(dtype).reshape(graph.height, graph.width, 1)
    inv_deg = (1.0 / graph.degrees).astype(dtype).reshape(graph.height, graph.width, 1)
    b = float(beta.data)
    out = Tensor(_stencil_apply(values.data, graph, inv_sqrt_deg, inv_deg, b))
    if tape is not None:
        def backward():
            g = out.grad
            if g is None:
                return
            dv = _stencil_apply(g, graph, inv_sqrt_deg, inv_deg, b)
            _accumulate(values, dv)
            batch = g.shape[0] // graph.vertex_count
            x4 = values.data.reshape(batch, graph.height, graph.width, -1)
            g4 = g.reshape(batch, graph.height, graph.width, -1)
            dbeta = np.sum(inv_deg * x4 * g4, dtype=np.float64)
            _accumulate(beta, np.asarray(dbeta, dtype=beta.data.dtype))
        tape.record(backward)
    return out


def sgp_forward(tape: Tape | None, v_hat: Tensor, layer: SwnGcnLayer,
                train: bool) -> Tensor:
    """Two shared-weight vertex transforms: ReLU(BN(x @ W)) twice."""
    h = relu(tape, batch_norm(tape, matmul(tape, v_hat, layer.w1), layer.bn1, train))
    return relu(tape, batch_norm(tape, matmul(tape, h, layer.w2), layer.bn2, train))


def gap(tape: Tape | None, values: Tensor, vertex_count: int) -> Tensor:
    """Global average pooling over each image's vertex block.

    (batch * vertex_count, c) -> (batch, c); accumulation runs in float64
    so the result is insensitive to vertex order.
    """
    rows, channels = values.data.shape
    if rows % vertex_count != 0:
        raise ValueError(f"{rows} rows is not a multiple of {vertex_count} vertices")
    batch = rows // vertex_count
    pooled = values.data.reshape(batch, vertex_count, channels).mean(axis=1, dtype=np.float64)
    out = Tensor(pooled.astype(values.data.dtype))
    if tape is not None:
        def backward():
            g = out.grad
            if g is None:
                return
            scaled = (g / vertex_count).astype(values.data.dtype)
            _accumulate(values, np.repeat(scaled, vertex_count, axis=0))
        tape.record(backward)
    return out


class SwnGcnModel:
    """Layer stack over a fixed grid graph plus the classifier head."""

    def __init__(self, config: ModelConfig, seed: int = 0, dtype=DEFAULT_DTYPE):
        self.config = config
        self.dtype = np.dtype(dtype)
        self.graph = build_grid_graph(config.width, config.height)
        rng = np.random.default_rng(seed)
        self.layers = [
            SwnGcnLayer(lc, i, rng, self.dtype)
            for i, lc in enumerate(config.layer_configs())
        ]
        self.head: list[tuple[Parameter, Parameter]] = []
        widths = (config.channels[-1],) + tuple(config.head) + (config.classes,)
        for j in range(len(widths) - 1):
            w = Parameter(_glorot(rng, widths[j], widths[j + 1], self.dtype), f"head{j}.weight")
            b = Parameter(np.zeros(widths[j + 1]), f"head{j}.bias", dtype=self.dtype)
            self.head.append((w, b))

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        for w, b in self.head:
            params.extend([w, b])
        return params

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def _stack_images(self, images: np.ndarray) -> Tensor:
        images = np.asarray(images)
        if images.ndim == 3:
            images = images[:, :, :, None]
        batch, height, width, channels = images.shape
        if (height, width) != (self.config.height, self.config.width):
            raise ValueError(
                f"image size {height}x{width} does not match model grid "
                f"{self.config.height}x{self.config.width}"
            )
        if channels != self.config.in_channels:
            raise ValueError(
                f"{channels} channels do not match model input {self.config.in_channels}"
            )
        flat = images.reshape(batch * height * width, channels)
        return Tensor(flat.astype(self.dtype, copy=False))

    def vertex_features(self, images: np.ndarray, tape: Tape | None = None,
                        train: bool = False) -> list[Tensor]:
        """Features after every propagation layer (eval-style list, index l)."""
        x = self._stack_images(images)
        out = []
        for layer in self.layers:
            x = smp_forward(tape, x, self.graph, layer.beta)
            x = sgp_forward(tape, x, layer, train)
            out.append(x)
        return out

    def forward(self, images: np.ndarray, tape: Tape | None = None,
                train: bool = False) -> Tensor:
        """Logits for a batch of images, shape (batch, classes)."""
        features = self.vertex_features(images, tape=tape, train=train)
        h = gap(tape, features[-1], self.graph.vertex_count)
        for w, b in self.head[:-1]:
            h = relu(tape, add_bias(tape, matmul(tape, h, w), b))
        w, b = self.head[-1]
        return add_bias(tape, matmul(tape, h, w), b)

    def embed(self, images: np.ndarray) -> np.ndarray:
        """Eval-mode pooled embedding, shape (batch, channels[-1])."""
        features = self.vertex_features(images)
        return gap(None, features[-1], self.graph.vertex_count).data

    def logits(self, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """Eval-mode logits computed in image chunks to bound memory."""
        images = np.asarray(images)
        chunks = [
            self.forward(images[i:i + batch_size]).data
            for i in range(0, len(images), batch_size)
        ]
        return np.concatenate(chunks, axis=0)

    def predict(self, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
        return self.logits(images, batch_size=batch_size).argmax(axis=1)


def init_model(config: ModelConfig, seed: int = 0, dtype=DEFAULT_DTYPE) -> SwnGcnModel:
    """Deterministically initialized model: Glorot-uniform weights, unit
    self-loop weights, identity batch-norm affine."""
    return SwnGcnModel(config, seed=seed, dtype=dtype)
