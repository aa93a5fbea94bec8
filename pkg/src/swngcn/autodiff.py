"""Reverse-mode differentiation over dense numpy tensors.

The primitive set is closed: matrix product, bias add, ReLU, batch
normalization, and softmax cross-entropy live here; the graph-propagation
and pooling primitives are registered on the same tape by the model module.
Training runs in float32; gradient checking builds float64 models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_DTYPE = np.float32


class Tensor:
    """Dense real tensor plus the gradient slot populated by backward."""

    __slots__ = ("data", "grad")

    def __init__(self, data, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """Trainable tensor with a stable name; its gradient persists across steps."""

    __slots__ = ("name",)

    def __init__(self, data, name: str, dtype=None):
        super().__init__(data, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.data.shape})"


class Tape:
    """Ordered record of executed primitives; backward replays it in reverse."""

    def __init__(self):
        self._steps: list = []

    def record(self, backward_fn) -> None:
        self._steps.append(backward_fn)

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss) = 1 and run every recorded step in reverse.

        Steps are dropped as they run, so saved forward buffers are released
        during the sweep.
        """
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones_like(loss.data)
        steps = self._steps
        while steps:
            steps.pop()()


def _accumulate(t: Tensor, grad: np.ndarray, fresh: bool = True) -> None:
    # fresh=True means `grad` is a newly allocated array this tensor may own.
    if t.grad is None:
        t.grad = grad if fresh else grad.copy()
    else:
        t.grad += grad


def matmul(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    """Matrix product a @ b for 2-d tensors."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data)
    if tape is not None:
        def backward():
            g = out.grad
            if g is None:
                return
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)
        tape.record(backward)
    return out


def add_bias(tape: Tape | None, x: Tensor, bias: Tensor) -> Tensor:
    """Row-broadcast bias addition."""
    if bias.data.shape != (x.data.shape[-1],):
        raise ValueError(f"bias shape {bias.data.shape} does not match {x.data.shape}")
    out = Tensor(x.data + bias.data)
    if tape is not None:
        def backward():
            g = out.grad
            if g is None:
                return
            _accumulate(x, g, fresh=False)
            _accumulate(bias, g.sum(axis=0))
        tape.record(backward)
    return out


def relu(tape: Tape | None, x: Tensor) -> Tensor:
    """Elementwise max(0, x); gradient is masked where x <= 0."""
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, x.data.dtype.type(0)))
    if tape is not None:
        def backward():
            g = out.grad
            if g is None:
                return
            _accumulate(x, g * mask)
        tape.record(backward)
    return out


class BatchNormState:
    """Per-channel batch normalization with running statistics.

    Statistics are taken over all rows (batch and vertices pooled), which
    keeps the operation equivariant under any row permutation.
    """

    def __init__(self, channels: int, name: str, dtype=DEFAULT_DTYPE,
                 eps: float = 1e-5, momentum: float = 0.1):
        self.gamma = Parameter(np.ones(channels), f"{name}.gamma", dtype=dtype)
        self.shift = Parameter(np.zeros(channels), f"{name}.shift", dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.eps = eps
        self.momentum = momentum

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.shift]


def batch_norm(tape: Tape | None, x: Tensor, state: BatchNormState, train: bool) -> Tensor:
    """Normalize per channel; train mode uses batch statistics and updates
    the running ones, eval mode applies the frozen affine map."""
    gamma, shift = state.gamma, state.shift
    if train:
        rows = x.data.shape[0]
        if rows < 2:
            raise ValueError("batch norm in train mode needs at least 2 rows")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + state.eps)
        xhat = (x.data - mu) * inv_std
        m = state.momentum
        state.running_mean = ((1.0 - m) * state.running_mean + m * mu).astype(x.data.dtype)
        unbiased = var * rows / max(rows - 1, 1)
        state.running_var = ((1.0 - m) * state.running_var + m * unbiased).astype(x.data.dtype)
    else:
        inv_std = 1.0 / np.sqrt(state.running_var + state.eps)
        xhat = (x.data - state.running_mean) * inv_std
    out = Tensor(xhat * gamma.data + shift.data)
    if tape is not None:
        def backward():
            g = out.grad
            if g is None:
                return
            _accumulate(gamma, (g * xhat).sum(axis=0))
            _accumulate(shift, g.sum(axis=0))
            dxhat = g * gamma.data
            if train:
                # full chain rule through the batch mean and variance
                dx = inv_std * (dxhat - dxhat.mean(axis=0)
                                - xhat * (dxhat * xhat).mean(axis=0))
            else:
                dx = dxhat * inv_std
            _accumulate(x, dx)
        tape.record(backward)
    return out


def softmax_cross_entropy(tape: Tape | None, logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-softmax of the true class over the batch."""
    labels = np.asarray(labels)
    batch, classes = logits.data.shape
    if labels.shape != (batch,):
        raise ValueError(f"expected {batch} labels, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError(f"label out of range [0, {classes})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(batch), labels].mean()
    out = Tensor(np.asarray(loss, dtype=logits.data.dtype))
    if tape is not None:
        def backward():
            g = out.grad
            if g is None:
                return
            p = np.exp(log_probs)
            p[np.arange(batch), labels] -= 1.0
            _accumulate(logits, (float(g) / batch) * p)
        tape.record(backward)
    return out


@dataclass
class GradCheckReport:
    """Outcome of comparing reverse-mode gradients to central differences."""

    max_relative_error: float
    worst_parameter: str
    tolerance: float
    per_parameter: dict[str, float]

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def grad_check(loss_fn, params: list[Parameter], *, step: float = 1e-4,
               tolerance: float = 1e-4) -> GradCheckReport:
    """Check reverse-mode gradients of `loss_fn` against central differences.

    `loss_fn(tape)` must rebuild the forward pass from the current parameter
    values and return the scalar loss Tensor; it is called with a tape once
    for the analytic gradients and with tape=None for the perturbed values.
    The per-parameter error is the largest entrywise deviation relative to
    that parameter's largest gradient magnitude (floored at 1e-6).
    """
    for p in params:
        p.zero_grad()
    tape = Tape()
    loss = loss_fn(tape)
    tape.backward(loss)
    analytic = {p.name: p.grad.copy() for p in params}

    per_parameter: dict[str, float] = {}
    worst = ("", 0.0)
    for p in params:
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = loss_fn(None).item()
            flat[i] = orig - step
            f_minus = loss_fn(None).item()
            flat[i] = orig
            num_flat[i] = (f_plus - f_minus) / (2.0 * step)
        a = analytic[p.name]
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(numeric))), 1e-6)
        err = float(np.max(np.abs(a - numeric))) / scale
        per_parameter[p.name] = err
        if err >= worst[1]:
            worst = (p.name, err)
    return GradCheckReport(
        max_relative_error=worst[1],
        worst_parameter=worst[0],
        tolerance=tolerance,
        per_parameter=per_parameter,
    )
