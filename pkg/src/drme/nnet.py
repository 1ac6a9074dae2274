"""Dense ReLU network with exact backprop w.r.t. parameters and inputs.

Everything is float64. Models are treated as immutable values: ``sgd_step``
returns a new model rather than mutating in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core


class ShapeError(ValueError):
    pass


class EmptyBatchError(ValueError):
    pass


class LabelError(ValueError):
    pass


@dataclass
class Mlp:
    """Ordered dense layers (W: out x in, b: out). ReLU hidden, raw logits out."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise ShapeError("need matching, nonempty weight/bias lists")
        self.weights = [np.ascontiguousarray(W, dtype=np.float64) for W in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]
        prev = None
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: W must be (out, in) with matching bias")
            if prev is not None and W.shape[1] != prev:
                raise ShapeError(f"layer {i}: input dim {W.shape[1]} != previous output {prev}")
            prev = W.shape[0]
        if not all(np.isfinite(W).all() and np.isfinite(b).all()
                   for W, b in zip(self.weights, self.biases)):
            raise ValueError("non-finite parameter values")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def num_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def flat_params(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_params(self, flat: np.ndarray) -> "Mlp":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.num_params,):
            raise ShapeError(f"expected {self.num_params} parameters, got {flat.shape}")
        ws, bs, off = [], [], 0
        for W, b in zip(self.weights, self.biases):
            ws.append(flat[off:off + W.size].reshape(W.shape).copy())
            off += W.size
            bs.append(flat[off:off + b.size].copy())
            off += b.size
        return Mlp(ws, bs)

    def copy(self) -> "Mlp":
        return Mlp([W.copy() for W in self.weights], [b.copy() for b in self.biases])


@dataclass
class Batch:
    """Feature matrix plus integer labels; task ids ride along but are never
    read by any training-path code."""

    inputs: np.ndarray
    labels: np.ndarray
    tasks: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ShapeError("inputs must be (n, d) and labels (n,)")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError("inputs/labels length mismatch")

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class GradBundle:
    loss: float
    param_grad: np.ndarray
    input_grads: np.ndarray


def init_mlp(sizes: list[int], seed=0) -> Mlp:
    """Glorot-uniform initialized network, e.g. sizes=[16, 64, 10]."""
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return Mlp(ws, bs)


def forward(model: Mlp, inputs: np.ndarray) -> np.ndarray:
    """Logits for a batch of inputs, shape (n, C)."""
    X = np.ascontiguousarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.in_dim:
        raise ShapeError(f"expected inputs (n, {model.in_dim}), got {X.shape}")
    return _core.mlp_forward(model.weights, model.biases, X)


def loss_grads(model: Mlp, batch: Batch) -> GradBundle:
    """Mean softmax cross-entropy plus exact gradients (params and inputs)."""
    if len(batch) == 0:
        raise EmptyBatchError("loss_grads needs a nonempty batch")
    if batch.inputs.shape[1] != model.in_dim:
        raise ShapeError(f"expected inputs (n, {model.in_dim}), got {batch.inputs.shape}")
    if batch.labels.min() < 0 or batch.labels.max() >= model.out_dim:
        raise LabelError(f"labels must lie in [0, {model.out_dim})")
    loss, dWs, dbs, dX = _core.mlp_loss_grads(
        model.weights, model.biases, batch.inputs, batch.labels)
    parts = []
    for dW, db in zip(dWs, dbs):
        parts.append(dW.ravel())
        parts.append(db)
    return GradBundle(loss=loss, param_grad=np.concatenate(parts), input_grads=dX)


def input_grads(model: Mlp, batch: Batch) -> np.ndarray:
    """Gradient of the mean loss w.r.t. the inputs only.

    Bit-identical to ``loss_grads(...).input_grads`` but skips the
    parameter-gradient accumulation (the evolution hot path only needs dX).
    """
    if len(batch) == 0:
        raise EmptyBatchError("input_grads needs a nonempty batch")
    if batch.inputs.shape[1] != model.in_dim:
        raise ShapeError(f"expected inputs (n, {model.in_dim}), got {batch.inputs.shape}")
    if batch.labels.min() < 0 or batch.labels.max() >= model.out_dim:
        raise LabelError(f"labels must lie in [0, {model.out_dim})")
    return _core.mlp_input_grads(model.weights, model.biases,
                                 batch.inputs, batch.labels)


def mixed_grad_fd(model: Mlp, batch: Batch, v: np.ndarray,
                  fd_eps: float = 1e-3) -> np.ndarray:
    """Central-difference estimate of grad_x(grad_theta L . v).

    Perturbs parameters along the unit direction of v and rescales by |v|;
    exactly zero when v is zero.
    """
    if fd_eps <= 0:
        raise ValueError("fd_eps must be positive")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.num_params,):
        raise ShapeError(f"direction must have length {model.num_params}")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros_like(batch.inputs)
    theta = model.flat_params()
    vhat = v / norm
    g_plus = input_grads(model.with_params(theta + fd_eps * vhat), batch)
    g_minus = input_grads(model.with_params(theta - fd_eps * vhat), batch)
    return (g_plus - g_minus) * (norm / (2.0 * fd_eps))


def sgd_step(model: Mlp, grad: np.ndarray, lr: float) -> Mlp:
    """theta <- theta - lr * grad, returned as a new model."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != (model.num_params,):
        raise ShapeError(f"gradient must have length {model.num_params}")
    if lr < 0:
        raise ValueError("lr must be nonnegative")
    return model.with_params(model.flat_params() - lr * grad)
