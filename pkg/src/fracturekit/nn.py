"""Dense-tensor layers with forward/backward passes, the Adam optimizer,
and a finite-difference gradient checker.

All layers operate on float32 arrays with a leading batch dimension:
(N, C, H, W) for spatial layers, (N, D) after flattening. Tensors are
treated as immutable between layer calls; each layer caches what its
backward pass needs.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgumentError

F32 = np.float32


class Layer:
    """Base layer: parameter-free unless `params`/`grads` are non-empty."""

    params: list[np.ndarray]
    grads: list[np.ndarray]

    def __init__(self):
        self.params = []
        self.grads = []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv3x3(Layer):
    """3x3 convolution, stride 1, zero same-padding (VGG convention)."""

    def __init__(self, in_ch: int, out_ch: int, weight=None, bias=None):
        super().__init__()
        self.in_ch, self.out_ch = in_ch, out_ch
        w = np.zeros((out_ch, in_ch, 3, 3), F32) if weight is None else np.asarray(weight, F32)
        b = np.zeros(out_ch, F32) if bias is None else np.asarray(bias, F32)
        if w.shape != (out_ch, in_ch, 3, 3) or b.shape != (out_ch,):
            raise InvalidArgumentError(f"conv parameter shapes {w.shape}/{b.shape} inconsistent")
        self.params = [w, b]
        self.grads = [np.zeros_like(w), np.zeros_like(b)]
        self._cols = None

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise InvalidArgumentError(f"conv expects (N,{self.in_ch},H,W), got {x.shape}")
        w, b = self.params
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        cols = sliding_window_view(xp, (3, 3), axis=(2, 3))  # (N,C,H,W,3,3)
        self._cols = cols
        y = np.einsum("nchwij,ocij->nohw", cols, w, optimize=True)
        return (y + b[None, :, None, None]).astype(F32, copy=False)

    def backward(self, grad):
        w, _ = self.params
        self.grads[0] = np.einsum("nchwij,nohw->ocij", self._cols, grad,
                                  optimize=True).astype(F32, copy=False)
        self.grads[1] = grad.sum(axis=(0, 2, 3)).astype(F32, copy=False)
        gp = np.pad(grad, ((0, 0), (0, 0), (1, 1), (1, 1)))
        gcols = sliding_window_view(gp, (3, 3), axis=(2, 3))
        wflip = w[:, :, ::-1, ::-1]
        return np.einsum("nohwij,ocij->nchw", gcols, wflip,
                         optimize=True).astype(F32, copy=False)


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2; gradient routes to the first (row-major)
    argmax within each window."""

    def forward(self, x):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise InvalidArgumentError(f"maxpool needs even spatial dims, got {h}x{w}")
        win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        flat = win.reshape(n, c, h // 2, w // 2, 4)  # window in row-major order
        self._arg = np.argmax(flat, axis=-1)         # first max wins ties
        self._in_shape = x.shape
        return np.take_along_axis(flat, self._arg[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, c, h, w = self._in_shape
        flat = np.zeros((n, c, h // 2, w // 2, 4), F32)
        np.put_along_axis(flat, self._arg[..., None], grad[..., None], axis=-1)
        win = flat.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return win.reshape(n, c, h, w)


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, F32(0))

    def backward(self, grad):
        return np.where(self._mask, grad, F32(0))


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class GlobalAvgPool(Layer):
    """Average each channel plane: (N, C, H, W) -> (N, C)."""

    def forward(self, x):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        n, c, h, w = self._shape
        return np.broadcast_to(grad[:, :, None, None] / F32(h * w), self._shape).astype(F32)


class Dense(Layer):
    """Affine map y = x W^T + b with weight shape (out_units, in_units)."""

    def __init__(self, in_units: int, out_units: int, weight=None, bias=None):
        super().__init__()
        self.in_units, self.out_units = in_units, out_units
        w = np.zeros((out_units, in_units), F32) if weight is None else np.asarray(weight, F32)
        b = np.zeros(out_units, F32) if bias is None else np.asarray(bias, F32)
        if w.shape != (out_units, in_units) or b.shape != (out_units,):
            raise InvalidArgumentError(f"dense parameter shapes {w.shape}/{b.shape} inconsistent")
        self.params = [w, b]
        self.grads = [np.zeros_like(w), np.zeros_like(b)]

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_units:
            raise InvalidArgumentError(f"dense expects (N,{self.in_units}), got {x.shape}")
        self._x = x
        w, b = self.params
        return x @ w.T + b

    def backward(self, grad):
        w, _ = self.params
        self.grads[0] = (grad.T @ self._x).astype(F32, copy=False)
        self.grads[1] = grad.sum(axis=0).astype(F32, copy=False)
        return (grad @ w).astype(F32, copy=False)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_ce_forward(logits: np.ndarray, labels: np.ndarray):
    """Sparse categorical cross-entropy.

    logits: (N, K); labels: (N,) integer class indices.
    Returns (per-sample losses (N,), probabilities (N, K)).
    """
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(np.asarray(labels))
    k = logits.shape[1]
    if labels.min() < 0 or labels.max() >= k:
        raise InvalidArgumentError(f"label out of range for {k} classes")
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    losses = lse - z[np.arange(len(labels)), labels]
    return losses, softmax(logits)


def softmax_ce_backward(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of summed per-sample CE loss w.r.t. logits: p - one_hot."""
    grad = probs.copy()
    grad[np.arange(len(labels)), labels] -= 1
    return grad.astype(F32, copy=False)


class Adam:
    """Adam with bias correction; defaults beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, params: list[np.ndarray], lr: float = 5e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p, dtype=np.float64) for p in params]

    def step(self, grads: list[np.ndarray]):
        if len(grads) != len(self.params):
            raise InvalidArgumentError("gradient list length mismatch")
        self.t += 1
        b1t = 1 - self.beta1 ** self.t
        b2t = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise InvalidArgumentError(f"gradient shape {g.shape} != param {p.shape}")
            g64 = g.astype(np.float64)
            m *= self.beta1
            m += (1 - self.beta1) * g64
            v *= self.beta2
            v += (1 - self.beta2) * g64 * g64
            update = self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p -= update.astype(p.dtype)


def finite_difference_check(layer: Layer, x: np.ndarray, eps: float = 1e-3,
                            rng=None) -> float:
    """Max relative error of analytic gradients vs central finite differences.

    The layer output is reduced to a scalar s = sum(y * r) for a fixed random
    projection r; analytic input/parameter gradients are compared element by
    element against (s(p+eps) - s(p-eps)) / (2 eps).
    """
    rng = rng or np.random.default_rng(0)
    x = np.asarray(x, F32)
    y = layer.forward(x)
    r = rng.standard_normal(y.shape).astype(F32)
    analytic_dx = layer.backward(r)
    analytic_dp = [g.copy() for g in layer.grads]

    def scalar():
        return float(np.sum(layer.forward(x).astype(np.float64) * r))

    # Scale-aware floor: single-precision forward passes leave finite
    # differences with absolute noise on the order of 1e-4, so elements whose
    # true gradient is tiny relative to the layer's overall gradient scale are
    # judged in units of that scale (1% floor) rather than their own near-zero magnitude.
    grad_scale = max(
        [float(np.abs(analytic_dx).max())]
        + [float(np.abs(g).max()) for g in analytic_dp if g.size],
        default=0.0,
    )

    def rel_err(a, num):
        denom = max(abs(a), abs(num), 1e-2 * grad_scale)
        return abs(a - num) if denom < 1e-6 else abs(a - num) / denom

    worst = 0.0
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + eps
        plus = scalar()
        x[idx] = orig - eps
        minus = scalar()
        x[idx] = orig
        worst = max(worst, rel_err(float(analytic_dx[idx]), (plus - minus) / (2 * eps)))
    for p, dp in zip(layer.params, analytic_dp):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + eps
            plus = scalar()
            p[idx] = orig - eps
            minus = scalar()
            p[idx] = orig
            worst = max(worst, rel_err(float(dp[idx]), (plus - minus) / (2 * eps)))
    return worst
