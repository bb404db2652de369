"""Feed-forward layers: 3x3 convolution, batch norm, frequency pooling, linear.

Array layout is channels-last (batch, time, freq, channels) for the 2-D
layers and (..., features) for Linear and the activations.  Each layer caches
what its backward pass needs during forward; backward returns the input
gradient and accumulates into parameter ``grad`` buffers.  No layer ever
mutates its input or its gradient argument.

Large intermediates live in per-layer persistent workspaces: at CRNN sizes
the layers are memory-bound, and repeatedly faulting in fresh hundred-MB
allocations costs far more than the arithmetic.
"""

from __future__ import annotations

import numpy as np

from .core import Param, glorot_uniform


class ShapeMismatchError(ValueError):
    """Input shape inconsistent with the layer's parameters."""


class Workspace:
    """Reusable buffers keyed by (name, shape, dtype)."""

    def __init__(self):
        self._bufs = {}

    def get(self, name: str, shape, dtype) -> np.ndarray:
        key = (name, tuple(shape), np.dtype(dtype))
        buf = self._bufs.get(key)
        if buf is None:
            buf = np.empty(shape, dtype=dtype)
            self._bufs[key] = buf
        return buf

    def zeros(self, name: str, shape, dtype) -> np.ndarray:
        buf = self.get(name, shape, dtype)
        buf[...] = 0
        return buf


class Conv2d3x3:
    """3x3 same-padded convolution (cross-correlation), stride 1.

    Input (B, T, F, C_in) -> output (B, T, F, C_out).  Runs as one GEMM over
    an im2col matrix built from nine contiguous tap copies.
    """

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 dtype=np.float64):
        fan_in, fan_out = in_channels * 9, out_channels * 9
        self.weight = Param(glorot_uniform(rng, (out_channels, in_channels, 3, 3),
                                           fan_in, fan_out, dtype))
        self.bias = Param(np.zeros(out_channels, dtype=dtype))
        self._ws = Workspace()
        self._cache = None

    def params(self):
        return [self.weight, self.bias]

    def _gemm_weight(self) -> np.ndarray:
        # (O, C, 3, 3) -> (9C, O) with tap-major rows matching the cols build
        return np.ascontiguousarray(self.weight.data.transpose(2, 3, 1, 0)
                                    .reshape(-1, self.weight.shape[0]))

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        c_in, c_out = self.weight.shape[1], self.weight.shape[0]
        if x.ndim != 4 or x.shape[3] != c_in:
            raise ShapeMismatchError(f"expected (B,T,F,{c_in}), got {x.shape}")
        b, t, f, _ = x.shape
        xp = self._ws.zeros("xp", (b, t + 2, f + 2, c_in), x.dtype)
        xp[:, 1:-1, 1:-1, :] = x
        cols = self._ws.get("cols", (b, t, f, 9 * c_in), x.dtype)
        for k in range(9):
            i, j = divmod(k, 3)
            cols[..., k * c_in:(k + 1) * c_in] = xp[:, i:i + t, j:j + f, :]
        y = self._ws.get("y", (b, t, f, c_out), x.dtype)
        np.matmul(cols.reshape(-1, 9 * c_in),
                  self._gemm_weight().astype(x.dtype, copy=False),
                  out=y.reshape(-1, c_out))
        y += self.bias.data.astype(x.dtype, copy=False)
        self._cache = (cols, (b, t, f))
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        cols, (b, t, f) = self._cache
        c_in, c_out = self.weight.shape[1], self.weight.shape[0]
        dy_flat = dy.reshape(-1, c_out)
        dw_gemm = cols.reshape(-1, 9 * c_in).T @ dy_flat            # (9C, O)
        self.weight.grad += (dw_gemm.reshape(3, 3, c_in, c_out)
                             .transpose(3, 2, 0, 1).astype(self.weight.grad.dtype))
        self.bias.grad += dy_flat.sum(axis=0)
        dcols = self._ws.get("dcols", (b, t, f, 9 * c_in), dy.dtype)
        np.matmul(dy_flat, self._gemm_weight().astype(dy.dtype, copy=False).T,
                  out=dcols.reshape(-1, 9 * c_in))
        dxp = self._ws.zeros("dxp", (b, t + 2, f + 2, c_in), dy.dtype)
        for k in range(9):
            i, j = divmod(k, 3)
            dxp[:, i:i + t, j:j + f, :] += dcols[..., k * c_in:(k + 1) * c_in]
        self._cache = None
        return dxp[:, 1:-1, 1:-1, :]


class BatchNorm2d:
    """Per-channel batch normalization over (batch, time, freq).

    Training mode normalizes by batch statistics (biased variance) and blends
    running statistics with momentum 0.9; eval mode applies the running ones.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5,
                 dtype=np.float64):
        self.gamma = Param(np.ones(channels, dtype=dtype))
        self.beta = Param(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self._ws = Workspace()
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        c = x.shape[-1]
        if c != len(self.gamma.data):
            raise ShapeMismatchError(f"expected {len(self.gamma.data)} channels, got {x.shape}")
        flat = x.reshape(-1, c)
        if training:
            mean = flat.mean(axis=0)
            sq = self._ws.get("sq", flat.shape, x.dtype)
            np.multiply(flat, flat, out=sq)
            var = np.maximum(sq.mean(axis=0) - mean * mean, 0.0)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean = self.running_mean.astype(x.dtype)
            var = self.running_var.astype(x.dtype)
        inv_std = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
        xhat = self._ws.get("xhat", x.shape, x.dtype)
        np.subtract(x, mean.astype(x.dtype, copy=False), out=xhat)
        xhat *= inv_std
        y = self._ws.get("y", x.shape, x.dtype)
        np.multiply(xhat, self.gamma.data.astype(x.dtype, copy=False), out=y)
        y += self.beta.data.astype(x.dtype, copy=False)
        self._cache = (xhat, inv_std, training)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xhat, inv_std, training = self._cache
        c = dy.shape[-1]
        dy_flat = dy.reshape(-1, c)
        gamma = self.gamma.data.astype(dy.dtype, copy=False)
        dx = self._ws.get("dx", dy.shape, dy.dtype)
        if not training:
            self.gamma.grad += (dy_flat * xhat.reshape(-1, c)).sum(axis=0)
            self.beta.grad += dy_flat.sum(axis=0)
            np.multiply(dy, gamma * inv_std, out=dx)
            self._cache = None
            return dx
        prod = self._ws.get("prod", dy.shape, dy.dtype)
        np.multiply(dy, xhat, out=prod)
        sum_prod = prod.reshape(-1, c).sum(axis=0)
        sum_dy = dy_flat.sum(axis=0)
        self.gamma.grad += sum_prod
        self.beta.grad += sum_dy
        n = dy_flat.shape[0]
        np.multiply(dy, gamma, out=dx)
        dx -= (gamma * sum_dy / n).astype(dy.dtype, copy=False)
        prod2 = prod  # reuse: xhat * mean(dy * xhat) term
        np.multiply(xhat, (gamma * sum_prod / n).astype(dy.dtype, copy=False), out=prod2)
        dx -= prod2
        dx *= inv_std
        self._cache = None
        return dx


class MaxPoolFreq:
    """Max pooling across the frequency axis only; time length is preserved.

    Input (B, T, F, C) -> (B, T, F // pool, C).
    """

    def __init__(self, pool: int):
        if pool < 1:
            raise ValueError("pool must be >= 1")
        self.pool = pool
        self._ws = Workspace()
        self._cache = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        b, t, f, c = x.shape
        if f % self.pool:
            raise ShapeMismatchError(f"freq size {f} not divisible by pool {self.pool}")
        xr = x.reshape(b, t, f // self.pool, self.pool, c)
        y = self._ws.get("y", (b, t, f // self.pool, c), x.dtype)
        np.maximum.reduce(xr, axis=3, out=y)
        self._cache = (xr, y, x.shape)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xr, y, x_shape = self._cache
        b, t, f, c = x_shape
        p = self.pool
        # route to the first maximum of each window only (argmax semantics,
        # without materializing an index tensor)
        eq = self._ws.get("eq", xr.shape, bool)
        np.equal(xr, y[:, :, :, None, :], out=eq)
        seen = self._ws.get("seen", xr.shape, bool)
        np.logical_or.accumulate(eq, axis=3, out=seen)
        first = eq
        first[:, :, :, 1:, :] &= ~seen[:, :, :, :-1, :]
        dxr = self._ws.get("dx", xr.shape, dy.dtype)
        np.multiply(first, dy[:, :, :, None, :], out=dxr)
        self._cache = None
        return dxr.reshape(x_shape)


class Linear:
    """Affine map over the trailing feature axis."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 dtype=np.float64):
        self.weight = Param(glorot_uniform(rng, (in_features, out_features),
                                           in_features, out_features, dtype))
        self.bias = Param(np.zeros(out_features, dtype=dtype))
        self._cache = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.shape[-1] != self.weight.shape[0]:
            raise ShapeMismatchError(
                f"expected trailing dim {self.weight.shape[0]}, got {x.shape}"
            )
        self._cache = x
        return (x @ self.weight.data.astype(x.dtype, copy=False)
                + self.bias.data.astype(x.dtype, copy=False))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x = self._cache
        x2 = x.reshape(-1, x.shape[-1])
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.weight.grad += x2.T @ dy2
        self.bias.grad += dy2.sum(axis=0)
        self._cache = None
        return dy @ self.weight.data.astype(dy.dtype, copy=False).T


class ReLU:
    def __init__(self):
        self._ws = Workspace()
        self._y = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        y = self._ws.get("y", x.shape, x.dtype)
        np.maximum(x, 0.0, out=y)
        self._y = y
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        y, self._y = self._y, None
        mask = self._ws.get("mask", y.shape, bool)
        np.greater(y, 0, out=mask)
        dx = self._ws.get("dx", dy.shape, dy.dtype)
        np.multiply(dy, mask, out=dx)
        return dx


class Sigmoid:
    def __init__(self):
        self._y = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        self._y = 1.0 / (1.0 + np.exp(-x))
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        y, self._y = self._y, None
        return dy * y * (1.0 - y)


class Tanh:
    def __init__(self):
        self._y = None

    def params(self):
        return []

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        y, self._y = self._y, None
        return dy * (1.0 - y * y)
