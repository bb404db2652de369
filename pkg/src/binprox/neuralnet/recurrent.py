"""Gated recurrent units with hand-rolled backpropagation through time.

Gate equations (update z, reset r, candidate c, zero initial state):

    z_t = sigmoid(x_t Wx_z + h_{t-1} Wh_z + b_z)
    r_t = sigmoid(x_t Wx_r + h_{t-1} Wh_r + b_r)
    c_t = tanh(x_t Wx_c + (r_t * h_{t-1}) Wh_c + b_c)
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t

The bidirectional layer concatenates a forward and a time-reversed pass and
by default squashes the concatenated output with tanh.
"""

from __future__ import annotations

import numpy as np

from .core import Param, glorot_uniform, orthogonal


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class GruDirection:
    """One temporal direction: (B, T, D) -> (B, T, H)."""

    def __init__(self, in_features: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float64):
        self.hidden = hidden
        self.wx = Param(glorot_uniform(rng, (in_features, 3 * hidden),
                                       in_features, hidden, dtype))
        self.wh_zr = Param(np.concatenate(
            [orthogonal(rng, hidden, hidden, dtype) for _ in range(2)], axis=1))
        self.wh_c = Param(orthogonal(rng, hidden, hidden, dtype))
        self.bias = Param(np.zeros(3 * hidden, dtype=dtype))
        self._cache = None

    def params(self):
        return [self.wx, self.wh_zr, self.wh_c, self.bias]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        b, t, _ = x.shape
        h_dim = self.hidden
        a = x @ self.wx.data + self.bias.data  # (B, T, 3H)
        h = np.zeros((b, h_dim), dtype=x.dtype)
        out = np.empty((b, t, h_dim), dtype=x.dtype)
        zs = np.empty((t, b, h_dim), dtype=x.dtype)
        rs = np.empty_like(zs)
        cs = np.empty_like(zs)
        h_prevs = np.empty_like(zs)
        for step in range(t):
            gates = h @ self.wh_zr.data  # (B, 2H)
            z = _sigmoid(a[:, step, :h_dim] + gates[:, :h_dim])
            r = _sigmoid(a[:, step, h_dim:2 * h_dim] + gates[:, h_dim:])
            c = np.tanh(a[:, step, 2 * h_dim:] + (r * h) @ self.wh_c.data)
            zs[step], rs[step], cs[step], h_prevs[step] = z, r, c, h
            h = (1.0 - z) * h + z * c
            out[:, step] = h
        self._cache = (x, zs, rs, cs, h_prevs)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        x, zs, rs, cs, h_prevs = self._cache
        b, t, _ = x.shape
        h_dim = self.hidden
        da = np.zeros((b, t, 3 * h_dim), dtype=x.dtype)
        dh = np.zeros((b, h_dim), dtype=x.dtype)
        for step in range(t - 1, -1, -1):
            dh_t = dout[:, step] + dh
            z, r, c, h_prev = zs[step], rs[step], cs[step], h_prevs[step]
            dz = dh_t * (c - h_prev)
            dc = dh_t * z
            dh = dh_t * (1.0 - z)
            dc_pre = dc * (1.0 - c * c)
            da[:, step, 2 * h_dim:] = dc_pre
            self.wh_c.grad += (r * h_prev).T @ dc_pre
            drh = dc_pre @ self.wh_c.data.T
            dr = drh * h_prev
            dh += drh * r
            dz_pre = dz * z * (1.0 - z)
            dr_pre = dr * r * (1.0 - r)
            da[:, step, :h_dim] = dz_pre
            da[:, step, h_dim:2 * h_dim] = dr_pre
            dzr = np.concatenate([dz_pre, dr_pre], axis=1)
            dh += dzr @ self.wh_zr.data.T
            self.wh_zr.grad += h_prev.T @ dzr
        da2 = da.reshape(-1, 3 * h_dim)
        self.wx.grad += x.reshape(-1, x.shape[-1]).T @ da2
        self.bias.grad += da2.sum(axis=0)
        self._cache = None
        return da @ self.wx.data.T


class BiGru:
    """Bidirectional GRU: (B, T, D) -> (B, T, 2H), tanh-squashed by default."""

    def __init__(self, in_features: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float64, scale_tanh: bool = True):
        self.hidden = hidden
        self.scale_tanh = scale_tanh
        self.fwd = GruDirection(in_features, hidden, rng, dtype)
        self.bwd = GruDirection(in_features, hidden, rng, dtype)
        self._y = None

    def params(self):
        return self.fwd.params() + self.bwd.params()

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        hf = self.fwd.forward(x, training)
        hb = self.bwd.forward(x[:, ::-1], training)[:, ::-1]
        y = np.concatenate([hf, hb], axis=2)
        if self.scale_tanh:
            y = np.tanh(y)
            self._y = y
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self.scale_tanh:
            dy = dy * (1.0 - self._y * self._y)
            self._y = None
        h_dim = self.hidden
        dx = self.fwd.backward(np.ascontiguousarray(dy[:, :, :h_dim]))
        dxb = self.bwd.backward(np.ascontiguousarray(dy[:, ::-1, h_dim:]))
        return dx + dxb[:, ::-1]
