"""Hand-rolled 1-D neural-network kernels in float64 numpy.

Layers implement four passes:

* ``forward`` / ``backward`` — the usual reverse-mode pair. ``backward``
  accumulates parameter gradients and returns the input gradient.
* ``forward_lin`` / ``backward_lin`` — the same network linearized at the
  last ``forward`` input (activation masks and pooling argmaxes frozen).
  ``forward_lin(v)`` computes the Jacobian-vector product J·v;
  ``backward_lin`` differentiates that product with respect to the
  parameters. Together they give exact (almost-everywhere) gradients of
  gradient-norm penalties for piecewise-linear networks.

Everything is deterministic for a fixed RNG and batch order.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError, UsageError

LEAKY_SLOPE = 0.2


def leaky_relu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, LEAKY_SLOPE * z)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer; subclasses fill in the four passes."""

    def params(self):
        """List of (param array, grad array) pairs; arrays are updated in place."""
        return []

    def zero_grads(self):
        for _, g in self.params():
            g.fill(0.0)

    def forward(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def backward(self, gy, accumulate=True):  # pragma: no cover - interface
        raise NotImplementedError

    def forward_lin(self, u):  # pragma: no cover - interface
        raise NotImplementedError

    def backward_lin(self, gu, accumulate=True):  # pragma: no cover - interface
        raise NotImplementedError


def _im2col(x_pad: np.ndarray, kernel_len: int, length: int) -> np.ndarray:
    """Sliding windows of a zero-padded (B, C, Lp) input as (B, L, C, K)."""
    batch, channels, _ = x_pad.shape
    sb, sc, sl = x_pad.strides
    view = np.lib.stride_tricks.as_strided(
        x_pad,
        shape=(batch, length, channels, kernel_len),
        strides=(sb, sl, sc, sl),
        writeable=False,
    )
    return view


def _conv_same(x_pad: np.ndarray, w: np.ndarray, length: int,
               cols: np.ndarray | None = None) -> np.ndarray:
    """Cross-correlation of zero-padded input with kernels, 'same' output."""
    out_c, in_c, k = w.shape
    batch = x_pad.shape[0]
    if cols is None:
        cols = _im2col(x_pad, k, length)
    flat = cols.reshape(batch * length, in_c * k)
    y = flat @ w.reshape(out_c, in_c * k).T
    return y.reshape(batch, length, out_c).transpose(0, 2, 1)


class Conv1d(Layer):
    """Same-padding 1-D cross-correlation with bias and built-in activation."""

    def __init__(self, in_channels, out_channels, kernel_len, activation="leaky_relu",
                 rng: np.random.Generator | None = None):
        if kernel_len % 2 == 0:
            raise ParameterError("kernel_len must be odd")
        if activation not in ("leaky_relu", "linear"):
            raise ParameterError(f"unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel_len
        fan_out = out_channels * kernel_len
        self.w = glorot_uniform(rng, (out_channels, in_channels, kernel_len), fan_in, fan_out)
        self.b = np.zeros(out_channels)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self.activation = activation
        self._x_pad = None
        self._mask = None
        self._u_pad = None

    @property
    def kernel_len(self):
        return self.w.shape[2]

    def params(self):
        return [(self.w, self.gw), (self.b, self.gb)]

    def _pad(self, x):
        p = self.kernel_len // 2
        return np.pad(x, ((0, 0), (0, 0), (p, p)))

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.w.shape[1]:
            raise ParameterError(
                f"expected input (batch, {self.w.shape[1]}, L), got {x.shape}")
        self._x_pad = self._pad(x)
        z = _conv_same(self._x_pad, self.w, x.shape[2]) + self.b[None, :, None]
        if self.activation == "leaky_relu":
            self._mask = np.where(z > 0, 1.0, LEAKY_SLOPE)
            return self._mask * z
        self._mask = None
        return z

    def _grad_input(self, gz):
        # full correlation with channel-transposed, tap-flipped kernels
        length = gz.shape[2]
        w_t = np.ascontiguousarray(self.w.transpose(1, 0, 2)[:, :, ::-1])
        return _conv_same(self._pad(gz), w_t, length)

    def _grad_weights(self, gz, x_pad):
        batch, out_c, length = gz.shape
        cols = _im2col(x_pad, self.kernel_len, length)
        flat = cols.reshape(batch * length, -1)
        gzf = gz.transpose(1, 0, 2).reshape(out_c, batch * length)
        self.gw += (gzf @ flat).reshape(self.w.shape)

    def backward(self, gy, accumulate=True):
        if self._x_pad is None:
            raise UsageError("backward before forward")
        gz = gy if self._mask is None else gy * self._mask
        if accumulate:
            self._grad_weights(gz, self._x_pad)
            self.gb += gz.sum(axis=(0, 2))
        return self._grad_input(gz)

    def forward_lin(self, u):
        if self._x_pad is None:
            raise UsageError("forward_lin before forward")
        self._u_pad = self._pad(u)
        z = _conv_same(self._u_pad, self.w, u.shape[2])
        return z if self._mask is None else self._mask * z

    def backward_lin(self, gu, accumulate=True):
        if self._u_pad is None:
            raise UsageError("backward_lin before forward_lin")
        gz = gu if self._mask is None else gu * self._mask
        if accumulate:
            self._grad_weights(gz, self._u_pad)
        return self._grad_input(gz)


class MaxPool1d(Layer):
    """Non-overlapping max pooling; gradient routes to the first argmax."""

    def __init__(self, pool=2):
        self.pool = pool
        self._argmax = None
        self._in_shape = None

    def forward(self, x):
        b, c, length = x.shape
        if length % self.pool != 0:
            raise ParameterError("length must be divisible by pool size")
        blocks = x.reshape(b, c, length // self.pool, self.pool)
        self._argmax = blocks.argmax(axis=3)  # np.argmax: first index on ties
        self._in_shape = x.shape
        return np.take_along_axis(blocks, self._argmax[..., None], axis=3)[..., 0]

    def _route(self, g):
        b, c, length = self._in_shape
        out = np.zeros((b, c, length // self.pool, self.pool))
        np.put_along_axis(out, self._argmax[..., None], g[..., None], axis=3)
        return out.reshape(b, c, length)

    def backward(self, gy, accumulate=True):
        if self._argmax is None:
            raise UsageError("backward before forward")
        return self._route(gy)

    def forward_lin(self, u):
        if self._argmax is None:
            raise UsageError("forward_lin before forward")
        b, c, length = self._in_shape
        blocks = u.reshape(b, c, length // self.pool, self.pool)
        return np.take_along_axis(blocks, self._argmax[..., None], axis=3)[..., 0]

    def backward_lin(self, gu, accumulate=True):
        return self._route(gu)


class Flatten(Layer):
    def __init__(self):
        self._in_shape = None

    def forward(self, x):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy, accumulate=True):
        return gy.reshape(self._in_shape)

    def forward_lin(self, u):
        return u.reshape(u.shape[0], -1)

    def backward_lin(self, gu, accumulate=True):
        return gu.reshape(self._in_shape)


class Affine(Layer):
    """Fully connected layer, linear activation."""

    def __init__(self, in_features, out_features, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.w = glorot_uniform(rng, (out_features, in_features), in_features, out_features)
        self.b = np.zeros(out_features)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None
        self._u = None

    def params(self):
        return [(self.w, self.gw), (self.b, self.gb)]

    def forward(self, x):
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, gy, accumulate=True):
        if self._x is None:
            raise UsageError("backward before forward")
        if accumulate:
            self.gw += gy.T @ self._x
            self.gb += gy.sum(axis=0)
        return gy @ self.w

    def forward_lin(self, u):
        self._u = u
        return u @ self.w.T

    def backward_lin(self, gu, accumulate=True):
        if self._u is None:
            raise UsageError("backward_lin before forward_lin")
        if accumulate:
            self.gw += gu.T @ self._u
        return gu @ self.w


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, gy, accumulate=True):
        for layer in reversed(self.layers):
            gy = layer.backward(gy, accumulate=accumulate)
        return gy

    def forward_lin(self, u):
        for layer in self.layers:
            u = layer.forward_lin(u)
        return u

    def backward_lin(self, gu, accumulate=True):
        for layer in reversed(self.layers):
            gu = layer.backward_lin(gu, accumulate=accumulate)
        return gu


class Lstm(Layer):
    """Single-layer LSTM over (batch, time, features); returns the last
    hidden state. Gates ordered input, forget, cell, output."""

    def __init__(self, in_features, hidden, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.hidden = hidden
        self.wx = glorot_uniform(rng, (in_features, 4 * hidden), in_features, 4 * hidden)
        self.wh = glorot_uniform(rng, (hidden, 4 * hidden), hidden, 4 * hidden)
        self.b = np.zeros(4 * hidden)
        self.gwx = np.zeros_like(self.wx)
        self.gwh = np.zeros_like(self.wh)
        self.gb = np.zeros_like(self.b)
        self._cache = None

    def params(self):
        return [(self.wx, self.gwx), (self.wh, self.gwh), (self.b, self.gb)]

    def forward(self, x):
        batch, steps, _ = x.shape
        h = np.zeros((batch, self.hidden))
        c = np.zeros((batch, self.hidden))
        states = []
        for t in range(steps):
            z = x[:, t, :] @ self.wx + h @ self.wh + self.b
            i, f, g, o = np.split(z, 4, axis=1)
            i = _sigmoid(i)
            f = _sigmoid(f)
            g = np.tanh(g)
            o = _sigmoid(o)
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            states.append((i, f, g, o, c_prev, tc, h))
        self._cache = (x, states)
        return h

    def backward(self, gy, accumulate=True):
        if self._cache is None:
            raise UsageError("backward before forward")
        x, states = self._cache
        batch, steps, _ = x.shape
        gx = np.zeros_like(x)
        gh = gy.copy()
        gc = np.zeros((batch, self.hidden))
        for t in range(steps - 1, -1, -1):
            i, f, g, o, c_prev, tc, _ = states[t]
            go = gh * tc
            gc = gc + gh * o * (1 - tc**2)
            gi = gc * g
            gg = gc * i
            gf = gc * c_prev
            gz = np.concatenate(
                [gi * i * (1 - i), gf * f * (1 - f), gg * (1 - g**2), go * o * (1 - o)],
                axis=1,
            )
            h_prev = states[t - 1][6] if t > 0 else np.zeros((batch, self.hidden))
            if accumulate:
                self.gwx += x[:, t, :].T @ gz
                self.gwh += h_prev.T @ gz
                self.gb += gz.sum(axis=0)
            gx[:, t, :] = gz @ self.wx.T
            gh = gz @ self.wh.T
            gc = gc * f
        return gx


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


sigmoid = _sigmoid


class Adam:
    """Adam optimizer over (param, grad) pairs updated in place."""

    def __init__(self, params, lr=1e-4, beta1=0.5, beta2=0.9, eps=1e-8):
        self.pairs = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p, _ in self.pairs]
        self.v = [np.zeros_like(p) for p, _ in self.pairs]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1 - b1**self.t
        bias2 = 1 - b2**self.t
        for k, (p, g) in enumerate(self.pairs):
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g**2
            p -= self.lr * (self.m[k] / bias1) / (np.sqrt(self.v[k] / bias2) + self.eps)


def conv1d_forward(layer: Conv1d, x: np.ndarray) -> np.ndarray:
    """Single-sample convenience wrapper: (in_channels, L) -> (out_channels, L)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError("expected a (channels, L) input")
    return layer.forward(x[None])[0]
