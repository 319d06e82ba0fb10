"""Layers with hand-derived backward passes.

Every layer caches what it needs during ``forward`` and consumes it in
``backward``, which accumulates parameter gradients into ``grads`` and returns
the gradient with respect to the layer input. Batch dimension is always first.
"""

from __future__ import annotations

import numpy as np

from .. import kernels


class LayerError(RuntimeError):
    pass


class Layer:
    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def zero_grad(self):
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)

    def _init_grads(self):
        self.zero_grad()

    def forward(self, x, training=True):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise LayerError(f"{self.kind}: backward called without a matching forward")
        cache, self._cache = self._cache, None
        return cache

    def buffers(self):
        """Non-trainable state that still has to be serialized."""
        return {}

    def spec(self) -> list:
        """Constructor arguments, used by the text header of SFNET1 snapshots."""
        return []

    def output_shape(self, shape):
        return shape

    def __repr__(self):
        args = ", ".join(str(a) for a in self.spec())
        return f"{type(self).__name__}({args})"


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in, n_out):
        super().__init__()
        self.n_in, self.n_out = int(n_in), int(n_out)
        self.params = {"weight": np.zeros((self.n_in, self.n_out)),
                       "bias": np.zeros(self.n_out)}
        self._init_grads()

    def spec(self):
        return [self.n_in, self.n_out]

    def output_shape(self, shape):
        if shape != (self.n_in,):
            raise LayerError(f"dense expects ({self.n_in},), got {shape}")
        return (self.n_out,)

    def forward(self, x, training=True):
        self._cache = x
        return x @ self.params["weight"] + self.params["bias"]

    def backward(self, grad):
        x = self._take_cache()
        self.grads["weight"] += x.T @ grad
        self.grads["bias"] += grad.sum(axis=0)
        return grad @ self.params["weight"].T


def _conv_out_len(L, kernel, stride, pad):
    return (L + 2 * pad - kernel) // stride + 1


def _convt_out_len(L, kernel, stride, pad):
    return (L - 1) * stride - 2 * pad + kernel


class Conv1d(Layer):
    kind = "conv1d"

    def __init__(self, in_ch, out_ch, kernel, stride=1, pad=0):
        super().__init__()
        if kernel < 1 or stride < 1 or pad < 0:
            raise ValueError("kernel, stride must be >= 1 and pad >= 0")
        self.in_ch, self.out_ch = int(in_ch), int(out_ch)
        self.kernel, self.stride, self.pad = int(kernel), int(stride), int(pad)
        self.params = {"weight": np.zeros((self.out_ch, self.in_ch, self.kernel)),
                       "bias": np.zeros(self.out_ch)}
        self._init_grads()

    def spec(self):
        return [self.in_ch, self.out_ch, self.kernel, self.stride, self.pad]

    def output_shape(self, shape):
        if len(shape) != 2 or shape[0] != self.in_ch:
            raise LayerError(f"conv1d expects ({self.in_ch}, L), got {shape}")
        L = _conv_out_len(shape[1], self.kernel, self.stride, self.pad)
        if L < 1:
            raise LayerError("conv1d output would be empty")
        return (self.out_ch, L)

    def forward(self, x, training=True):
        self._cache = x
        y = kernels.correlate1d(x, self.params["weight"], self.stride, self.pad)
        return y + self.params["bias"][None, :, None]

    def backward(self, grad):
        x = self._take_cache()
        w = self.params["weight"]
        self.grads["weight"] += kernels.weight_grad1d(x, grad, self.stride, self.pad, self.kernel)
        self.grads["bias"] += grad.sum(axis=(0, 2))
        return kernels.scatter1d(grad, w, self.stride, self.pad, x.shape[2])


class ConvTranspose1d(Layer):
    """Transposed 1-D convolution, weight shaped ``(in_ch, out_ch, kernel)``.

    Output length is ``(L - 1) * stride - 2 * pad + kernel``.
    """

    kind = "convt1d"

    def __init__(self, in_ch, out_ch, kernel, stride=1, pad=0):
        super().__init__()
        if kernel < 1 or stride < 1 or pad < 0:
            raise ValueError("kernel, stride must be >= 1 and pad >= 0")
        self.in_ch, self.out_ch = int(in_ch), int(out_ch)
        self.kernel, self.stride, self.pad = int(kernel), int(stride), int(pad)
        self.params = {"weight": np.zeros((self.in_ch, self.out_ch, self.kernel)),
                       "bias": np.zeros(self.out_ch)}
        self._init_grads()

    def spec(self):
        return [self.in_ch, self.out_ch, self.kernel, self.stride, self.pad]

    def output_shape(self, shape):
        if len(shape) != 2 or shape[0] != self.in_ch:
            raise LayerError(f"convt1d expects ({self.in_ch}, L), got {shape}")
        L = _convt_out_len(shape[1], self.kernel, self.stride, self.pad)
        if L < 1:
            raise LayerError("convt1d output would be empty")
        return (self.out_ch, L)

    def forward(self, x, training=True):
        self._cache = x
        L_out = _convt_out_len(x.shape[2], self.kernel, self.stride, self.pad)
        # transposed conv is the input-adjoint of a correlation with the same weight
        y = kernels.scatter1d(x, self.params["weight"], self.stride, self.pad, L_out)
        return y + self.params["bias"][None, :, None]

    def backward(self, grad):
        x = self._take_cache()
        w = self.params["weight"]
        self.grads["weight"] += kernels.weight_grad1d(grad, x, self.stride, self.pad, self.kernel)
        self.grads["bias"] += grad.sum(axis=(0, 2))
        return kernels.correlate1d(grad, w, self.stride, self.pad)


class BatchNorm1d(Layer):
    """Normalizes over the batch (and length, for ``(B, C, L)`` input) per feature."""

    kind = "batchnorm1d"

    def __init__(self, features, eps=1e-5, momentum=0.1):
        super().__init__()
        self.features = int(features)
        self.eps, self.momentum = float(eps), float(momentum)
        self.params = {"gamma": np.ones(self.features), "beta": np.zeros(self.features)}
        self.running_mean = np.zeros(self.features)
        self.running_var = np.ones(self.features)
        self._init_grads()

    def spec(self):
        return [self.features, self.eps, self.momentum]

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def output_shape(self, shape):
        if shape[0] != self.features:
            raise LayerError(f"batchnorm1d expects {self.features} features, got {shape}")
        return shape

    @staticmethod
    def _axes(x):
        return (0,) if x.ndim == 2 else (0, 2)

    def _bcast(self, v, x):
        return v if x.ndim == 2 else v[None, :, None]

    def forward(self, x, training=True):
        axes = self._axes(x)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = x.size // self.features
            unbiased = var * m / max(m - 1, 1)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - self._bcast(mean, x)) * self._bcast(inv_std, x)
        self._cache = (xhat, inv_std, training)
        return xhat * self._bcast(self.params["gamma"], x) + self._bcast(self.params["beta"], x)

    def backward(self, grad):
        xhat, inv_std, training = self._take_cache()
        axes = self._axes(grad)
        self.grads["gamma"] += (grad * xhat).sum(axis=axes)
        self.grads["beta"] += grad.sum(axis=axes)
        dxhat = grad * self._bcast(self.params["gamma"], grad)
        if not training:
            return dxhat * self._bcast(inv_std, grad)
        m = grad.size // self.features
        mean_d = dxhat.sum(axis=axes) / m
        mean_dx = (dxhat * xhat).sum(axis=axes) / m
        return self._bcast(inv_std, grad) * (
            dxhat - self._bcast(mean_d, grad) - xhat * self._bcast(mean_dx, grad))


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=True):
        self._cache = x > 0
        return np.where(self._cache, x, 0.0)

    def backward(self, grad):
        return grad * self._take_cache()


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, slope=0.2):
        super().__init__()
        self.slope = float(slope)

    def spec(self):
        return [self.slope]

    def forward(self, x, training=True):
        self._cache = x > 0
        return np.where(self._cache, x, self.slope * x)

    def backward(self, grad):
        return np.where(self._take_cache(), grad, self.slope * grad)


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x, training=True):
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._take_cache()
        return grad * (1.0 - y * y)


def sigmoid(x):
    # split by sign so neither branch overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, training=True):
        y = sigmoid(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._take_cache()
        return grad * y * (1.0 - y)


class Reshape(Layer):
    """Reshapes the per-sample part of a batch, e.g. ``(B, 2048) -> (B, 32, 64)``."""

    kind = "reshape"

    def __init__(self, *shape):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def spec(self):
        return list(self.shape)

    def output_shape(self, shape):
        if int(np.prod(shape)) != int(np.prod(self.shape)):
            raise LayerError(f"cannot reshape {shape} to {self.shape}")
        return self.shape

    def forward(self, x, training=True):
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad):
        return grad.reshape(self._take_cache())


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, training=True):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._take_cache())


LAYER_KINDS = {cls.kind: cls for cls in (
    Dense, Conv1d, ConvTranspose1d, BatchNorm1d, ReLU, LeakyReLU, Tanh, Sigmoid,
    Reshape, Flatten)}
