from __future__ import annotations

import numpy as np

from .layers import Layer, LayerError


class Network:
    """An ordered stack of layers sharing one forward/backward cache discipline."""

    def __init__(self, layers, input_shape):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except LayerError as exc:
                raise LayerError(f"layer {i} ({layer.kind}): {exc}") from None
        self.output_shape = shape
        self._pending = False

    def forward(self, x, training=True):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise LayerError(
                f"layer 0 ({self.layers[0].kind}): expected per-sample shape "
                f"{self.input_shape}, got {x.shape[1:]}")
        for layer in self.layers:
            x = layer.forward(x, training)
        self._pending = True
        return x

    __call__ = forward

    def backward(self, grad):
        """Accumulate parameter gradients; returns dLoss/dInput."""
        if not self._pending:
            raise LayerError("backward called without a matching forward")
        self._pending = False
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def parameters(self):
        """``(param, grad)`` pairs in a stable order."""
        out = []
        for layer in self.layers:
            for name in layer.params:
                out.append((layer.params[name], layer.grads[name]))
        return out

    def n_params(self) -> int:
        return sum(p.size for p, _ in self.parameters())

    def describe(self) -> list:
        return [(layer.kind, *layer.spec()) for layer in self.layers]


def init_params(net: Network, seed: int, std: float = 0.02) -> None:
    """Weights ~ N(0, std), biases 0, batch-norm scale 1 / shift 0."""
    rng = np.random.default_rng(seed)
    for layer in net.layers:
        for name, p in layer.params.items():
            if name == "weight":
                p[...] = rng.normal(0.0, std, size=p.shape)
            elif name == "gamma":
                p[...] = 1.0
            else:
                p[...] = 0.0
        if hasattr(layer, "running_mean"):
            layer.running_mean[...] = 0.0
            layer.running_var[...] = 1.0
        layer.zero_grad()


def bce_loss(pred, target, clamp=1e-7):
    """Mean binary cross-entropy and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.broadcast_to(np.asarray(target, dtype=np.float64), pred.shape)
    p = np.clip(pred, clamp, 1.0 - clamp)
    n = pred.size
    loss = -np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    grad = (p - target) / (p * (1.0 - p)) / n
    # clamped entries get no gradient, matching the flat clamp
    grad = np.where((pred < clamp) | (pred > 1.0 - clamp), 0.0, grad)
    return float(loss), grad
