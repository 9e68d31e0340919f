"""MLP building blocks on top of the autodiff tensor."""

import numpy as np

from .tensor import Tensor, as_tensor, check_finite

ACTIVATIONS = ("relu", "identity")


def glorot_uniform(fan_in, fan_out, rng, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out), dtype=dtype)


class Linear:
    def __init__(self, in_dim, out_dim, rng, dtype=np.float32):
        self.w = Tensor(glorot_uniform(in_dim, out_dim, rng, dtype),
                        requires_grad=True)
        self.b = Tensor(np.zeros((1, out_dim), dtype=dtype), requires_grad=True)

    @property
    def in_dim(self):
        return self.w.shape[0]

    @property
    def out_dim(self):
        return self.w.shape[1]

    def __call__(self, x):
        return x @ self.w + self.b

    def params(self):
        return [self.w, self.b]


class Mlp:
    """A stack of affine layers with per-layer 'relu' or 'identity'."""

    def __init__(self, widths, activations, rng, dtype=np.float32):
        if len(activations) != len(widths) - 1:
            raise ValueError("need one activation per layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation '{a}'")
        self.layers = [Linear(widths[i], widths[i + 1], rng, dtype)
                       for i in range(len(widths) - 1)]
        self.activations = list(activations)

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    def __call__(self, x):
        x = as_tensor(x)
        if x.shape[1] != self.in_dim:
            raise ValueError(
                f"input has {x.shape[1]} columns, layer expects {self.in_dim}")
        if not isinstance(x, Tensor) or x._parents == ():
            check_finite(x.data, "mlp input")
        for layer, act in zip(self.layers, self.activations):
            x = layer(x)
            if act == "relu":
                x = x.relu()
        return x

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def zero_grad(self):
        for p in self.params():
            p.grad = None


def mlp_forward(net, x):
    """Batched forward pass through `net` (validates dims and finiteness)."""
    x = as_tensor(x)
    check_finite(x.data, "mlp input")
    return net(x)
