"""Neural network layers over the autodiff tensor: dense, conv, self-attention.

Weight init is fan-in-scaled uniform from an explicit ``numpy.random.Generator``
so identical seeds give identical parameters.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeMismatchError, Tensor, concat, conv2d


def fanin_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Module:
    """Base with deterministic parameter registration order."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, key, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[key] = value
        elif isinstance(value, Module):
            self._modules[key] = value
        object.__setattr__(self, key, value)

    def named_parameters(self, prefix: str = ""):
        for k, p in self._params.items():
            yield (f"{prefix}{k}", p)
        for k, m in self._modules.items():
            yield from m.named_parameters(prefix=f"{prefix}{k}.")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def load_state(self, state: dict, prefix: str = ""):
        for name, p in self.named_parameters(prefix=prefix):
            if name not in state:
                raise KeyError(f"checkpoint missing parameter {name!r}")
            arr = state[name]
            if tuple(arr.shape) != tuple(p.data.shape):
                raise ShapeMismatchError(
                    "load_state", f"{name}: {arr.shape} vs {p.data.shape}")
            p.data = arr.astype(np.float32).copy()

    def state(self, prefix: str = "") -> dict:
        return {name: p.data.copy() for name, p in self.named_parameters(prefix=prefix)}


class ModuleList(Module):
    def __init__(self, modules):
        super().__init__()
        self.items = list(modules)
        for i, m in enumerate(self.items):
            self._modules[str(i)] = m

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]


class Dense(Module):
    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int):
        super().__init__()
        self.weight = Tensor(fanin_uniform(rng, (n_in, n_out), n_in), requires_grad=True)
        self.bias = Tensor(np.zeros(n_out, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.shape[-1] != self.weight.data.shape[0]:
            raise ShapeMismatchError(
                "dense", f"input dim {x.data.shape[-1]} != {self.weight.data.shape[0]}")
        return x.matmul(self.weight) + self.bias


class Conv2d(Module):
    def __init__(self, rng, c_in: int, c_out: int, kernel: int = 3,
                 stride: int = 1, pad: int = 1):
        super().__init__()
        fan_in = c_in * kernel * kernel
        self.weight = Tensor(
            fanin_uniform(rng, (c_out, c_in, kernel, kernel), fan_in), requires_grad=True)
        self.bias = Tensor(np.zeros(c_out, dtype=np.float32), requires_grad=True)
        self.stride = stride
        self.pad = pad

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class SelfAttention2d(Module):
    """Spatial self-attention over an (N,C,H,W) feature map.

    Query/key projections reduce channels by ``reduction``; attention weights
    softmax-normalize over the H*W positions; the residual is scaled by a
    learnable scalar initialized to zero, so a fresh layer is an identity map.
    """

    def __init__(self, rng, channels: int, reduction: int = 8):
        super().__init__()
        if channels % reduction != 0:
            raise ShapeMismatchError(
                "self_attention", f"channels {channels} not divisible by {reduction}")
        ck = channels // reduction
        self.wq = Tensor(fanin_uniform(rng, (channels, ck), channels), requires_grad=True)
        self.wk = Tensor(fanin_uniform(rng, (channels, ck), channels), requires_grad=True)
        self.wv = Tensor(fanin_uniform(rng, (channels, channels), channels), requires_grad=True)
        self.scale = Tensor(np.zeros(1, dtype=np.float32), requires_grad=True)
        self.channels = channels

    def __call__(self, x: Tensor, return_attention: bool = False):
        n, c, h, w = x.data.shape
        if c != self.channels:
            raise ShapeMismatchError(
                "self_attention", f"input channels {c} != {self.channels}")
        flat = x.reshape(n, c, h * w).transpose(0, 2, 1)  # n, hw, c
        q = flat.matmul(self.wq)
        k = flat.matmul(self.wk)
        v = flat.matmul(self.wv)
        att = q.matmul(k.transpose(0, 2, 1)).softmax(axis=-1)  # n, hw, hw
        mix = att.matmul(v)  # n, hw, c
        out = x + (mix.transpose(0, 2, 1).reshape(n, c, h, w) * self.scale)
        if return_attention:
            return out, att
        return out


class MLP(Module):
    """Dense stack with relu between layers, linear last layer."""

    def __init__(self, rng, dims):
        super().__init__()
        self.layers = ModuleList([Dense(rng, dims[i], dims[i + 1])
                                  for i in range(len(dims) - 1)])

    def __call__(self, x: Tensor) -> Tensor:
        n = len(self.layers.items)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < n - 1:
                x = x.relu()
        return x


def inject_command(x: Tensor, command: Tensor) -> Tensor:
    """Concatenate a command one-hot onto the feature axis of a batch."""
    return concat([x, command], axis=-1)
