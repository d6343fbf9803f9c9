"""Dense float32 tensors with reverse-mode automatic differentiation.

Graphs are recorded dynamically as ops execute (define-by-run); calling
``backward()`` on a scalar output populates ``grad`` on every tensor that
requires gradients. CPU-only, float32-only, deterministic.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatchError(ValueError):
    """Raised when operand shapes are incompatible; names the offending op."""

    def __init__(self, op: str, detail: str):
        super().__init__(f"{op}: {detail}")
        self.op = op


class NonFiniteError(ArithmeticError):
    """Raised when a checked tensor contains NaN or infinity."""


class GraphError(RuntimeError):
    """Raised on backward from a non-scalar or through a detached graph."""


_GRAD_ENABLED = True


class no_grad:
    """Context manager disabling graph recording (evaluation passes)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.astype(np.float32, copy=False)


class Tensor:
    """A float32 array plus optional gradient and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float32)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple = ()
        self._backward = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad or p._parents for p in parents):
            out.requires_grad = any(p.requires_grad for p in parents)
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def grad_array(self) -> np.ndarray:
        """Gradient as an array; parameters outside the graph get zeros."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def assert_finite(self, where: str = "tensor"):
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"non-finite values in {where}")
        return self

    def _accum(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.astype(np.float32, copy=True)
        else:
            self.grad = self.grad + g

    # -- autodiff -------------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise GraphError("backward requires a scalar output")
        if self._backward is None and not self._parents:
            raise GraphError("backward on a detached graph: no ops recorded")
        topo: list[Tensor] = []
        visited = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic -----------------------------------------------

    @staticmethod
    def _coerce(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))

    def __add__(self, other):
        other = Tensor._coerce(other)
        try:
            data = self.data + other.data
        except ValueError as e:
            raise ShapeMismatchError("add", str(e)) from e

        def bwd(g, a=self, b=other):
            a._accum(_unbroadcast(g, a.data.shape))
            b._accum(_unbroadcast(g, b.data.shape))

        return Tensor._make(data, (self, other), bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g, a=self):
            a._accum(-g)

        return Tensor._make(-self.data, (self,), bwd)

    def __sub__(self, other):
        return self + (-Tensor._coerce(other))

    def __rsub__(self, other):
        return Tensor._coerce(other) + (-self)

    def __mul__(self, other):
        other = Tensor._coerce(other)
        try:
            data = self.data * other.data
        except ValueError as e:
            raise ShapeMismatchError("mul", str(e)) from e

        def bwd(g, a=self, b=other):
            a._accum(_unbroadcast(g * b.data, a.data.shape))
            b._accum(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._make(data, (self, other), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._coerce(other)
        data = self.data / other.data

        def bwd(g, a=self, b=other):
            a._accum(_unbroadcast(g / b.data, a.data.shape))
            b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        return Tensor._make(data, (self, other), bwd)

    def square(self):
        def bwd(g, a=self):
            a._accum(g * 2.0 * a.data)

        return Tensor._make(self.data * self.data, (self,), bwd)

    def abs(self):
        def bwd(g, a=self):
            a._accum(g * np.sign(a.data).astype(np.float32))

        return Tensor._make(np.abs(self.data), (self,), bwd)

    def exp(self):
        out_data = np.exp(self.data)

        def bwd(g, a=self, y=out_data):
            a._accum(g * y)

        return Tensor._make(out_data, (self,), bwd)

    def log(self):
        def bwd(g, a=self):
            a._accum(g / a.data)

        return Tensor._make(np.log(self.data), (self,), bwd)

    def relu(self):
        mask = (self.data > 0).astype(np.float32)

        def bwd(g, a=self, m=mask):
            a._accum(g * m)

        return Tensor._make(self.data * mask, (self,), bwd)

    def sigmoid(self):
        out_data = 1.0 / (1.0 + np.exp(-self.data))

        def bwd(g, a=self, y=out_data):
            a._accum(g * y * (1.0 - y))

        return Tensor._make(out_data.astype(np.float32), (self,), bwd)

    def tanh(self):
        out_data = np.tanh(self.data)

        def bwd(g, a=self, y=out_data):
            a._accum(g * (1.0 - y * y))

        return Tensor._make(out_data, (self,), bwd)

    # -- reductions -----------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        data = self.data.sum(axis=axis, keepdims=keepdims, dtype=np.float32)

        def bwd(g, a=self, ax=axis, kd=keepdims):
            if ax is None:
                a._accum(np.broadcast_to(g, a.data.shape).astype(np.float32))
            else:
                gg = g if kd else np.expand_dims(g, ax)
                a._accum(np.broadcast_to(gg, a.data.shape).astype(np.float32))

        return Tensor._make(data, (self,), bwd)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * np.float32(1.0 / n)

    # -- shape ops ------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.data.shape

        def bwd(g, a=self, s=orig):
            a._accum(g.reshape(s))

        return Tensor._make(self.data.reshape(shape), (self,), bwd)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)

        def bwd(g, a=self, iv=inv):
            a._accum(g.transpose(iv))

        return Tensor._make(self.data.transpose(axes), (self,), bwd)

    def __getitem__(self, idx):
        def bwd(g, a=self, ix=idx):
            buf = np.zeros_like(a.data)
            buf[ix] = g
            a._accum(buf)

        return Tensor._make(self.data[idx], (self,), bwd)

    # -- linear algebra ---------------------------------------------------------

    def matmul(self, other: "Tensor"):
        other = Tensor._coerce(other)
        a, b = self.data, other.data
        if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
            raise ShapeMismatchError(
                "matmul", f"inner dims differ: {a.shape} @ {b.shape}")
        data = np.matmul(a, b)

        def bwd(g, ta=self, tb=other):
            ga = np.matmul(g, np.swapaxes(tb.data, -1, -2))
            gb = np.matmul(np.swapaxes(ta.data, -1, -2), g)
            ta._accum(_unbroadcast(ga, ta.data.shape))
            tb._accum(_unbroadcast(gb, tb.data.shape))

        return Tensor._make(data, (self, other), bwd)

    def __matmul__(self, other):
        return self.matmul(other)

    def softmax(self, axis=-1):
        z = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(z)
        y = (e / e.sum(axis=axis, keepdims=True)).astype(np.float32)

        def bwd(g, a=self, yy=y, ax=axis):
            dot = (g * yy).sum(axis=ax, keepdims=True)
            a._accum(yy * (g - dot))

        return Tensor._make(y, (self,), bwd)


def concat(tensors, axis=0):
    tensors = [Tensor._coerce(t) for t in tensors]
    ref = tensors[0].data.shape
    for t in tensors[1:]:
        a, b = list(ref), list(t.data.shape)
        a[axis] = b[axis] = 0
        if a != b:
            raise ShapeMismatchError(
                "concat", f"shapes {ref} and {t.data.shape} differ off axis {axis}")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, ts=tensors, off=offsets, ax=axis):
        for i, t in enumerate(ts):
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(off[i], off[i + 1])
            t._accum(g[tuple(sl)])

    return Tensor._make(data, tuple(tensors), bwd)


# -- 2D convolution (NCHW, im2col) ---------------------------------------------

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    n, c, h, w = x.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # n, c, ho, wo, kh, kw
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho * wo, c * kh * kw)
    return np.ascontiguousarray(cols), ho, wo


def _col2im(dcols, xshape, kh, kw, stride, pad, ho, wo):
    n, c, h, w = xshape
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=np.float32)
    d6 = dcols.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += d6[:, :, :, :, i, j]
    if pad:
        return dxp[:, :, pad:pad + h, pad:pad + w]
    return dxp


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None, stride: int = 1,
           pad: int = 0) -> Tensor:
    """2D convolution, x: (N,C,H,W), weight: (Cout,Cin,kh,kw), bias: (Cout,)."""
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeMismatchError("conv2d", "expects 4D input and weight")
    cout, cin, kh, kw = weight.data.shape
    if x.data.shape[1] != cin:
        raise ShapeMismatchError(
            "conv2d", f"input channels {x.data.shape[1]} != weight channels {cin}")
    cols, ho, wo = _im2col(x.data, kh, kw, stride, pad)
    wmat = weight.data.reshape(cout, cin * kh * kw)
    out = np.matmul(cols, wmat.T)  # n, ho*wo, cout
    if bias is not None:
        out = out + bias.data
    n = x.data.shape[0]
    out = np.ascontiguousarray(out.transpose(0, 2, 1).reshape(n, cout, ho, wo))

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bwd(g, tx=x, tw=weight, tb=bias, cls=cols, sh=x.data.shape):
        gmat = g.reshape(n, cout, ho * wo).transpose(0, 2, 1)  # n, ho*wo, cout
        gw = np.tensordot(gmat, cls, axes=([0, 1], [0, 1]))  # cout, cin*kh*kw
        tw._accum(gw.reshape(tw.data.shape))
        if tb is not None:
            tb._accum(gmat.sum(axis=(0, 1)))
        dcols = np.matmul(gmat, wmat)
        tx._accum(_col2im(dcols, sh, kh, kw, stride, pad, ho, wo))

    return Tensor._make(out, parents, bwd)


def upsample_nearest2d(x: Tensor, scale: int = 2) -> Tensor:
    """Nearest-neighbour upsampling on (N,C,H,W)."""
    data = x.data.repeat(scale, axis=2).repeat(scale, axis=3)

    def bwd(g, a=x, s=scale):
        n, c, h, w = a.data.shape
        a._accum(g.reshape(n, c, h, s, w, s).sum(axis=(3, 5)))

    return Tensor._make(data, (x,), bwd)
