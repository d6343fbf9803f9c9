"""Independent float64 reference math used as test oracles.

These re-implement layer forwards with straightforward numpy (loops where
that is clearest), so finite differences through them are numerically clean
and fully independent of the production engine.
"""

import numpy as np


def dense(x, w, b):
    return x @ w + b


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def conv2d(x, w, b, stride=1, pad=0):
    """Direct-loop 2D convolution, NCHW."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for i in range(ho):
        for j in range(wo):
            patch = x[:, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
            out[:, :, i, j] = np.einsum("ncij,ocij->no", patch, w)
    return out + b.reshape(1, cout, 1, 1)


def upsample_nearest(x, scale=2):
    return x.repeat(scale, axis=2).repeat(scale, axis=3)


def self_attention(x, wq, wk, wv, scale):
    n, c, h, w = x.shape
    flat = x.reshape(n, c, h * w).transpose(0, 2, 1)
    q = flat @ wq
    k = flat @ wk
    v = flat @ wv
    att = softmax(q @ k.transpose(0, 2, 1), axis=-1)
    mix = att @ v
    gamma = float(np.asarray(scale).reshape(-1)[0])
    return x + gamma * mix.transpose(0, 2, 1).reshape(n, c, h, w)


def motion_plan_loss(y, m, actions, deltas, gamma):
    """Discounted squared deviation of the line y + m*delta from actions."""
    total = 0.0
    for n, d in enumerate(deltas):
        total += gamma ** d * (y + m * d - actions[n]) ** 2
    return total


def fd_grad(fn, arrays, eps=1e-3):
    """Central finite differences of scalar fn() w.r.t. float64 arrays."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(fn())
            flat[i] = orig - eps
            lo = float(fn())
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        grads.append(g)
    return grads


def rel_err(a, b, floor=1e-4):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
