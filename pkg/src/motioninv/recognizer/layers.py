"""Forward/backward pairs for the network's building blocks.

Sequences are ``(B, T, C)`` float arrays. Each ``*_forward`` returns the output
and a cache; the matching ``*_backward`` takes the upstream gradient and the
cache and returns the input gradient (plus parameter gradients where the layer
has parameters).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


# --- activations -------------------------------------------------------------

def act_forward(x, kind):
    if kind == "relu":
        return np.maximum(x, 0.0), x
    if kind == "identity":
        return x, None
    raise ValueError(f"unknown activation {kind!r}")


def act_backward(dy, cache, kind):
    if kind == "relu":
        return dy * (cache > 0)
    return dy


def sigmoid(x):
    # numerically safe for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# --- dense ---------------------------------------------------------------

def linear_forward(x, W, b=None):
    y = x @ W
    if b is not None:
        y = y + b
    return y, x


def linear_backward(dy, x, W, has_bias=True):
    C = x.shape[-1]
    dW = x.reshape(-1, C).T @ dy.reshape(-1, dy.shape[-1])
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0) if has_bias else None
    dx = dy @ W.T
    return dx, dW, db


# --- temporal convolution ----------------------------------------------------

def conv1d_forward(x, W, b):
    """'Same' convolution along time. ``W`` has shape ``(k, C_in, C_out)``, ``k`` odd."""
    B, T, C = x.shape
    k = W.shape[0]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    win = sliding_window_view(xp, k, axis=1)  # (B, T, C, k)
    cols = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(B * T, k * C)
    y = (cols @ W.reshape(k * C, -1)).reshape(B, T, -1) + b
    return y, (cols, x.shape)


def conv1d_backward(dy, cache, W):
    cols, (B, T, C) = cache
    k = W.shape[0]
    pad = k // 2
    dyf = dy.reshape(B * T, -1)
    dW = (cols.T @ dyf).reshape(W.shape)
    db = dyf.sum(axis=0)
    dcols = (dyf @ W.reshape(k * C, -1).T).reshape(B, T, k, C)
    dxp = np.zeros((B, T + 2 * pad, C), dtype=dy.dtype)
    for j in range(k):
        dxp[:, j : j + T, :] += dcols[:, :, j, :]
    return dxp[:, pad : pad + T, :], dW, db


# --- pooling / upsampling ------------------------------------------------------

def maxpool_forward(x):
    """Max over non-overlapping pairs of frames; odd lengths repeat the last frame."""
    B, T, C = x.shape
    if T % 2:
        x = np.concatenate([x, x[:, -1:, :]], axis=1)
    xr = x.reshape(B, -1, 2, C)
    arg = np.argmax(xr, axis=2)
    y = np.take_along_axis(xr, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return y, (arg, T)


def maxpool_backward(dy, cache):
    arg, T = cache
    B, Tp, C = dy.shape
    dxr = np.zeros((B, Tp, 2, C), dtype=dy.dtype)
    np.put_along_axis(dxr, arg[:, :, None, :], dy[:, :, None, :], axis=2)
    dx = dxr.reshape(B, 2 * Tp, C)
    if T % 2:
        dx[:, T - 1, :] += dx[:, T, :]
    return dx[:, :T, :]


def upsample_forward(x, length):
    """Nearest-neighbour ×2 upsampling cropped to ``length`` frames."""
    y = np.repeat(x, 2, axis=1)[:, :length, :]
    return y, x.shape[1]


def upsample_backward(dy, t_in):
    B, L, C = dy.shape
    full = np.zeros((B, 2 * t_in, C), dtype=dy.dtype)
    full[:, :L, :] = dy
    return full.reshape(B, t_in, 2, C).sum(axis=2)


# --- LSTM ------------------------------------------------------------------

def lstm_forward(x, Wx, Wh, b):
    """Single-layer LSTM over time (gate order i, f, g, o), zero initial state."""
    B, T, _ = x.shape
    H = Wh.shape[0]
    zx = x @ Wx + b  # input contribution for all steps at once
    dt = zx.dtype
    h = np.zeros((B, H), dtype=dt)
    c = np.zeros((B, H), dtype=dt)
    hs = np.empty((B, T, H), dtype=dt)
    gates = np.empty((B, T, 4 * H), dtype=dt)
    cs = np.empty((B, T, H), dtype=dt)
    tcs = np.empty((B, T, H), dtype=dt)
    for t in range(T):
        z = zx[:, t, :] + h @ Wh
        ifo = sigmoid(z[:, np.r_[0:2 * H, 3 * H:4 * H]])
        i, f, o = ifo[:, :H], ifo[:, H:2 * H], ifo[:, 2 * H:]
        g = np.tanh(z[:, 2 * H:3 * H])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[:, t, :H] = i
        gates[:, t, H:2 * H] = f
        gates[:, t, 2 * H:3 * H] = g
        gates[:, t, 3 * H:] = o
        cs[:, t] = c
        tcs[:, t] = tc
        hs[:, t] = h
    return hs, (x, hs, gates, cs, tcs)


def lstm_backward(dhs, cache, Wx, Wh):
    x, hs, gates, cs, tcs = cache
    B, T, H = hs.shape
    dt = dhs.dtype
    dz_all = np.empty((B, T, 4 * H), dtype=dt)
    dWh = np.zeros_like(Wh)
    dh_next = np.zeros((B, H), dtype=dt)
    dc_next = np.zeros((B, H), dtype=dt)
    zero = np.zeros((B, H), dtype=dt)
    for t in range(T - 1, -1, -1):
        i = gates[:, t, :H]
        f = gates[:, t, H:2 * H]
        g = gates[:, t, 2 * H:3 * H]
        o = gates[:, t, 3 * H:]
        tc = tcs[:, t]
        c_prev = cs[:, t - 1] if t > 0 else zero
        h_prev = hs[:, t - 1] if t > 0 else zero
        dh = dhs[:, t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = do * o * (1.0 - o)
        dc_next = dc * f
        if t > 0:
            dWh += h_prev.T @ dz
        dh_next = dz @ Wh.T
    Cin = x.shape[-1]
    dzf = dz_all.reshape(B * T, 4 * H)
    dWx = x.reshape(B * T, Cin).T @ dzf
    db = dzf.sum(axis=0)
    dx = dz_all @ Wx.T
    return dx, dWx, dWh, db


# --- softmax / loss --------------------------------------------------------------

def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def dropout_mask(rng, shape, rate):
    if rate <= 0 or rng is None:
        return None
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep
