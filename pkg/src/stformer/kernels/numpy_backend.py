"""Pure-numpy implementation of the fused LSTM sequence kernel.

Identical algorithm and gate layout to the compiled kernel in
``stformer._core``: gate pre-activations are one fused matmul per step over
the (hidden | input) concatenation, columns ordered [forget, input, cell,
output].
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_seq_forward(steps: np.ndarray, w_all: np.ndarray, b_all: np.ndarray):
    """Run the recurrence over (m, R, C) rows; return final hidden (R, H) + cache."""
    m, rows, c = steps.shape
    hidden = w_all.shape[1] // 4
    zs = np.empty((m, rows, hidden + c))
    acts = np.empty((m, rows, 4 * hidden))
    cells = np.zeros((m + 1, rows, hidden))
    h = np.zeros((rows, hidden))
    for t in range(m):
        zs[t, :, :hidden] = h
        zs[t, :, hidden:] = steps[t]
        pre = zs[t] @ w_all + b_all
        f = _sigmoid(pre[:, 0 * hidden:1 * hidden])
        i = _sigmoid(pre[:, 1 * hidden:2 * hidden])
        g = np.tanh(pre[:, 2 * hidden:3 * hidden])
        o = _sigmoid(pre[:, 3 * hidden:4 * hidden])
        acts[t, :, 0 * hidden:1 * hidden] = f
        acts[t, :, 1 * hidden:2 * hidden] = i
        acts[t, :, 2 * hidden:3 * hidden] = g
        acts[t, :, 3 * hidden:4 * hidden] = o
        cells[t + 1] = f * cells[t] + i * g
        h = o * np.tanh(cells[t + 1])
    cache = (zs, acts, cells)
    return h, cache


def lstm_seq_backward(cache, w_all: np.ndarray, grad_h: np.ndarray):
    """Backprop through time; returns (d_steps, d_w_all, d_b_all)."""
    zs, acts, cells = cache
    m, rows, width = zs.shape
    hidden = w_all.shape[1] // 4
    c = width - hidden
    d_steps = np.empty((m, rows, c))
    d_w = np.zeros_like(w_all)
    d_b = np.zeros(4 * hidden)
    d_h = grad_h.copy()
    d_c = np.zeros((rows, hidden))
    for t in range(m - 1, -1, -1):
        f = acts[t, :, 0 * hidden:1 * hidden]
        i = acts[t, :, 1 * hidden:2 * hidden]
        g = acts[t, :, 2 * hidden:3 * hidden]
        o = acts[t, :, 3 * hidden:4 * hidden]
        c_prev = cells[t]
        tc = np.tanh(cells[t + 1])
        d_o = d_h * tc
        d_cell = d_c + d_h * o * (1.0 - tc * tc)
        a = np.empty((rows, 4 * hidden))
        a[:, 0 * hidden:1 * hidden] = d_cell * c_prev * f * (1.0 - f)
        a[:, 1 * hidden:2 * hidden] = d_cell * g * i * (1.0 - i)
        a[:, 2 * hidden:3 * hidden] = d_cell * i * (1.0 - g * g)
        a[:, 3 * hidden:4 * hidden] = d_o * o * (1.0 - o)
        d_w += zs[t].T @ a
        d_b += a.sum(axis=0)
        d_z = a @ w_all.T
        d_h = d_z[:, :hidden]
        d_steps[t] = d_z[:, hidden:]
        d_c = d_cell * f
    return d_steps, d_w, d_b
