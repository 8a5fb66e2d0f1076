"""Differentiable building blocks with explicit forward/backward pairs.

Every op accepts arbitrary leading batch dimensions; the documented 2-D
contracts are the unbatched special case. Forward functions return
`(output, cache)`; the matching `*_backward(cache, grad_out)` returns
gradients for inputs and parameters computed analytically, so the whole
stack can be verified against finite differences.

Masking is additive minus-infinity before the softmax, which makes masked
attention weights exactly zero and keeps their gradients exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DegenerateRowError
from ..kernels import lstm_seq_backward, lstm_seq_forward

LAYER_NORM_EPS = 1e-5


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------

def softmax_rows(x: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Row-wise softmax over the last axis, max-shifted for stability.

    `mask` (broadcastable, boolean) marks allowed entries; disallowed entries
    are -inf before the softmax and exactly 0 after it.
    """
    x = np.asarray(x, dtype=np.float64)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise DegenerateRowError("softmax row with every entry masked")
        x = np.where(mask, x, -np.inf)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_rows_backward(y: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """VJP of softmax_rows given its output `y`."""
    inner = (grad * y).sum(axis=-1, keepdims=True)
    return y * (grad - inner)


# ---------------------------------------------------------------------------
# scaled dot-product attention
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttentionOutput:
    """Attention result plus the row-stochastic weight matrices that made it."""

    output: np.ndarray
    weights: np.ndarray


def scaled_dot_product_attention_forward(q, k, v, d_k=None, mask=None):
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"q and k need equal depth, got {q.shape[-1]} and {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(f"k and v need equal rows, got {k.shape[-2]} and {v.shape[-2]}")
    if d_k is None:
        d_k = q.shape[-1]
    scale = 1.0 / math.sqrt(d_k)
    logits = np.matmul(q, np.swapaxes(k, -1, -2)) * scale
    weights = softmax_rows(logits, mask)
    output = np.matmul(weights, v)
    cache = (q, k, v, weights, scale)
    return output, weights, cache


def scaled_dot_product_attention_backward(cache, grad_out, grad_weights=None):
    q, k, v, weights, scale = cache
    d_weights = np.matmul(grad_out, np.swapaxes(v, -1, -2))
    if grad_weights is not None:
        d_weights = d_weights + grad_weights
    d_v = np.matmul(np.swapaxes(weights, -1, -2), grad_out)
    d_logits = softmax_rows_backward(weights, d_weights)
    d_q = np.matmul(d_logits, k) * scale
    d_k = np.matmul(np.swapaxes(d_logits, -1, -2), q) * scale
    return d_q, d_k, d_v


def scaled_dot_product_attention(q, k, v, d_k=None, mask=None) -> AttentionOutput:
    output, weights, _ = scaled_dot_product_attention_forward(q, k, v, d_k, mask)
    return AttentionOutput(output=output, weights=weights)


# ---------------------------------------------------------------------------
# multi-head attention
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionWeights:
    """Per-head query/key/value projections plus the output merge.

    w_q/w_k/w_v have shape (heads, d_model, d_k); w_o has shape
    (heads * d_k, d_model) with d_k = d_model / heads.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray

    def __post_init__(self):
        h, d_model, d_k = self.w_q.shape
        if h * d_k != d_model:
            raise ConfigError(
                f"head count {h} with d_k {d_k} does not reproduce d_model {d_model}")
        for name in ("w_k", "w_v"):
            if getattr(self, name).shape != (h, d_model, d_k):
                raise ConfigError(f"{name} shape {getattr(self, name).shape} mismatch")
        if self.w_o.shape != (h * d_k, d_model):
            raise ConfigError(f"w_o shape {self.w_o.shape}, expected {(h * d_k, d_model)}")

    @property
    def heads(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_model(self) -> int:
        return self.w_q.shape[1]


def init_projection(d_model: int, heads: int, rng: np.random.Generator) -> ProjectionWeights:
    if d_model % heads != 0:
        raise ConfigError(f"heads {heads} must divide d_model {d_model}")
    d_k = d_model // heads
    bound = math.sqrt(1.0 / d_model)
    shape = (heads, d_model, d_k)
    return ProjectionWeights(
        w_q=rng.uniform(-bound, bound, shape),
        w_k=rng.uniform(-bound, bound, shape),
        w_v=rng.uniform(-bound, bound, shape),
        w_o=rng.uniform(-bound, bound, (heads * d_k, d_model)),
    )


def multi_head_attention_forward(x_q, x_kv, w: ProjectionWeights, mask=None):
    """MultiHead(Q, K, V) with Q from `x_q` and K, V from `x_kv`.

    Self-attention is the `x_q is x_kv` case. Returns per-head weight
    matrices of shape (..., heads, n_q, n_kv).
    """
    x_q = np.asarray(x_q, dtype=np.float64)
    x_kv = np.asarray(x_kv, dtype=np.float64)
    h, d_model, d_k = w.w_q.shape
    if x_q.shape[-1] != d_model or x_kv.shape[-1] != d_model:
        raise ValueError(
            f"inputs must have {d_model} features, got {x_q.shape[-1]} / {x_kv.shape[-1]}")
    q = np.einsum("...nd,hdk->...hnk", x_q, w.w_q)
    k = np.einsum("...md,hdk->...hmk", x_kv, w.w_k)
    v = np.einsum("...md,hdk->...hmk", x_kv, w.w_v)
    scale = 1.0 / math.sqrt(d_k)
    logits = np.einsum("...hnk,...hmk->...hnm", q, k) * scale
    weights = softmax_rows(logits, mask)
    ctx = np.einsum("...hnm,...hmk->...hnk", weights, v)
    merged = np.moveaxis(ctx, -3, -2)
    merged = merged.reshape(merged.shape[:-2] + (h * d_k,))
    output = merged @ w.w_o
    cache = (x_q, x_kv, q, k, v, weights, merged, w, scale)
    return output, weights, cache


def multi_head_attention_backward(cache, grad_out):
    x_q, x_kv, q, k, v, weights, merged, w, scale = cache
    h, d_model, d_k = w.w_q.shape
    n_q = x_q.shape[-2]

    d_merged = grad_out @ w.w_o.T
    d_w_o = np.einsum("...nc,...nd->cd", merged, grad_out)
    d_ctx = d_merged.reshape(d_merged.shape[:-1] + (h, d_k))
    d_ctx = np.moveaxis(d_ctx, -2, -3)

    d_weights = np.einsum("...hnk,...hmk->...hnm", d_ctx, v)
    d_v = np.einsum("...hnm,...hnk->...hmk", weights, d_ctx)
    d_logits = softmax_rows_backward(weights, d_weights)
    d_q = np.einsum("...hnm,...hmk->...hnk", d_logits, k) * scale
    d_k_ = np.einsum("...hnm,...hnk->...hmk", d_logits, q) * scale

    d_x_q = np.einsum("...hnk,hdk->...nd", d_q, w.w_q)
    d_w_q = np.einsum("...nd,...hnk->hdk", x_q, d_q)
    d_x_kv = (np.einsum("...hmk,hdk->...md", d_k_, w.w_k)
              + np.einsum("...hmk,hdk->...md", d_v, w.w_v))
    d_w_k = np.einsum("...md,...hmk->hdk", x_kv, d_k_)
    d_w_v = np.einsum("...md,...hmk->hdk", x_kv, d_v)
    grads = {"w_q": d_w_q, "w_k": d_w_k, "w_v": d_w_v, "w_o": d_w_o}
    return d_x_q, d_x_kv, grads


def multi_head_attention(x_q, x_kv, w: ProjectionWeights, mask=None) -> AttentionOutput:
    output, weights, _ = multi_head_attention_forward(x_q, x_kv, w, mask)
    return AttentionOutput(output=output, weights=weights)


# ---------------------------------------------------------------------------
# position-wise feed-forward
# ---------------------------------------------------------------------------

def feed_forward_forward(x, w1, w2):
    """ReLU(x W1) W2, applied to each row independently. No bias terms."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != w1.shape[0] or w1.shape[1] != w2.shape[0]:
        raise ValueError(
            f"shape mismatch: x {x.shape}, w1 {w1.shape}, w2 {w2.shape}")
    pre = x @ w1
    hidden = np.maximum(pre, 0.0)
    out = hidden @ w2
    return out, (x, pre, hidden, w1, w2)


def feed_forward_backward(cache, grad_out):
    x, pre, hidden, w1, w2 = cache
    d_hidden = grad_out @ w2.T
    d_w2 = np.einsum("...nf,...nd->fd", hidden, grad_out)
    d_pre = d_hidden * (pre > 0.0)
    d_w1 = np.einsum("...nd,...nf->df", x, d_pre)
    d_x = d_pre @ w1.T
    return d_x, d_w1, d_w2


def feed_forward(x, w1, w2) -> np.ndarray:
    out, _ = feed_forward_forward(x, w1, w2)
    return out


# ---------------------------------------------------------------------------
# residual + layer norm (post-norm)
# ---------------------------------------------------------------------------

def residual_layer_norm_forward(x, sublayer_out, gain, bias, eps=LAYER_NORM_EPS):
    """LayerNorm(x + sublayer_out) with learnable gain/bias per feature."""
    s = x + sublayer_out
    mean = s.mean(axis=-1, keepdims=True)
    centered = s - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    normalized = centered * inv
    out = normalized * gain + bias
    return out, (normalized, inv, gain)


def residual_layer_norm_backward(cache, grad_out):
    normalized, inv, gain = cache
    reduce_axes = tuple(range(grad_out.ndim - 1))
    d_gain = (grad_out * normalized).sum(axis=reduce_axes)
    d_bias = grad_out.sum(axis=reduce_axes)
    d_norm = grad_out * gain
    d_s = inv * (d_norm
                 - d_norm.mean(axis=-1, keepdims=True)
                 - normalized * (d_norm * normalized).mean(axis=-1, keepdims=True))
    # the residual sum distributes the same gradient to both addends
    return d_s, d_gain, d_bias


def residual_layer_norm(x, sublayer_out, gain, bias) -> np.ndarray:
    out, _ = residual_layer_norm_forward(x, sublayer_out, gain, bias)
    return out


# ---------------------------------------------------------------------------
# positional encoding
# ---------------------------------------------------------------------------

def positional_encoding(node_count: int, d_model: int) -> np.ndarray:
    """Fixed sinusoids over node positions: sin at even dims, cos at odd dims."""
    if d_model % 2 != 0:
        raise ConfigError(f"d_model must be even for positional encoding, got {d_model}")
    pos = np.arange(node_count, dtype=np.float64)[:, None]
    even = np.arange(0, d_model, 2, dtype=np.float64)
    angles = pos / np.power(10000.0, even / d_model)
    pe = np.empty((node_count, d_model), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LstmWeights:
    """Gate weights over the (hidden, input) concatenation, one matrix per gate."""

    w_f: np.ndarray
    w_i: np.ndarray
    w_c: np.ndarray
    w_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        shape = self.w_f.shape
        hidden = shape[1]
        for name in ("w_i", "w_c", "w_o"):
            if getattr(self, name).shape != shape:
                raise ConfigError(f"{name} shape {getattr(self, name).shape} != {shape}")
        for name in ("b_f", "b_i", "b_c", "b_o"):
            if getattr(self, name).shape != (hidden,):
                raise ConfigError(f"{name} must have shape ({hidden},)")

    @property
    def hidden_size(self) -> int:
        return self.w_f.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_f.shape[0] - self.w_f.shape[1]

    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        """Gate-fused (W, b) with column blocks ordered [forget, input, cell, output]."""
        w = np.concatenate([self.w_f, self.w_i, self.w_c, self.w_o], axis=1)
        b = np.concatenate([self.b_f, self.b_i, self.b_c, self.b_o])
        return np.ascontiguousarray(w), np.ascontiguousarray(b)


def init_lstm(input_size: int, hidden_size: int, rng: np.random.Generator) -> LstmWeights:
    fan_in = hidden_size + input_size
    bound = math.sqrt(1.0 / fan_in)
    def mat():
        return rng.uniform(-bound, bound, (fan_in, hidden_size))
    zeros = np.zeros(hidden_size)
    return LstmWeights(w_f=mat(), w_i=mat(), w_c=mat(), w_o=mat(),
                       b_f=zeros.copy(), b_i=zeros.copy(), b_c=zeros.copy(),
                       b_o=zeros.copy())


def lstm_step_forward(x_t, h_prev, c_prev, w: LstmWeights):
    """One recurrence step over the concatenation (h_prev, x_t).

    Gates: f forgets the old cell, i admits the candidate, o exposes the new
    cell through tanh.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    z = np.concatenate([h_prev, x_t], axis=-1)
    if z.shape[-1] != w.w_f.shape[0]:
        raise ValueError(
            f"concat width {z.shape[-1]} does not match gate rows {w.w_f.shape[0]}")
    f = sigmoid(z @ w.w_f + w.b_f)
    i = sigmoid(z @ w.w_i + w.b_i)
    g = np.tanh(z @ w.w_c + w.b_c)
    c = f * c_prev + i * g
    o = sigmoid(z @ w.w_o + w.b_o)
    h = o * np.tanh(c)
    return h, c, (z, f, i, g, o, c_prev, c)


def lstm_step_backward(cache, w: LstmWeights, grad_h, grad_c=None):
    z, f, i, g, o, c_prev, c = cache
    hidden = w.hidden_size
    tc = np.tanh(c)
    d_o = grad_h * tc
    d_c = grad_h * o * (1.0 - tc * tc)
    if grad_c is not None:
        d_c = d_c + grad_c
    d_f = d_c * c_prev
    d_i = d_c * g
    d_g = d_c * i
    d_c_prev = d_c * f
    a_f = d_f * f * (1.0 - f)
    a_i = d_i * i * (1.0 - i)
    a_g = d_g * (1.0 - g * g)
    a_o = d_o * o * (1.0 - o)
    d_z = a_f @ w.w_f.T + a_i @ w.w_i.T + a_g @ w.w_c.T + a_o @ w.w_o.T

    flat_z = z.reshape(-1, z.shape[-1])
    grads = {
        "w_f": flat_z.T @ a_f.reshape(-1, hidden),
        "w_i": flat_z.T @ a_i.reshape(-1, hidden),
        "w_c": flat_z.T @ a_g.reshape(-1, hidden),
        "w_o": flat_z.T @ a_o.reshape(-1, hidden),
        "b_f": a_f.reshape(-1, hidden).sum(axis=0),
        "b_i": a_i.reshape(-1, hidden).sum(axis=0),
        "b_c": a_g.reshape(-1, hidden).sum(axis=0),
        "b_o": a_o.reshape(-1, hidden).sum(axis=0),
    }
    d_h_prev = d_z[..., :hidden]
    d_x = d_z[..., hidden:]
    return d_x, d_h_prev, d_c_prev, grads


def lstm_step(x_t, h_prev, c_prev, w: LstmWeights):
    h, c, _ = lstm_step_forward(x_t, h_prev, c_prev, w)
    return h, c


# ---------------------------------------------------------------------------
# temporal embedding: shared-weight LSTM over the input window, per node
# ---------------------------------------------------------------------------

def temporal_embed_forward(window, w: LstmWeights):
    """Run the LSTM over the m timesteps of (..., m, N, C); keep the last hidden state.

    Weights are shared across nodes; h and C start at zero. Output shape is
    (..., N, hidden).
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 3:
        window = window[None]
        squeeze = True
    elif window.ndim == 4:
        squeeze = False
    else:
        raise ValueError(f"window must be (m, N, C) or (B, m, N, C), got {window.shape}")
    b, m, n, c = window.shape
    if m == 0:
        raise ValueError("temporal embedding needs a non-empty window")
    if c != w.input_size:
        raise ValueError(f"window has {c} channels, weights expect {w.input_size}")
    # fold batch and node axes into rows: the recurrence is independent per node
    steps = np.ascontiguousarray(window.transpose(1, 0, 2, 3).reshape(m, b * n, c))
    w_all, b_all = w.packed()
    h_final, seq_cache = lstm_seq_forward(steps, w_all, b_all)
    out = h_final.reshape(b, n, w.hidden_size)
    cache = (seq_cache, w_all, (b, m, n, c), squeeze)
    if squeeze:
        out = out[0]
    return out, cache


def temporal_embed_backward(cache, grad_out):
    seq_cache, w_all, (b, m, n, c), squeeze = cache
    hidden = w_all.shape[1] // 4
    if squeeze:
        grad_out = grad_out[None]
    d_h = np.ascontiguousarray(grad_out.reshape(b * n, hidden))
    d_steps, d_w_all, d_b_all = lstm_seq_backward(seq_cache, w_all, d_h)
    d_window = d_steps.reshape(m, b, n, c).transpose(1, 0, 2, 3)
    if squeeze:
        d_window = d_window[0]
    grads = {
        "w_f": d_w_all[:, 0 * hidden:1 * hidden],
        "w_i": d_w_all[:, 1 * hidden:2 * hidden],
        "w_c": d_w_all[:, 2 * hidden:3 * hidden],
        "w_o": d_w_all[:, 3 * hidden:4 * hidden],
        "b_f": d_b_all[0 * hidden:1 * hidden],
        "b_i": d_b_all[1 * hidden:2 * hidden],
        "b_c": d_b_all[2 * hidden:3 * hidden],
        "b_o": d_b_all[3 * hidden:4 * hidden],
    }
    return d_window, grads


def temporal_embed(window, w: LstmWeights) -> np.ndarray:
    out, _ = temporal_embed_forward(window, w)
    return out
