"""Finite-difference verification of the analytic gradients.

`gradient_check` compares the gradients reported by a (loss, grads) callable
against central differences at every coordinate. The error measure is
|analytic - numeric| / max(|analytic|, |numeric|, 1), i.e. relative error
with a unit floor so near-zero gradients are judged by absolute error.

The `*_harness` builders wrap each differentiable op as such a callable with
a random evaluation point; the scalar loss is the sum of all outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError
from . import functional as F


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst: str
    per_array: dict

    def __str__(self):
        return f"max rel error {self.max_rel_error:.3e} at {self.worst}"


def gradient_check(fn, arrays: dict, eps: float = 1e-5) -> GradCheckResult:
    """Check fn's analytic gradients at the given point.

    fn(arrays) must return (scalar_loss, grads) with grads keyed like
    `arrays`. The arrays are perturbed in place coordinate by coordinate and
    restored, so fn must not retain references across calls.
    """
    _, analytic = fn(arrays)
    for name, grad in analytic.items():
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite analytic gradient for {name!r}")
    worst = ""
    worst_err = 0.0
    per_array = {}
    for name, arr in arrays.items():
        a_grad = np.asarray(analytic[name])
        arr_max = 0.0
        flat = arr.reshape(-1)
        grad_flat = a_grad.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            loss_plus = fn(arrays)[0]
            flat[idx] = original - eps
            loss_minus = fn(arrays)[0]
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            a = grad_flat[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            if err > arr_max:
                arr_max = err
            if err > worst_err:
                worst_err = err
                worst = f"{name}[{idx}]"
        per_array[name] = arr_max
    return GradCheckResult(max_rel_error=worst_err, worst=worst, per_array=per_array)


# ---------------------------------------------------------------------------
# harnesses: (fn, point) pairs for each differentiable op
# ---------------------------------------------------------------------------

def feed_forward_harness(rows=3, d_model=4, d_ff=5, seed=0):
    rng = np.random.default_rng(seed)
    arrays = {
        "x": rng.standard_normal((rows, d_model)),
        "w1": rng.standard_normal((d_model, d_ff)) * 0.5,
        "w2": rng.standard_normal((d_ff, d_model)) * 0.5,
    }

    def fn(a):
        out, cache = F.feed_forward_forward(a["x"], a["w1"], a["w2"])
        d_x, d_w1, d_w2 = F.feed_forward_backward(cache, np.ones_like(out))
        return float(out.sum()), {"x": d_x, "w1": d_w1, "w2": d_w2}

    return fn, arrays


def residual_layer_norm_harness(rows=3, d_model=6, seed=0):
    rng = np.random.default_rng(seed)
    arrays = {
        "x": rng.standard_normal((rows, d_model)),
        "sub": rng.standard_normal((rows, d_model)),
        "gain": rng.uniform(0.5, 1.5, d_model),
        "bias": rng.standard_normal(d_model) * 0.1,
    }

    def fn(a):
        out, cache = F.residual_layer_norm_forward(a["x"], a["sub"], a["gain"], a["bias"])
        d_s, d_gain, d_bias = F.residual_layer_norm_backward(cache, np.ones_like(out))
        return float(out.sum()), {"x": d_s, "sub": d_s, "gain": d_gain, "bias": d_bias}

    return fn, arrays


def attention_harness(n_q=3, n_kv=4, d_k=2, d_v=3, seed=0, mask=None):
    rng = np.random.default_rng(seed)
    arrays = {
        "q": rng.standard_normal((n_q, d_k)),
        "k": rng.standard_normal((n_kv, d_k)),
        "v": rng.standard_normal((n_kv, d_v)),
    }

    def fn(a):
        out, _, cache = F.scaled_dot_product_attention_forward(
            a["q"], a["k"], a["v"], mask=mask)
        d_q, d_k_, d_v = F.scaled_dot_product_attention_backward(cache, np.ones_like(out))
        return float(out.sum()), {"q": d_q, "k": d_k_, "v": d_v}

    return fn, arrays


def multi_head_attention_harness(n=3, d_model=4, heads=2, seed=0, mask=None):
    rng = np.random.default_rng(seed)
    w = F.init_projection(d_model, heads, rng)
    arrays = {
        "x": rng.standard_normal((n, d_model)),
        "w_q": w.w_q, "w_k": w.w_k, "w_v": w.w_v, "w_o": w.w_o,
    }

    def fn(a):
        proj = F.ProjectionWeights(a["w_q"], a["w_k"], a["w_v"], a["w_o"])
        out, _, cache = F.multi_head_attention_forward(a["x"], a["x"], proj, mask)
        d_x_q, d_x_kv, w_grads = F.multi_head_attention_backward(cache, np.ones_like(out))
        grads = {"x": d_x_q + d_x_kv}
        grads.update(w_grads)
        return float(out.sum()), grads

    return fn, arrays


def lstm_step_harness(channels=3, hidden=4, seed=0):
    rng = np.random.default_rng(seed)
    w = F.init_lstm(channels, hidden, rng)
    arrays = {
        "x": rng.standard_normal(channels),
        "h_prev": rng.standard_normal(hidden) * 0.5,
        "c_prev": rng.standard_normal(hidden) * 0.5,
        "w_f": w.w_f, "w_i": w.w_i, "w_c": w.w_c, "w_o": w.w_o,
        "b_f": rng.standard_normal(hidden) * 0.1,
        "b_i": rng.standard_normal(hidden) * 0.1,
        "b_c": rng.standard_normal(hidden) * 0.1,
        "b_o": rng.standard_normal(hidden) * 0.1,
    }

    def fn(a):
        w = F.LstmWeights(a["w_f"], a["w_i"], a["w_c"], a["w_o"],
                          a["b_f"], a["b_i"], a["b_c"], a["b_o"])
        h, c, cache = F.lstm_step_forward(a["x"], a["h_prev"], a["c_prev"], w)
        d_x, d_h_prev, d_c_prev, grads = F.lstm_step_backward(
            cache, w, np.ones_like(h), np.ones_like(c))
        out = {"x": d_x, "h_prev": d_h_prev, "c_prev": d_c_prev}
        out.update(grads)
        return float(h.sum() + c.sum()), out

    return fn, arrays


def temporal_embed_harness(m=4, nodes=3, channels=2, hidden=4, seed=0):
    rng = np.random.default_rng(seed)
    w = F.init_lstm(channels, hidden, rng)
    arrays = {
        "window": rng.standard_normal((m, nodes, channels)),
        "w_f": w.w_f, "w_i": w.w_i, "w_c": w.w_c, "w_o": w.w_o,
        "b_f": rng.standard_normal(hidden) * 0.1,
        "b_i": rng.standard_normal(hidden) * 0.1,
        "b_c": rng.standard_normal(hidden) * 0.1,
        "b_o": rng.standard_normal(hidden) * 0.1,
    }

    def fn(a):
        w = F.LstmWeights(a["w_f"], a["w_i"], a["w_c"], a["w_o"],
                          a["b_f"], a["b_i"], a["b_c"], a["b_o"])
        out, cache = F.temporal_embed_forward(a["window"], w)
        d_window, grads = F.temporal_embed_backward(cache, np.ones_like(out))
        full = {"window": d_window}
        full.update(grads)
        return float(out.sum()), full

    return fn, arrays
