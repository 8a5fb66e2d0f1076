"""Model assembly and variants.

Pipeline: temporal embedding (shared-weight LSTM over the input window, or a
flatten-and-project stand-in), fixed sinusoidal positional encoding plus a
learnable per-node embedding, a stack of global self-attention encoder
blocks, a stack of decoder blocks combining K-hop-masked self-attention with
fusion attention over the encoder output, and a shared per-node linear head
that emits all forecast horizons in a single forward pass. Nothing is fed
back autoregressively.

Parameters live in a flat name -> array mapping whose insertion order is the
canonical checkpoint order.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .data import NormalizationStats, zscore_invert
from .errors import (ConfigError, FormatError, IncompatibleCheckpointError,
                     MissingGraphError, NumericError)
from .graph import SensorGraph, build_khop_mask
from .nn import functional as F

CHECKPOINT_MAGIC = b"STFMCKPT"


class Variant(str, Enum):
    FULL = "full"
    ENCODER_ONLY = "encoder-only"
    DECODER_ONLY = "decoder-only"
    NO_TEMPORAL = "no-temporal"
    FC_LSTM = "fc-lstm"


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    d_ff: int = 256
    heads: int = 8
    encoder_blocks: int = 6
    decoder_blocks: int = 6
    horizon: int = 12
    window: int = 12
    mask_hops: int = 3
    channels: int = 3
    variant: Variant = Variant.FULL
    use_sinusoidal_pe: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.d_model < 2 or self.d_model % 2 != 0:
            raise ConfigError(f"d_model must be even and >= 2, got {self.d_model}")
        if self.heads < 1 or self.d_model % self.heads != 0:
            raise ConfigError(
                f"heads ({self.heads}) must divide d_model ({self.d_model})")
        if self.has_encoder and self.encoder_blocks < 1:
            raise ConfigError("encoder_blocks must be >= 1 for this variant")
        if self.has_decoder and self.decoder_blocks < 1:
            raise ConfigError("decoder_blocks must be >= 1 for this variant")
        for name in ("d_ff", "horizon", "window", "mask_hops", "channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    # variant structure
    @property
    def has_encoder(self) -> bool:
        return self.variant in (Variant.FULL, Variant.ENCODER_ONLY, Variant.NO_TEMPORAL)

    @property
    def has_decoder(self) -> bool:
        return self.variant in (Variant.FULL, Variant.DECODER_ONLY, Variant.NO_TEMPORAL)

    @property
    def has_fusion(self) -> bool:
        # decoder-only drops the fusion attention: no encoder memory to read
        return self.has_decoder and self.has_encoder

    @property
    def needs_graph(self) -> bool:
        return self.has_decoder

    @property
    def uses_lstm(self) -> bool:
        return self.variant != Variant.NO_TEMPORAL

    @property
    def uses_positional(self) -> bool:
        return self.variant != Variant.FC_LSTM

    def to_dict(self) -> dict:
        return {
            "d_model": self.d_model, "d_ff": self.d_ff, "heads": self.heads,
            "encoder_blocks": self.encoder_blocks, "decoder_blocks": self.decoder_blocks,
            "horizon": self.horizon, "window": self.window,
            "mask_hops": self.mask_hops, "channels": self.channels,
            "variant": self.variant.value,
            "use_sinusoidal_pe": self.use_sinusoidal_pe,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class ParameterSet:
    """All learnable weights, keyed by canonical name in checkpoint order."""

    config: ModelConfig
    node_count: int
    arrays: "dict[str, np.ndarray]"

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.config, self.node_count,
                            {k: v.copy() for k, v in self.arrays.items()})

    def total_parameters(self) -> int:
        return sum(a.size for a in self.arrays.values())


@dataclass(frozen=True)
class AttentionRecord:
    """Head-averaged attention matrices captured during one forward pass.

    `src` comes from the encoder self-attention, `tgt` from the decoder's
    K-hop-masked self-attention, `mem` from the decoder's fusion attention
    over the encoder output; one matrix per block, in stack order.
    """

    src: tuple
    tgt: tuple
    mem: tuple

    def select(self, kind: str, layer: int | None = None) -> np.ndarray:
        matrices = getattr(self, kind)
        if not matrices:
            raise ConfigError(f"this record has no {kind!r} matrices")
        index = len(matrices) - 1 if layer is None else layer - 1
        if not 0 <= index < len(matrices):
            raise ConfigError(f"{kind} layer {layer} out of range 1..{len(matrices)}")
        return matrices[index]


@dataclass(frozen=True)
class ForecastResult:
    predictions: np.ndarray  # (horizon, N)
    attention: AttentionRecord


# ---------------------------------------------------------------------------
# parameter layout
# ---------------------------------------------------------------------------

def _attention_entries(prefix: str, d: int, h: int):
    d_k = d // h
    return [
        (f"{prefix}.w_q", (h, d, d_k), ("uniform", d)),
        (f"{prefix}.w_k", (h, d, d_k), ("uniform", d)),
        (f"{prefix}.w_v", (h, d, d_k), ("uniform", d)),
        (f"{prefix}.w_o", (h * d_k, d), ("uniform", d)),
    ]


def _norm_entries(prefix: str, d: int):
    return [(f"{prefix}.gain", (d,), ("ones", 0)), (f"{prefix}.bias", (d,), ("zeros", 0))]


def _ffn_entries(prefix: str, d: int, d_ff: int):
    return [(f"{prefix}.w1", (d, d_ff), ("uniform", d)),
            (f"{prefix}.w2", (d_ff, d), ("uniform", d_ff))]


def parameter_layout(config: ModelConfig, node_count: int):
    """Canonical (name, shape, init) list; also the checkpoint order."""
    d, h = config.d_model, config.heads
    entries = []
    if config.uses_lstm:
        fan = d + config.channels
        for gate in ("f", "i", "c", "o"):
            entries.append((f"temporal.w_{gate}", (fan, d), ("uniform", fan)))
        for gate in ("f", "i", "c", "o"):
            entries.append((f"temporal.b_{gate}", (d,), ("zeros", 0)))
    else:
        entries.append(("embed.w", (config.window, d), ("uniform", config.window)))
    if config.uses_positional:
        entries.append(("pos.p", (node_count, d), ("uniform", d)))
    if config.has_encoder:
        for i in range(config.encoder_blocks):
            entries += _attention_entries(f"enc{i}.attn", d, h)
            entries += _norm_entries(f"enc{i}.ln1", d)
            entries += _ffn_entries(f"enc{i}.ffn", d, config.d_ff)
            entries += _norm_entries(f"enc{i}.ln2", d)
    if config.has_decoder:
        for i in range(config.decoder_blocks):
            entries += _attention_entries(f"dec{i}.self", d, h)
            entries += _norm_entries(f"dec{i}.ln1", d)
            if config.has_fusion:
                entries += _attention_entries(f"dec{i}.fuse", d, h)
                entries += _norm_entries(f"dec{i}.ln2", d)
                entries += _ffn_entries(f"dec{i}.ffn", d, config.d_ff)
                entries += _norm_entries(f"dec{i}.ln3", d)
            else:
                entries += _ffn_entries(f"dec{i}.ffn", d, config.d_ff)
                entries += _norm_entries(f"dec{i}.ln2", d)
    entries.append(("head.w", (d, config.horizon), ("uniform", d)))
    return entries


def init_parameters(config: ModelConfig, node_count: int, seed: int) -> ParameterSet:
    """Deterministic initialization: uniform +-sqrt(1/fan_in) matrices,
    unit layer-norm gains, zero biases."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape, (kind, fan_in) in parameter_layout(config, node_count):
        if kind == "uniform":
            bound = math.sqrt(1.0 / fan_in)
            arrays[name] = rng.uniform(-bound, bound, shape)
        elif kind == "ones":
            arrays[name] = np.ones(shape)
        else:
            arrays[name] = np.zeros(shape)
    return ParameterSet(config=config, node_count=node_count, arrays=arrays)


def parameter_count(config: ModelConfig, node_count: int) -> int:
    """Closed-form size of the parameter set for (config, N)."""
    d, dff, c = config.d_model, config.d_ff, config.channels
    attn = 4 * d * d
    norm = 2 * d
    ffn = 2 * d * dff
    total = 0
    if config.uses_lstm:
        total += 4 * ((d + c) * d + d)
    else:
        total += config.window * d
    if config.uses_positional:
        total += node_count * d
    if config.has_encoder:
        total += config.encoder_blocks * (attn + ffn + 2 * norm)
    if config.has_decoder:
        per_block = attn + ffn + 2 * norm
        if config.has_fusion:
            per_block += attn + norm
        total += config.decoder_blocks * per_block
    total += d * config.horizon
    return total


def no_decay(name: str) -> bool:
    """Parameters exempt from weight decay: positional embedding, norm gains/biases."""
    return name == "pos.p" or ".ln" in name


def _proj(params: ParameterSet, prefix: str) -> F.ProjectionWeights:
    a = params.arrays
    return F.ProjectionWeights(a[f"{prefix}.w_q"], a[f"{prefix}.w_k"],
                               a[f"{prefix}.w_v"], a[f"{prefix}.w_o"])


def lstm_weights(params: ParameterSet) -> F.LstmWeights:
    a = params.arrays
    return F.LstmWeights(a["temporal.w_f"], a["temporal.w_i"], a["temporal.w_c"],
                         a["temporal.w_o"], a["temporal.b_f"], a["temporal.b_i"],
                         a["temporal.b_c"], a["temporal.b_o"])


def _check_finite(arr: np.ndarray, stage: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values after {stage}")


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------

def forward_batch(x, params: ParameterSet, mask=None, capture=False,
                  average_heads=True, check=True):
    """Batched forward pass.

    x: (B, m, N, C) normalized inputs. `mask` is the (N, N) boolean K-hop
    pattern, required by variants with a decoder. Returns
    (predictions (B, n, N), caches, records) where records holds captured
    attention matrices when `capture` is set.
    """
    cfg = params.config
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"expected (B, m, N, C) input, got shape {x.shape}")
    b, m, n_nodes, c = x.shape
    if m != cfg.window:
        raise ConfigError(f"window length {m} != configured {cfg.window}")
    if c != cfg.channels:
        raise ConfigError(f"{c} channels != configured {cfg.channels}")
    if n_nodes != params.node_count:
        raise ConfigError(f"{n_nodes} nodes != parameter set's {params.node_count}")
    if cfg.needs_graph and mask is None:
        raise MissingGraphError(
            f"variant {cfg.variant.value!r} needs an adjacency-derived K-hop mask")

    a = params.arrays
    caches = {"shape": (b, m, n_nodes, c)}
    records = {"src": [], "tgt": [], "mem": []}

    def record(kind, weights):
        if capture:
            records[kind].append(weights.mean(axis=1) if average_heads else weights)

    if cfg.uses_lstm:
        e0, caches["temporal"] = F.temporal_embed_forward(x, lstm_weights(params))
    else:
        seq = np.ascontiguousarray(x[..., 0].transpose(0, 2, 1))  # (B, N, m)
        e0 = seq @ a["embed.w"]
        caches["embed_seq"] = seq
    if check:
        _check_finite(e0, "temporal embedding")

    if cfg.variant == Variant.FC_LSTM:
        state = e0
    else:
        e = e0 + a["pos.p"]
        if cfg.use_sinusoidal_pe:
            e = e + F.positional_encoding(n_nodes, cfg.d_model)
        y = e
        if cfg.has_encoder:
            enc_caches = []
            for i in range(cfg.encoder_blocks):
                att, w, c_att = F.multi_head_attention_forward(y, y, _proj(params, f"enc{i}.attn"))
                y1, c_ln1 = F.residual_layer_norm_forward(
                    y, att, a[f"enc{i}.ln1.gain"], a[f"enc{i}.ln1.bias"])
                ff, c_ff = F.feed_forward_forward(y1, a[f"enc{i}.ffn.w1"], a[f"enc{i}.ffn.w2"])
                y, c_ln2 = F.residual_layer_norm_forward(
                    y1, ff, a[f"enc{i}.ln2.gain"], a[f"enc{i}.ln2.bias"])
                enc_caches.append((c_att, c_ln1, c_ff, c_ln2))
                record("src", w)
                if check:
                    _check_finite(y, f"encoder block {i}")
            caches["enc"] = enc_caches
            memory = y
        else:
            memory = None

        if cfg.has_decoder:
            d = e
            ffn_ln = "ln3" if cfg.has_fusion else "ln2"
            dec_caches = []
            for i in range(cfg.decoder_blocks):
                att, w, c_self = F.multi_head_attention_forward(
                    d, d, _proj(params, f"dec{i}.self"), mask)
                d1, c_ln1 = F.residual_layer_norm_forward(
                    d, att, a[f"dec{i}.ln1.gain"], a[f"dec{i}.ln1.bias"])
                record("tgt", w)
                if cfg.has_fusion:
                    fus, wm, c_fuse = F.multi_head_attention_forward(
                        d1, memory, _proj(params, f"dec{i}.fuse"))
                    d2, c_ln2 = F.residual_layer_norm_forward(
                        d1, fus, a[f"dec{i}.ln2.gain"], a[f"dec{i}.ln2.bias"])
                    record("mem", wm)
                else:
                    d2, c_fuse, c_ln2 = d1, None, None
                ff, c_ff = F.feed_forward_forward(d2, a[f"dec{i}.ffn.w1"], a[f"dec{i}.ffn.w2"])
                d, c_ln3 = F.residual_layer_norm_forward(
                    d2, ff, a[f"dec{i}.{ffn_ln}.gain"], a[f"dec{i}.{ffn_ln}.bias"])
                dec_caches.append((c_self, c_ln1, c_fuse, c_ln2, c_ff, c_ln3))
                if check:
                    _check_finite(d, f"decoder block {i}")
            caches["dec"] = dec_caches
            state = d
        else:
            state = memory

    caches["head_state"] = state
    per_node = state @ a["head.w"]           # (B, N, horizon)
    preds = per_node.transpose(0, 2, 1)      # (B, horizon, N)
    if check:
        _check_finite(preds, "output head")
    return preds, caches, records


def backward_batch(caches, params: ParameterSet, d_preds):
    """Gradients of a scalar loss wrt every parameter and the input window.

    `d_preds` is the loss gradient at the (B, n, N) predictions. Returns
    (grads dict matching params.arrays, d_input of shape (B, m, N, C)).
    """
    cfg = params.config
    a = params.arrays
    grads: dict[str, np.ndarray] = {}
    b, m, n_nodes, c = caches["shape"]

    d_y = np.asarray(d_preds).transpose(0, 2, 1)  # (B, N, horizon)
    state = caches["head_state"]
    grads["head.w"] = np.einsum("bnd,bnh->dh", state, d_y)
    d_state = d_y @ a["head.w"].T

    if cfg.variant == Variant.FC_LSTM:
        d_e0 = d_state
    else:
        d_memory = np.zeros_like(d_state) if cfg.has_encoder else None
        d_e = np.zeros_like(d_state)

        if cfg.has_decoder:
            d_d = d_state
            ffn_ln = "ln3" if cfg.has_fusion else "ln2"
            for i in reversed(range(cfg.decoder_blocks)):
                c_self, c_ln1, c_fuse, c_ln2, c_ff, c_ln3 = caches["dec"][i]
                d_s, g_gain, g_bias = F.residual_layer_norm_backward(c_ln3, d_d)
                grads[f"dec{i}.{ffn_ln}.gain"] = g_gain
                grads[f"dec{i}.{ffn_ln}.bias"] = g_bias
                d_x_ff, g_w1, g_w2 = F.feed_forward_backward(c_ff, d_s)
                grads[f"dec{i}.ffn.w1"] = g_w1
                grads[f"dec{i}.ffn.w2"] = g_w2
                d_d2 = d_s + d_x_ff
                if cfg.has_fusion:
                    d_s2, g_gain, g_bias = F.residual_layer_norm_backward(c_ln2, d_d2)
                    grads[f"dec{i}.ln2.gain"] = g_gain
                    grads[f"dec{i}.ln2.bias"] = g_bias
                    d_q, d_kv, w_grads = F.multi_head_attention_backward(c_fuse, d_s2)
                    for k, v in w_grads.items():
                        grads[f"dec{i}.fuse.{k}"] = v
                    d_memory += d_kv
                    d_d1 = d_s2 + d_q
                else:
                    d_d1 = d_d2
                d_s1, g_gain, g_bias = F.residual_layer_norm_backward(c_ln1, d_d1)
                grads[f"dec{i}.ln1.gain"] = g_gain
                grads[f"dec{i}.ln1.bias"] = g_bias
                d_q, d_kv, w_grads = F.multi_head_attention_backward(c_self, d_s1)
                for k, v in w_grads.items():
                    grads[f"dec{i}.self.{k}"] = v
                d_d = d_s1 + d_q + d_kv
            d_e += d_d
        else:
            d_memory = d_state

        if cfg.has_encoder:
            d_yy = d_memory
            for i in reversed(range(cfg.encoder_blocks)):
                c_att, c_ln1, c_ff, c_ln2 = caches["enc"][i]
                d_s, g_gain, g_bias = F.residual_layer_norm_backward(c_ln2, d_yy)
                grads[f"enc{i}.ln2.gain"] = g_gain
                grads[f"enc{i}.ln2.bias"] = g_bias
                d_x_ff, g_w1, g_w2 = F.feed_forward_backward(c_ff, d_s)
                grads[f"enc{i}.ffn.w1"] = g_w1
                grads[f"enc{i}.ffn.w2"] = g_w2
                d_y1 = d_s + d_x_ff
                d_s1, g_gain, g_bias = F.residual_layer_norm_backward(c_ln1, d_y1)
                grads[f"enc{i}.ln1.gain"] = g_gain
                grads[f"enc{i}.ln1.bias"] = g_bias
                d_q, d_kv, w_grads = F.multi_head_attention_backward(c_att, d_s1)
                for k, v in w_grads.items():
                    grads[f"enc{i}.attn.{k}"] = v
                d_yy = d_s1 + d_q + d_kv
            d_e += d_yy

        grads["pos.p"] = d_e.sum(axis=0)
        d_e0 = d_e

    if cfg.uses_lstm:
        d_x, lstm_grads = F.temporal_embed_backward(caches["temporal"], d_e0)
        for k, v in lstm_grads.items():
            grads[f"temporal.{k}"] = v
    else:
        seq = caches["embed_seq"]
        grads["embed.w"] = np.einsum("bnm,bnd->md", seq, d_e0)
        d_seq = d_e0 @ a["embed.w"].T          # (B, N, m)
        d_x = np.zeros((b, m, n_nodes, c))
        d_x[..., 0] = d_seq.transpose(0, 2, 1)
    return grads, d_x


def forward(window, params: ParameterSet, graph: SensorGraph | None = None,
            mask=None, stats: NormalizationStats | None = None,
            average_heads=True) -> ForecastResult:
    """Single-window forward pass with attention capture.

    `window` is (m, N, C) in normalized space. If `stats` is given the
    predictions are mapped back to physical units.
    """
    cfg = params.config
    if mask is None and cfg.needs_graph:
        if graph is None:
            raise MissingGraphError(
                f"variant {cfg.variant.value!r} requires an adjacency matrix")
        mask = build_khop_mask(graph, cfg.mask_hops).allowed
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 3:
        raise ValueError(f"expected (m, N, C) window, got shape {window.shape}")
    preds, _, records = forward_batch(window[None], params, mask=mask,
                                      capture=True, average_heads=average_heads)
    predictions = preds[0]
    if stats is not None:
        predictions = zscore_invert(predictions, stats)
    record = AttentionRecord(
        src=tuple(w[0] for w in records["src"]),
        tgt=tuple(w[0] for w in records["tgt"]),
        mem=tuple(w[0] for w in records["mem"]),
    )
    return ForecastResult(predictions=predictions, attention=record)


def predict_batches(x, params: ParameterSet, mask=None, batch_size=64) -> np.ndarray:
    """Forward over (S, m, N, C) samples in batches; returns (S, n, N)."""
    outputs = []
    for start in range(0, x.shape[0], batch_size):
        preds, _, _ = forward_batch(x[start:start + batch_size], params, mask=mask)
        outputs.append(preds)
    return np.concatenate(outputs, axis=0)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    params: ParameterSet
    stats: NormalizationStats | None = None
    node_ids: tuple[str, ...] | None = None
    mask: np.ndarray | None = None


def save_checkpoint(path, params: ParameterSet, stats=None, node_ids=None,
                    mask=None) -> None:
    """Binary checkpoint: magic, JSON header, optional mask bytes, little-endian
    float64 parameter payload in canonical order."""
    header = {
        "version": 1,
        "config": params.config.to_dict(),
        "node_count": params.node_count,
        "norm": None if stats is None else {"mean": stats.mean, "std": stats.std},
        "node_ids": None if node_ids is None else list(node_ids),
        "has_mask": mask is not None,
        "params": [[name, list(arr.shape)] for name, arr in params.arrays.items()],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(str(path), "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        if mask is not None:
            fh.write(np.asarray(mask, dtype=np.uint8).tobytes())
        for arr in params.arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path, expect_config: ModelConfig | None = None) -> Checkpoint:
    with open(str(path), "rb") as fh:
        data = fh.read()
    view = memoryview(data)
    if len(view) < len(CHECKPOINT_MAGIC) + 4 or view[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    offset = len(CHECKPOINT_MAGIC)
    (header_len,) = struct.unpack_from("<I", view, offset)
    offset += 4
    if offset + header_len > len(view):
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(bytes(view[offset:offset + header_len]).decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header: {exc}") from None
    offset += header_len

    config = ModelConfig.from_dict(header["config"])
    node_count = int(header["node_count"])
    if expect_config is not None and expect_config != config:
        raise IncompatibleCheckpointError(
            f"{path}: checkpoint config {config.to_dict()} does not match "
            f"expected {expect_config.to_dict()}")

    expected = parameter_layout(config, node_count)
    declared = [(name, tuple(shape)) for name, shape in header["params"]]
    if declared != [(name, shape) for name, shape, _ in expected]:
        raise IncompatibleCheckpointError(
            f"{path}: parameter table does not match the declared config")

    mask = None
    if header["has_mask"]:
        size = node_count * node_count
        if offset + size > len(view):
            raise FormatError(f"{path}: truncated mask block")
        mask = np.frombuffer(view, dtype=np.uint8, count=size,
                             offset=offset).reshape(node_count, node_count).astype(bool)
        offset += size

    arrays = {}
    for name, shape in declared:
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(view):
            raise FormatError(f"{path}: truncated parameter payload at {name!r}")
        arrays[name] = np.frombuffer(view, dtype="<f8", count=count,
                                     offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(view):
        raise FormatError(f"{path}: {len(view) - offset} unexpected trailing bytes")

    stats = None
    if header.get("norm") is not None:
        stats = NormalizationStats(mean=header["norm"]["mean"], std=header["norm"]["std"])
    node_ids = None if header.get("node_ids") is None else tuple(header["node_ids"])
    params = ParameterSet(config=config, node_count=node_count, arrays=arrays)
    return Checkpoint(params=params, stats=stats, node_ids=node_ids, mask=mask)
