"""The trainable network.

A verb embedding queries multi-head cross-attention over the per-segment
video features; the attended context vector goes through a small MLP that
scores every adverb.  There is no positional encoding: the evidence for how
an action was performed is treated as order-free across segments.

Checkpoints use a small binary container: magic "AVC1", a length-prefixed
config JSON blob, then named float32 parameter arrays, all little-endian.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from manner import nd
from manner.errors import ContractError, CorpusError, DegenerateInputError, DimensionError
from manner.nd import Rng
from manner.nd.tensor import Tensor, add, matmul

CKPT_MAGIC = b"AVC1"


@dataclass(frozen=True)
class ModelConfig:
    d_seg: int = 1024
    d_text: int = 512
    e: int = 512
    heads: int = 4
    mlp_hidden: int = 512
    mlp_hidden_layers: int = 1
    dropout: float = 0.1
    a: int = 10

    def __post_init__(self):
        if self.e % self.heads:
            raise ContractError(f"e={self.e} not divisible by heads={self.heads}")
        if min(self.d_seg, self.d_text, self.e, self.mlp_hidden, self.a,
               self.heads, self.mlp_hidden_layers) < 1:
            raise ContractError("all model dims must be >= 1")

    @property
    def head_dim(self) -> int:
        return self.e // self.heads


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, np.ndarray]


def _mlp_shapes(config: ModelConfig) -> list[tuple[str, int, int]]:
    shapes = []
    width_in = config.e
    for i in range(config.mlp_hidden_layers):
        shapes.append((f"mlp{i}", width_in, config.mlp_hidden))
        width_in = config.mlp_hidden
    shapes.append(("out", width_in, config.a))
    return shapes


def init_model(config: ModelConfig, rng: Rng) -> Model:
    """Uniform(-s, s) weights with s = sqrt(6 / (fan_in + fan_out));
    all biases zero."""
    gen = rng.stream("init")
    params: dict[str, np.ndarray] = {}

    def linear(name: str, fan_in: int, fan_out: int) -> None:
        s = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"{name}_w"] = gen.uniform(-s, s, size=(fan_in, fan_out)).astype(np.float32)
        params[f"{name}_b"] = np.zeros(fan_out, dtype=np.float32)

    linear("wq", config.d_text, config.e)
    linear("wk", config.d_seg, config.e)
    linear("wv", config.d_seg, config.e)
    linear("wo", config.e, config.e)
    for name, fan_in, fan_out in _mlp_shapes(config):
        linear(name, fan_in, fan_out)
    return Model(config=config, params=params)


def _as_leaves(params: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {k: nd.leaf(v, requires_grad=True) for k, v in params.items()}


def forward_graph(
    config: ModelConfig,
    leaves: dict[str, Tensor],
    segments: np.ndarray,
    mask: np.ndarray,
    queries: np.ndarray,
    train_mode: bool,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor, np.ndarray]:
    """Batched forward pass building the autodiff graph.

    segments: (B, T, d_seg); mask: (B, T) bool; queries: (B, d_text).
    Returns (context (B, e), predictions (B, a), attention (B, heads, T)).
    """
    segments = np.asarray(segments)
    mask = np.asarray(mask, dtype=bool)
    queries = np.asarray(queries)
    if segments.ndim != 3 or segments.shape[2] != config.d_seg:
        raise DimensionError(f"segments must be (B, T, {config.d_seg})")
    bsz, t, _ = segments.shape
    if mask.shape != (bsz, t):
        raise DimensionError("mask shape must match (B, T)")
    if queries.shape != (bsz, config.d_text):
        raise DimensionError(f"queries must be (B, {config.d_text})")
    if not mask.any(axis=1).all():
        raise DegenerateInputError("a video has no unmasked segments")
    if train_mode and config.dropout > 0 and dropout_rng is None:
        raise ContractError("train-mode forward needs a dropout rng")
    dtype = leaves["wq_w"].dtype
    h, dh = config.heads, config.head_dim

    seg_in = nd.constant(segments.astype(dtype).reshape(bsz * t, config.d_seg))
    q = add(matmul(nd.constant(queries.astype(dtype)), leaves["wq_w"]), leaves["wq_b"])
    k = add(matmul(seg_in, leaves["wk_w"]), leaves["wk_b"])
    v = add(matmul(seg_in, leaves["wv_w"]), leaves["wv_b"])

    # (B, heads, 1, dh) x (B, heads, dh, T) -> attention logits (B, heads, T)
    q4 = q.reshape((bsz, h, 1, dh))
    k4 = k.reshape((bsz, t, h, dh)).swapaxes(1, 2)
    v4 = v.reshape((bsz, t, h, dh)).swapaxes(1, 2)
    logits = matmul(q4, k4.swapaxes(2, 3)).reshape((bsz, h, t)) * (1.0 / np.sqrt(dh))
    attn = nd.softmax_masked(logits, mask[:, None, :])
    context_heads = matmul(attn.reshape((bsz, h, 1, t)), v4)
    context = add(matmul(context_heads.reshape((bsz, config.e)), leaves["wo_w"]),
                  leaves["wo_b"])

    x = context
    for i in range(config.mlp_hidden_layers):
        x = add(matmul(x, leaves[f"mlp{i}_w"]), leaves[f"mlp{i}_b"]).relu()
        x = nd.dropout(x, config.dropout, dropout_rng, train_mode)
    preds = add(matmul(x, leaves["out_w"]), leaves["out_b"])
    return context, preds, attn.data.copy()


def forward(
    model: Model,
    segments: np.ndarray,
    mask: np.ndarray,
    query: np.ndarray,
    train_mode: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-video inference: (context (e,), prediction (a,), attention
    (heads, t))."""
    segments = np.asarray(segments)
    if segments.ndim != 2:
        raise DimensionError("forward expects segments (t, d_seg)")
    t = segments.shape[0]
    mask = np.asarray(mask, dtype=bool).reshape(1, t)
    leaves = _as_leaves(model.params)
    context, preds, attn = forward_graph(
        model.config, leaves, segments[None], mask,
        np.asarray(query)[None], train_mode, dropout_rng,
    )
    return context.data[0], preds.data[0], attn[0]


def predict_all_verbs(
    model: Model,
    segments: np.ndarray,
    mask: np.ndarray,
    verb_embeddings: np.ndarray,
) -> np.ndarray:
    """(V, A) score matrix: one eval-mode forward per verb query."""
    rows = []
    for query in np.asarray(verb_embeddings):
        _, preds, _ = forward(model, segments, mask, query, train_mode=False)
        rows.append(preds)
    return np.stack(rows)


def count_params(config: ModelConfig) -> dict[str, int]:
    """Exact parameter counts (weights plus biases) per block."""
    attention = (
        config.d_text * config.e + config.e
        + 2 * (config.d_seg * config.e + config.e)
        + config.e * config.e + config.e
    )
    mlp = sum(fan_in * fan_out + fan_out for _, fan_in, fan_out in _mlp_shapes(config))
    return {"attention": attention, "mlp": mlp, "total": attention + mlp}


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(model: Model, path: str | Path) -> None:
    blob = json.dumps(asdict(model.config)).encode()
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(struct.pack("<I", len(model.params)))
        for name, arr in model.params.items():
            raw = name.encode()
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f4").tobytes(order="C"))


def load_checkpoint(path: str | Path) -> Model:
    data = Path(path).read_bytes()
    if data[:4] != CKPT_MAGIC:
        raise CorpusError(f"{path}: bad checkpoint magic")
    pos = 4
    (blob_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    config = ModelConfig(**json.loads(data[pos:pos + blob_len]))
    pos += blob_len
    (n_params,) = struct.unpack_from("<I", data, pos)
    pos += 4
    params = {}
    for _ in range(n_params):
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + name_len].decode()
        pos += name_len
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(data, dtype="<f4", count=size, offset=pos).reshape(shape).copy()
        pos += 4 * size
    return Model(config=config, params=params)
