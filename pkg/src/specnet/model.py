"""Dual-stream graph encoder over frequency-filtered node features.

Each stream is a stack of sum-aggregation message-passing layers (the
aggregate is H + A @ H, i.e. self plus neighbor sum) whose per-layer
transform is a two-layer MLP with a relu hidden activation and dropout on
the hidden units during training. Node states are mean-pooled, projected
to the embedding dimension and L2-normalized, so every graph maps to a
unit vector per stream. A linear head classifies the weighted
concatenation of the two stream embeddings.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .datasets import derive_seed
from .errors import ContractViolation, DataError
from .graphs import Graph
from .spectral import BandFeatures, graph_band_features

__all__ = [
    "ModelConfig",
    "DualEmbedding",
    "init_params",
    "wrap_params",
    "encode_stream",
    "dual_encode",
    "dual_encode_features",
    "classify",
    "config_hash",
    "save_params",
    "load_params",
    "param_names",
]

LAMBDA_DEFAULT = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ModelConfig:
    feature_dim: int
    hidden_dim: int = 64
    embed_dim: int = 64
    layers: int = 3
    classes: int = 2
    dropout: float = 0.3
    lambda_low: float = LAMBDA_DEFAULT
    lambda_high: float = LAMBDA_DEFAULT
    share_streams: bool = False

    def __post_init__(self):
        if min(self.feature_dim, self.hidden_dim, self.embed_dim) < 1:
            raise ContractViolation("model dimensions must be positive")
        if self.layers < 1:
            raise ContractViolation("need at least one layer")
        if not (0.0 <= self.dropout < 1.0):
            raise ContractViolation("dropout must lie in [0, 1)")


@dataclass(frozen=True)
class DualEmbedding:
    """Unit-norm per-stream embeddings of one graph."""

    low: ad.Tensor
    high: ad.Tensor


def _streams(cfg: ModelConfig) -> tuple[str, ...]:
    return ("both",) if cfg.share_streams else ("low", "high")


def _stream_key(cfg: ModelConfig, band: str) -> str:
    return "both" if cfg.share_streams else band


def param_names(cfg: ModelConfig) -> tuple[str, ...]:
    """Parameter names in declaration order; checkpoint layout follows it."""
    names = []
    for stream in _streams(cfg):
        for i in range(cfg.layers):
            names += [f"{stream}.gin{i}.w1", f"{stream}.gin{i}.b1",
                      f"{stream}.gin{i}.w2", f"{stream}.gin{i}.b2"]
        names += [f"{stream}.proj.w", f"{stream}.proj.b"]
    names += ["clf.w", "clf.b"]
    return tuple(names)


def _shape_of(cfg: ModelConfig, name: str) -> tuple:
    part = name.split(".")
    if part[-1] == "b1" or part[-1] == "b2":
        return (cfg.hidden_dim,)
    if part[1] == "proj":
        return (cfg.hidden_dim, cfg.embed_dim) if part[2] == "w" else (cfg.embed_dim,)
    if part[0] == "clf":
        return (2 * cfg.embed_dim, cfg.classes) if part[1] == "w" else (cfg.classes,)
    layer = int(part[1][3:])
    if part[-1] == "w1":
        fan_in = cfg.feature_dim if layer == 0 else cfg.hidden_dim
        return (fan_in, cfg.hidden_dim)
    return (cfg.hidden_dim, cfg.hidden_dim)


def init_params(cfg: ModelConfig, seed: int) -> dict:
    """Fresh parameters: Glorot-uniform weights, uniform(-0.1, 0.1) biases.

    Biases are deliberately not zero: with them, a graph whose filtered
    features vanish (a constant signal has no high band) would produce a
    zero vector that cannot be normalized. Every parameter draws from its
    own derived seed, so the values do not depend on iteration order.
    """
    params = {}
    for name in param_names(cfg):
        shape = _shape_of(cfg, name)
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "init", name)))
        if len(shape) == 2:
            bound = math.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            params[name] = rng.uniform(-0.1, 0.1, size=shape)
    return params


def wrap_params(params: dict, tape=None) -> dict:
    """Lift raw parameter arrays into tensors, as tape leaves when a tape
    is given (training) or constants otherwise (evaluation)."""
    if tape is None:
        return {k: ad.Tensor(v) for k, v in params.items()}
    return {k: tape.leaf(v) for k, v in params.items()}


def encode_stream(
    wrapped: dict,
    cfg: ModelConfig,
    band: str,
    A: np.ndarray,
    X: np.ndarray,
    dropout_masks=None,
) -> ad.Tensor:
    """Embed one graph's band-filtered features into a unit vector.

    A is the dense adjacency, X the (nodes, feature_dim) filtered signal.
    dropout_masks, when given, is one 0/1 array of shape (nodes, hidden)
    per layer; omitted means evaluation mode (no dropout).
    """
    key = _stream_key(cfg, band)
    if X.shape != (A.shape[0], cfg.feature_dim):
        raise ContractViolation(f"bad feature shape {X.shape} for stream input")
    At = ad.Tensor(A)
    H = ad.Tensor(X)
    for i in range(cfg.layers):
        agg = ad.add(H, ad.matmul(At, H))
        h = ad.relu(ad.add(ad.matmul(agg, wrapped[f"{key}.gin{i}.w1"]),
                           wrapped[f"{key}.gin{i}.b1"]))
        if dropout_masks is not None and cfg.dropout > 0.0:
            h = ad.dropout(h, dropout_masks[i], cfg.dropout)
        H = ad.add(ad.matmul(h, wrapped[f"{key}.gin{i}.w2"]),
                   wrapped[f"{key}.gin{i}.b2"])
    pooled = ad.row_mean(H)
    z = ad.add(ad.matmul(pooled, wrapped[f"{key}.proj.w"]), wrapped[f"{key}.proj.b"])
    return ad.l2_normalize(z)


def dual_encode_features(
    wrapped: dict,
    cfg: ModelConfig,
    feats: BandFeatures,
    dropout_masks=None,
) -> DualEmbedding:
    """Embed one graph on both frequency streams from precomputed band
    features (the cacheable path used by the training loop).

    dropout_masks, when given, holds one mask list per stream under the
    keys 'low' and 'high'.
    """
    low_masks = dropout_masks["low"] if dropout_masks is not None else None
    high_masks = dropout_masks["high"] if dropout_masks is not None else None
    return DualEmbedding(
        low=encode_stream(wrapped, cfg, "low", feats.adjacency, feats.low, low_masks),
        high=encode_stream(wrapped, cfg, "high", feats.adjacency, feats.high, high_masks),
    )


def dual_encode(
    wrapped: dict,
    cfg: ModelConfig,
    g: Graph,
    rho: float,
    dropout_masks=None,
) -> DualEmbedding:
    """Embed one graph on both frequency streams: spectral band split of
    its one-hot features, then one encoder pass per band."""
    feats = graph_band_features(g, rho, cfg.feature_dim)
    return dual_encode_features(wrapped, cfg, feats, dropout_masks)


def classify(wrapped: dict, cfg: ModelConfig, emb: DualEmbedding) -> ad.Tensor:
    """Class logits from the weighted concatenation of stream embeddings."""
    joint = ad.concat([
        ad.scale(emb.low, cfg.lambda_low),
        ad.scale(emb.high, cfg.lambda_high),
    ])
    return ad.add(ad.matmul(joint, wrapped["clf.w"]), wrapped["clf.b"])


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_MAGIC = b"SPECNET\x01"
_CKPT_VERSION = 1


def config_hash(cfg: ModelConfig) -> bytes:
    payload = ";".join(f"{f.name}={getattr(cfg, f.name)!r}" for f in fields(cfg))
    return hashlib.sha256(payload.encode()).digest()


def save_params(path: str, cfg: ModelConfig, params: dict) -> None:
    """Binary checkpoint: magic, version, config hash, then every parameter
    as raw little-endian float64 in declaration order. Round-trips exactly."""
    names = param_names(cfg)
    if set(names) != set(params):
        raise ContractViolation("parameter dict does not match the config")
    blob = [  # header
        _MAGIC,
        struct.pack("<I", _CKPT_VERSION),
        config_hash(cfg),
        struct.pack("<I", len(names)),
    ]
    for name in names:
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        if arr.shape != _shape_of(cfg, name):
            raise ContractViolation(f"bad shape for parameter {name}")
        blob.append(arr.tobytes())
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))


def load_params(path: str, cfg: ModelConfig) -> dict:
    """Read a checkpoint written by save_params for the same config."""
    if not os.path.exists(path):
        raise DataError(f"missing checkpoint: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    version = struct.unpack("<I", raw[8:12])[0]
    if version != _CKPT_VERSION:
        raise DataError(f"{path}: checkpoint version {version} unsupported")
    if raw[12:44] != config_hash(cfg):
        raise DataError(f"{path}: checkpoint was written for a different config")
    names = param_names(cfg)
    count = struct.unpack("<I", raw[44:48])[0]
    if count != len(names):
        raise DataError(f"{path}: parameter count mismatch")
    params = {}
    offset = 48
    for name in names:
        shape = _shape_of(cfg, name)
        size = int(np.prod(shape)) * 8
        chunk = raw[offset:offset + size]
        if len(chunk) != size:
            raise DataError(f"{path}: truncated checkpoint")
        params[name] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += size
    if offset != len(raw):
        raise DataError(f"{path}: trailing bytes in checkpoint")
    return params
