"""Temporal self-attention over the frame axis, with optional additive
motion-embedding injection into the query/key and value paths.

Features use the frame-major layout (H*W, N, C): attention runs independently
at each spatial row and mixes information across the N frames only. Embedding
operands with a spatial extent of 1 broadcast over all H*W rows inside the
attention computation, so the spatial-1D/2D ablation is a pure shape switch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import tensor


@dataclass(frozen=True)
class AttentionWeights:
    """Single-head projection matrices; no biases, no output projection."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    d_k: int = field(default=0)

    def __post_init__(self):
        c = self.w_q.shape[0]
        for name, w in (("w_q", self.w_q), ("w_k", self.w_k), ("w_v", self.w_v)):
            if w.shape != (c, c):
                raise ValueError(
                    f"AttentionWeights: {name} must be square {c}x{c}, got {w.shape}"
                )
        if self.d_k == 0:
            object.__setattr__(self, "d_k", c)
        if self.d_k <= 0:
            raise ValueError(f"AttentionWeights: d_k must be positive, got {self.d_k}")

    @property
    def channels(self) -> int:
        return self.w_q.shape[0]


def to_frame_major(x: np.ndarray) -> np.ndarray:
    """(1, C, N, H, W) -> (H*W, N, C); out[h*W+w, n, c] = x[0, c, n, h, w]."""
    x = np.asarray(x)
    if x.ndim != 5 or x.shape[0] != 1:
        raise ValueError(f"to_frame_major: expected shape (1,C,N,H,W), got {x.shape}")
    _, c, n, h, w = x.shape
    return np.ascontiguousarray(np.transpose(x[0], (2, 3, 1, 0)).reshape(h * w, n, c))


def from_frame_major(f: np.ndarray, height: int, width: int) -> np.ndarray:
    """Inverse of `to_frame_major`; restores (1, C, N, H, W) exactly."""
    f = np.asarray(f)
    if f.ndim != 3 or f.shape[0] != height * width:
        raise ValueError(
            f"from_frame_major: expected ({height * width}, N, C), got {f.shape}"
        )
    n, c = f.shape[1], f.shape[2]
    x = np.transpose(f.reshape(height, width, n, c), (3, 2, 0, 1))
    return np.ascontiguousarray(x.reshape(1, c, n, height, width))


def _check_embedding(name: str, m: np.ndarray, rows: int, n: int, c: int) -> None:
    if m.ndim != 3 or m.shape[1:] != (n, c) or m.shape[0] not in (1, rows):
        raise ValueError(
            f"{name}: expected shape (1,{n},{c}) or ({rows},{n},{c}), got {m.shape}"
        )


def attention_nodes(f, w_q, w_k, w_v, d_k, m_qk=None, m_v=None):
    """Graph-level attention; every argument is an autodiff Node (or None)."""
    fq = f if m_qk is None else ad.add(f, m_qk)
    fv = f if m_v is None else ad.add(f, m_v)
    q = ad.matmul(fq, ad.permute(w_q, (1, 0)))
    k = ad.matmul(fq, ad.permute(w_k, (1, 0)))
    v = ad.matmul(fv, ad.permute(w_v, (1, 0)))
    scores = ad.scale(ad.matmul(q, ad.permute(k, (0, 2, 1))), 1.0 / np.sqrt(d_k))
    return ad.matmul(ad.softmax(scores, axis=-1), v)


def temporal_attention(f: np.ndarray, weights: AttentionWeights) -> np.ndarray:
    """softmax(Q K^T / sqrt(d_k)) V over the frame axis, per spatial row."""
    f = np.asarray(f)
    if f.ndim != 3:
        raise ValueError(f"temporal_attention: expected (HW,N,C), got {f.shape}")
    if f.shape[2] != weights.channels:
        raise ValueError(
            f"temporal_attention: feature channels {f.shape[2]} do not match "
            f"weight extent {weights.channels}"
        )
    out = attention_nodes(
        ad.constant(f),
        ad.constant(weights.w_q),
        ad.constant(weights.w_k),
        ad.constant(weights.w_v),
        weights.d_k,
    )
    return out.value


def temporal_attention_injected(
    f: np.ndarray,
    weights: AttentionWeights,
    m_qk: np.ndarray,
    m_v: np.ndarray,
) -> np.ndarray:
    """Attention with Q,K from (F + m_qk) and V from (F + m_v).

    Embeddings are (1,N,C) or (HW,N,C); the extent-1 spatial axis broadcasts
    over rows. A frame-count mismatch signals a checkpoint built for another
    video length and is rejected.
    """
    f = np.asarray(f)
    if f.ndim != 3:
        raise ValueError(f"temporal_attention_injected: expected (HW,N,C), got {f.shape}")
    rows, n, c = f.shape
    if c != weights.channels:
        raise ValueError(
            f"temporal_attention_injected: feature channels {c} do not match "
            f"weight extent {weights.channels}"
        )
    m_qk = np.asarray(m_qk)
    m_v = np.asarray(m_v)
    for name, m in (("m_qk", m_qk), ("m_v", m_v)):
        if m.ndim == 3 and m.shape[1] != n:
            raise ValueError(
                f"{name}: embedding frame count {m.shape[1]} does not match "
                f"feature frame count {n} (mismatched checkpoint?)"
            )
        _check_embedding(name, m, rows, n, c)
    out = attention_nodes(
        ad.constant(f),
        ad.constant(weights.w_q),
        ad.constant(weights.w_k),
        ad.constant(weights.w_v),
        weights.d_k,
        m_qk=ad.constant(m_qk),
        m_v=ad.constant(m_v),
    )
    return out.value


def init_weights(channels: int, rng: np.random.Generator) -> AttentionWeights:
    """Fan-in-scaled normal init for the three projections."""
    scale = 1.0 / np.sqrt(channels)
    draw = lambda: tensor.as_real(rng.standard_normal((channels, channels)) * scale)
    return AttentionWeights(w_q=draw(), w_k=draw(), w_v=draw())
