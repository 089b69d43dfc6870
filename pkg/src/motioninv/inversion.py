"""Training loops: motion-embedding inversion against a frozen denoiser, and
the pretraining stage that gives the toy denoiser something to say.

Inversion starts from the all-zero set and updates only the embedding leaves
by adaptive-moment descent with global-norm clipping; the (t, eps) stream
comes from a dedicated seeded generator so a fixed embedding set can be
re-scored on exactly the same draws for paired comparisons. Denoiser weights
are never touched (checksum-verified by callers and tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import denoiser as dn
from . import diffusion
from . import embeddings as emb
from . import tensor
from .errors import NumericError


@dataclass(frozen=True)
class InversionConfig:
    steps: int = 400
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    clip_norm: float = 1.0
    seed: int = 0
    shape_config: emb.EmbeddingShapeConfig = field(default_factory=emb.EmbeddingShapeConfig)
    log_every: int = 25

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


class _Adam:
    """Adaptive moments over a list of arrays; updates return new arrays."""

    def __init__(self, shapes, lr: float, beta1: float, beta2: float, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def update(self, values, grads):
        self.step += 1
        b1, b2 = self.beta1, self.beta2
        out = []
        for i, (val, g) in enumerate(zip(values, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.step)
            v_hat = self.v[i] / (1 - b2 ** self.step)
            out.append(val - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def _clip_global_norm(grads, max_norm: float):
    if max_norm <= 0:
        return grads
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total <= max_norm:
        return grads
    scale = max_norm / total
    return [g * scale for g in grads]


def _draw_step(rng: np.random.Generator, schedule: diffusion.NoiseSchedule, shape):
    t = int(rng.integers(1, schedule.steps + 1))
    eps = tensor.as_real(rng.standard_normal(shape))
    return t, eps


def _embedding_arrays(m: emb.MotionEmbeddingSet) -> list[np.ndarray]:
    out = []
    for qk, v in zip(m.m_qk, m.m_v):
        out += [qk, v]
    return out


def _set_from_arrays(m: emb.MotionEmbeddingSet, arrays) -> emb.MotionEmbeddingSet:
    qk = tuple(tensor.as_real(a) for a in arrays[0::2])
    v = tuple(tensor.as_real(a) for a in arrays[1::2])
    return replace(m, m_qk=qk, m_v=v)


def invert(
    x0: np.ndarray,
    params: dn.DenoiserParams,
    cond: int,
    cfg: InversionConfig,
    schedule: diffusion.NoiseSchedule,
) -> tuple[emb.MotionEmbeddingSet, list[float]]:
    """Fit motion embeddings to one reference video; weights stay frozen.

    Returns the final set and the per-step loss trace. A non-finite loss
    aborts with the offending step index.
    """
    if not params.frozen:
        raise ValueError("invert requires frozen denoiser params")
    spec = params.spec
    x0 = np.asarray(x0)
    want = (1, spec.img_channels, spec.frames, spec.height, spec.width)
    if x0.shape != want:
        raise ValueError(f"invert: video shape {x0.shape} != spec shape {want}")
    m = emb.init_zero(spec, cfg.shape_config, spec.frames)
    arrays = _embedding_arrays(m)
    opt = _Adam([a.shape for a in arrays], cfg.lr, cfg.beta1, cfg.beta2)
    rng = tensor.make_rng(cfg.seed)
    losses: list[float] = []
    for step in range(cfg.steps):
        t, eps = _draw_step(rng, schedule, x0.shape)
        leaves = [ad.parameter(a) for a in arrays]
        m_nodes = list(zip(leaves[0::2], leaves[1::2]))
        loss = diffusion.training_loss(
            params, _set_from_arrays(m, arrays), x0, t, eps, cond, schedule,
            m_nodes=m_nodes,
        )
        value = float(loss.value)
        if not np.isfinite(value):
            raise NumericError(f"invert: non-finite loss at step {step}")
        losses.append(value)
        grads = _clip_global_norm(ad.grad(loss, leaves), cfg.clip_norm)
        arrays = opt.update(arrays, grads)
    return _set_from_arrays(m, arrays), losses


def loss_stream(
    x0: np.ndarray,
    params: dn.DenoiserParams,
    cond: int,
    m: emb.MotionEmbeddingSet,
    cfg: InversionConfig,
    schedule: diffusion.NoiseSchedule,
) -> list[float]:
    """Score a fixed set on the exact (t, eps) draws `invert` would see."""
    if not params.frozen:
        raise ValueError("loss_stream requires frozen denoiser params")
    rng = tensor.make_rng(cfg.seed)
    x0 = np.asarray(x0)
    out = []
    for _ in range(cfg.steps):
        t, eps = _draw_step(rng, schedule, x0.shape)
        loss = diffusion.training_loss(params, m, x0, t, eps, cond, schedule)
        out.append(float(loss.value))
    return out


def pretrain(
    dataset: list[tuple[np.ndarray, int]],
    spec: dn.DenoiserSpec,
    cfg: InversionConfig,
    schedule: diffusion.NoiseSchedule,
) -> tuple[dn.DenoiserParams, list[float]]:
    """Train all denoiser weights on the denoising objective over a corpus
    of (video, cond) pairs; returns frozen params and the loss trace."""
    if not dataset:
        raise ValueError("pretrain: dataset must be nonempty")
    params = dn.init_params(spec, cfg.seed)
    names = sorted(params.tensors)
    arrays = [params.tensors[n] for n in names]
    opt = _Adam([a.shape for a in arrays], cfg.lr, cfg.beta1, cfg.beta2)
    rng = tensor.make_rng(cfg.seed)
    shape = (1, spec.img_channels, spec.frames, spec.height, spec.width)
    signals = []
    for video, cond in dataset:
        video = np.asarray(video)
        if video.shape != shape:
            raise ValueError(f"pretrain: video shape {video.shape} != spec shape {shape}")
        signals.append((diffusion.to_signal(video), int(cond)))
    losses: list[float] = []
    for step in range(cfg.steps):
        idx = int(rng.integers(len(signals)))
        x0_signal, cond = signals[idx]
        t, eps = _draw_step(rng, schedule, shape)
        leaves = {n: ad.parameter(a) for n, a in zip(names, arrays)}
        current = dn.DenoiserParams(spec=spec, tensors=dict(zip(names, arrays)))
        loss = diffusion.loss_graph(
            current, x0_signal, t, eps, cond, schedule, param_nodes=leaves
        )
        value = float(loss.value)
        if not np.isfinite(value):
            raise NumericError(f"pretrain: non-finite loss at step {step}")
        losses.append(value)
        grads = _clip_global_norm(ad.grad(loss, [leaves[n] for n in names]), cfg.clip_norm)
        arrays = opt.update(arrays, grads)
    final = dn.DenoiserParams(
        spec=spec,
        tensors={n: tensor.as_real(a) for n, a in zip(names, arrays)},
        frozen=True,
    )
    return final, losses
