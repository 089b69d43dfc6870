"""Noise schedule, forward noising, denoising objective, and a deterministic
sampler that consumes motion embeddings.

The training objective is the mean-squared error between the drawn noise and
the network's prediction on the noised video; during inversion it is
differentiable with respect to the motion embeddings only (weights frozen).
Sampling is a deterministic (eta=0) denoising iteration over a uniform-stride
subset of the schedule; the initial noise comes from the seeded counter-based
generator, so a (seed, inputs) pair pins the output bitwise.

Videos enter in [0,1] pixel space and are mapped to [-1,1] around the
objective; `sample` maps back and clips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import denoiser as dn
from . import embeddings as emb
from . import tensor
from .attention import from_frame_major, to_frame_major


@dataclass(frozen=True)
class NoiseSchedule:
    """betas[i] is beta_{i+1}; alpha_bars[t] is the cumulative product, with
    alpha_bars[0] = 1 by convention."""

    betas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        b = self.betas
        if b.ndim != 1 or len(b) < 2:
            raise ValueError("schedule needs at least 2 steps")
        if not (0.0 < b[0] <= b[-1] < 1.0) or np.any(np.diff(b) < 0):
            raise ValueError("betas must be nondecreasing within (0, 1)")
        ab = self.alpha_bars
        if ab[0] != 1.0 or np.any(np.diff(ab) >= 0):
            raise ValueError("alpha_bars must start at 1 and strictly decrease")

    @property
    def steps(self) -> int:
        return len(self.betas)


def linear_schedule(steps: int = 200, beta_start: float = 1e-4, beta_end: float = 2e-2) -> NoiseSchedule:
    betas = tensor.as_real(np.linspace(beta_start, beta_end, steps))
    alpha_bars = tensor.as_real(np.concatenate([[1.0], np.cumprod(1.0 - betas)]))
    return NoiseSchedule(betas=betas, alpha_bars=alpha_bars)


def _check_t(schedule: NoiseSchedule, t: int) -> None:
    if not 1 <= t <= schedule.steps:
        raise ValueError(f"timestep {t} outside [1, {schedule.steps}]")


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    _check_t(schedule, t)
    x0 = np.asarray(x0)
    eps = np.asarray(eps)
    if x0.shape != eps.shape:
        raise ValueError(f"q_sample: x0 shape {x0.shape} != eps shape {eps.shape}")
    ab = schedule.alpha_bars[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def to_signal(video: np.ndarray) -> np.ndarray:
    """[0,1] pixel space -> [-1,1] model space."""
    return tensor.as_real(video) * 2.0 - 1.0


def to_pixels(signal: np.ndarray) -> np.ndarray:
    return np.clip((np.asarray(signal) + 1.0) / 2.0, 0.0, 1.0)


def loss_graph(
    params: dn.DenoiserParams,
    x0_signal: np.ndarray,
    t: int,
    eps: np.ndarray,
    cond: int,
    schedule: NoiseSchedule,
    param_nodes: dict[str, ad.Node] | None = None,
    m_nodes=None,
) -> ad.Node:
    """Scalar MSE node; caller controls which leaves are trainable."""
    _check_t(schedule, t)
    x_t = q_sample(x0_signal, t, eps, schedule)
    spec = params.spec
    f = ad.constant(to_frame_major(tensor.as_real(x_t)))
    nodes = param_nodes if param_nodes is not None else dn.param_nodes(params)
    pred = dn.forward_graph(nodes, spec, f, t, cond, m_nodes=m_nodes)
    target = ad.constant(to_frame_major(tensor.as_real(eps)))
    diff = ad.sub(pred, target)
    return ad.mean(ad.mul(diff, diff))


def training_loss(
    params: dn.DenoiserParams,
    m: emb.MotionEmbeddingSet,
    x0: np.ndarray,
    t: int,
    eps: np.ndarray,
    cond: int,
    schedule: NoiseSchedule,
    m_nodes=None,
) -> ad.Node:
    """Denoising objective, differentiable w.r.t. the motion embeddings only.

    `x0` is in [0,1] pixel space. Pass prebuilt `m_nodes` (list of (qk, v)
    parameter-Node pairs) to keep handles for gradient reads; otherwise fresh
    parameter nodes are created from `m`.
    """
    if not params.frozen:
        raise ValueError("training_loss requires frozen denoiser params")
    dn._validate_embeddings(params.spec, m, params.spec.frames)
    if m_nodes is None:
        m_nodes = [(ad.parameter(qk), ad.parameter(v)) for qk, v in zip(m.m_qk, m.m_v)]
    return loss_graph(
        params, to_signal(x0), t, eps, cond, schedule, m_nodes=m_nodes
    )


def sampling_timesteps(schedule: NoiseSchedule, steps: int) -> list[int]:
    """Uniform-stride descending subset of [1, T], starting at T."""
    if not 1 <= steps <= schedule.steps:
        raise ValueError(f"sample steps {steps} outside [1, {schedule.steps}]")
    stride = schedule.steps // steps
    ts = [schedule.steps - i * stride for i in range(steps)]
    return [t for t in ts if t >= 1]


def sample(
    params: dn.DenoiserParams,
    m: emb.MotionEmbeddingSet | None,
    cond: int,
    seed: int,
    steps: int,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Deterministic denoising from seeded noise; returns a [0,1] video.

    Embeddings pass through `apply_inference_strategy` once on entry; the
    debiased set is what every denoising step consumes.
    """
    spec = params.spec
    if m is not None:
        dn._validate_embeddings(spec, m, spec.frames)
        m = emb.apply_inference_strategy(m)
    shape = (1, spec.img_channels, spec.frames, spec.height, spec.width)
    x = tensor.as_real(tensor.make_rng(seed).standard_normal(shape))
    ts = sampling_timesteps(schedule, steps)
    for i, t in enumerate(ts):
        eps_hat = dn.forward(params, x, t, cond, m=m)
        ab_t = schedule.alpha_bars[t]
        x0_pred = (x - np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(ab_t)
        t_next = ts[i + 1] if i + 1 < len(ts) else 0
        ab_next = schedule.alpha_bars[t_next]
        x = np.sqrt(ab_next) * x0_pred + np.sqrt(1.0 - ab_next) * eps_hat
    return to_pixels(x)
