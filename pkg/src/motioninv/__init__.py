"""Motion-embedding inversion for a desk-scale video diffusion model.

Learn explicit per-frame motion embeddings from a reference video by gradient
descent through a frozen toy denoiser, debias them at inference by frame
differencing, and score motion transfer with tracklet-based metrics.
"""

from .attention import (
    AttentionWeights,
    from_frame_major,
    temporal_attention,
    temporal_attention_injected,
    to_frame_major,
)
from .denoiser import DenoiserParams, DenoiserSpec, forward, init_params, load_params, save_params
from .diffusion import NoiseSchedule, linear_schedule, q_sample, sample, training_loss
from .embeddings import (
    EmbeddingShapeConfig,
    MotionEmbeddingSet,
    apply_inference_strategy,
    debias_differential,
    debias_normalize,
    init_zero,
)
from .errors import ConfigError, FormatError, NumericError
from .inversion import InversionConfig, invert, pretrain
from .metrics import (
    Tracklet,
    frechet_distance,
    motion_fidelity,
    temporal_consistency,
    track,
)
from .synthdata import CameraSpec, GroundTruth, MotionScript, ObjectSpec, render

__version__ = "0.1.0"

__all__ = [
    "AttentionWeights",
    "CameraSpec",
    "ConfigError",
    "DenoiserParams",
    "DenoiserSpec",
    "EmbeddingShapeConfig",
    "FormatError",
    "GroundTruth",
    "InversionConfig",
    "MotionEmbeddingSet",
    "MotionScript",
    "NoiseSchedule",
    "NumericError",
    "ObjectSpec",
    "Tracklet",
    "apply_inference_strategy",
    "debias_differential",
    "debias_normalize",
    "forward",
    "frechet_distance",
    "from_frame_major",
    "init_params",
    "init_zero",
    "invert",
    "linear_schedule",
    "load_params",
    "motion_fidelity",
    "pretrain",
    "q_sample",
    "render",
    "sample",
    "save_params",
    "temporal_attention",
    "temporal_attention_injected",
    "temporal_consistency",
    "to_frame_major",
    "track",
    "training_loss",
]
