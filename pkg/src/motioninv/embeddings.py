"""Learnable motion embeddings: per temporal module, one query/key embedding
modulating the attention map and one value embedding carrying per-frame
content, plus the inference-time debiasing transforms and the MEMB checkpoint
format.

The query/key family defaults to spatial-1D (one row shared by all spatial
positions) and the value family to spatial-2D (one row per spatial position);
both choices are ablation switches. Inference strategies rewrite the value
embeddings only:

  differential  frame 1 kept, frame j>1 becomes m[j] - m[j-1]
  normalize     subtract the per-(row, channel) mean over frames
  vanilla       identity
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import formats
from . import tensor
from .errors import FormatError

SPATIAL_KINDS = ("one_d", "two_d")
STRATEGIES = ("differential", "normalize", "vanilla")

MAGIC = b"MEMB0001"


class ModuleShape(NamedTuple):
    channels: int
    height: int
    width: int


@dataclass(frozen=True)
class EmbeddingShapeConfig:
    """Ablation switches; the default triple is the proposed design."""

    qk_spatial: str = "one_d"
    v_spatial: str = "two_d"
    inference_strategy: str = "differential"

    def __post_init__(self):
        if self.qk_spatial not in SPATIAL_KINDS:
            raise ValueError(f"qk_spatial must be one of {SPATIAL_KINDS}, got {self.qk_spatial!r}")
        if self.v_spatial not in SPATIAL_KINDS:
            raise ValueError(f"v_spatial must be one of {SPATIAL_KINDS}, got {self.v_spatial!r}")
        if self.inference_strategy not in STRATEGIES:
            raise ValueError(
                f"inference_strategy must be one of {STRATEGIES}, got {self.inference_strategy!r}"
            )


@dataclass(frozen=True)
class MotionEmbeddingSet:
    """The full learnable set: (m_qk_i, m_v_i) for every temporal module i."""

    config: EmbeddingShapeConfig
    n_frames: int
    module_shapes: tuple[ModuleShape, ...]
    m_qk: tuple[np.ndarray, ...] = field(repr=False)
    m_v: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        if len(self.m_qk) != len(self.module_shapes) or len(self.m_v) != len(self.module_shapes):
            raise ValueError("one (m_qk, m_v) pair required per module")
        for i, (shape, qk, v) in enumerate(zip(self.module_shapes, self.m_qk, self.m_v)):
            s_qk = expected_rows(shape, self.config.qk_spatial)
            s_v = expected_rows(shape, self.config.v_spatial)
            want_qk = (s_qk, self.n_frames, shape.channels)
            want_v = (s_v, self.n_frames, shape.channels)
            if qk.shape != want_qk:
                raise ValueError(f"module {i}: m_qk shape {qk.shape} != expected {want_qk}")
            if v.shape != want_v:
                raise ValueError(f"module {i}: m_v shape {v.shape} != expected {want_v}")

    @property
    def n_modules(self) -> int:
        return len(self.module_shapes)

    def parameter_count(self) -> int:
        return sum(a.size for a in self.m_qk) + sum(a.size for a in self.m_v)


def expected_rows(shape: ModuleShape, spatial: str) -> int:
    return 1 if spatial == "one_d" else shape.height * shape.width


def init_zero(denoiser_spec, config: EmbeddingShapeConfig, n_frames: int) -> MotionEmbeddingSet:
    """All-zero set matching the spec's per-module (C, H, W) descriptors.

    `denoiser_spec` may be a DenoiserSpec or a bare iterable of (C, H, W)
    triples; with a full spec, n_frames must equal the spec's frame count.
    """
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if hasattr(denoiser_spec, "temporal_modules"):
        if n_frames != denoiser_spec.frames:
            raise ValueError(
                f"n_frames {n_frames} inconsistent with denoiser spec frames "
                f"{denoiser_spec.frames}"
            )
        module_shapes = denoiser_spec.temporal_modules()
    else:
        module_shapes = denoiser_spec
    shapes = tuple(ModuleShape(*s) for s in module_shapes)
    m_qk = tuple(
        tensor.as_real(np.zeros((expected_rows(s, config.qk_spatial), n_frames, s.channels)))
        for s in shapes
    )
    m_v = tuple(
        tensor.as_real(np.zeros((expected_rows(s, config.v_spatial), n_frames, s.channels)))
        for s in shapes
    )
    return MotionEmbeddingSet(
        config=config, n_frames=n_frames, module_shapes=shapes, m_qk=m_qk, m_v=m_v
    )


def _replace_values(m: MotionEmbeddingSet, new_v) -> MotionEmbeddingSet:
    return replace(m, m_v=tuple(new_v))


def debias_differential(m: MotionEmbeddingSet) -> MotionEmbeddingSet:
    """Frame differencing on the value embeddings; frame 1 passes through.

    Removes frame-constant appearance content while keeping the first frame's
    residue; cumulative-summing the result over frames reconstructs the input.
    The query/key embeddings are untouched.
    """
    new_v = []
    for v in m.m_v:
        out = v.copy()
        out[:, 1:, :] = v[:, 1:, :] - v[:, :-1, :]
        new_v.append(out)
    return _replace_values(m, new_v)


def debias_normalize(m: MotionEmbeddingSet) -> MotionEmbeddingSet:
    """Remove the per-(row, channel) frame mean from the value embeddings."""
    return _replace_values(m, [v - v.mean(axis=1, keepdims=True) for v in m.m_v])


def cumulative_over_frames(m: MotionEmbeddingSet) -> MotionEmbeddingSet:
    """Inverse of `debias_differential` (exact telescoping sum)."""
    return _replace_values(m, [np.cumsum(v, axis=1) for v in m.m_v])


def apply_inference_strategy(m: MotionEmbeddingSet, config: EmbeddingShapeConfig | None = None) -> MotionEmbeddingSet:
    strategy = (config or m.config).inference_strategy
    if strategy == "differential":
        return debias_differential(m)
    if strategy == "normalize":
        return debias_normalize(m)
    return m


def matches_modules(m: MotionEmbeddingSet, module_shapes, n_frames: int) -> bool:
    return (
        m.module_shapes == tuple(ModuleShape(*s) for s in module_shapes)
        and m.n_frames == n_frames
    )


def save(m: MotionEmbeddingSet, path: str) -> None:
    """MEMB0001: magic; u32 L, N, qk/v/strategy enums; per-module u32
    C,H,W,S_qk,S_v; then float64 values in module order, m_qk before m_v."""
    w = formats.Writer()
    w.magic(MAGIC)
    w.u32(m.n_modules)
    w.u32(m.n_frames)
    w.u32(SPATIAL_KINDS.index(m.config.qk_spatial))
    w.u32(SPATIAL_KINDS.index(m.config.v_spatial))
    w.u32(STRATEGIES.index(m.config.inference_strategy))
    for shape, qk, v in zip(m.module_shapes, m.m_qk, m.m_v):
        w.u32(shape.channels)
        w.u32(shape.height)
        w.u32(shape.width)
        w.u32(qk.shape[0])
        w.u32(v.shape[0])
    for qk, v in zip(m.m_qk, m.m_v):
        w.array(qk, np.float64)
        w.array(v, np.float64)
    formats.atomic_write(path, w.getvalue())


def load(path: str) -> MotionEmbeddingSet:
    r = formats.read_file(path)
    r.expect_magic(MAGIC)
    n_modules = r.extent("module count")
    n_frames = r.extent("frame count")
    enums = [r.u32() for _ in range(3)]
    if enums[0] >= len(SPATIAL_KINDS) or enums[1] >= len(SPATIAL_KINDS) or enums[2] >= len(STRATEGIES):
        raise FormatError(f"{path}: unknown shape-config enum values {enums} in header")
    config = EmbeddingShapeConfig(
        qk_spatial=SPATIAL_KINDS[enums[0]],
        v_spatial=SPATIAL_KINDS[enums[1]],
        inference_strategy=STRATEGIES[enums[2]],
    )
    shapes = []
    rows = []
    for _ in range(n_modules):
        c, h, w_ = (r.extent("channel"), r.extent("height"), r.extent("width"))
        s_qk, s_v = r.extent("qk row"), r.extent("v row")
        shapes.append(ModuleShape(c, h, w_))
        rows.append((s_qk, s_v))
    for shape, (s_qk, s_v) in zip(shapes, rows):
        if s_qk != expected_rows(shape, config.qk_spatial) or s_v != expected_rows(
            shape, config.v_spatial
        ):
            raise FormatError(
                f"{path}: header row extents ({s_qk},{s_v}) inconsistent with "
                f"shape config {config.qk_spatial}/{config.v_spatial} for module {shape}"
            )
    m_qk, m_v = [], []
    for shape, (s_qk, s_v) in zip(shapes, rows):
        m_qk.append(r.array((s_qk, n_frames, shape.channels), np.float64))
        m_v.append(r.array((s_v, n_frames, shape.channels), np.float64))
    r.expect_end()
    try:
        return MotionEmbeddingSet(
            config=config,
            n_frames=n_frames,
            module_shapes=tuple(shapes),
            m_qk=tuple(m_qk),
            m_v=tuple(m_v),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
