"""Toy video noise-prediction network.

A small two-half (down/up) stack in pixel space: per-pixel channel mixers with
tanh, 2x2 average-pool / nearest-upsample between resolution levels, additive
sinusoidal time embedding plus a learned per-prompt-id vector, and one or more
temporal attention modules per level per half. Every block sits behind a
residual connection. The temporal modules are the only place motion embeddings
enter; with a zero or absent set the network is bitwise identical to the
uninjected computation.

Internally features live in the frame-major layout (H*W, N, C); pooling
round-trips through (N, C, H, W).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import attention
from . import autodiff as ad
from . import formats
from . import tensor
from .embeddings import ModuleShape, MotionEmbeddingSet
from .errors import FormatError

MAGIC = b"MDEN0001"


@dataclass(frozen=True)
class DenoiserSpec:
    base_channels: int = 32
    height: int = 16
    width: int = 16
    frames: int = 8
    channel_mults: tuple[int, ...] = (1, 2)
    temporal_per_level: int = 1
    cond_vocab: int = 8
    time_dim: int = 32
    img_channels: int = 3

    def __post_init__(self):
        levels = len(self.channel_mults)
        if levels < 1:
            raise ValueError("channel_mults must be nonempty")
        div = 1 << (levels - 1)
        if self.height % div or self.width % div:
            raise ValueError(
                f"height/width ({self.height},{self.width}) must be divisible by "
                f"2^(levels-1) = {div}"
            )
        if self.time_dim % 2:
            raise ValueError(f"time_dim must be even, got {self.time_dim}")
        for name in ("base_channels", "height", "width", "frames", "temporal_per_level",
                     "cond_vocab", "time_dim", "img_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def n_levels(self) -> int:
        return len(self.channel_mults)

    def level_channels(self, level: int) -> int:
        return self.base_channels * self.channel_mults[level]

    def level_size(self, level: int) -> tuple[int, int]:
        return self.height >> level, self.width >> level

    def temporal_modules(self) -> tuple[ModuleShape, ...]:
        """Per-module (C, H, W), in forward-pass order: down levels then up."""
        down = []
        for lvl in range(self.n_levels):
            h, w = self.level_size(lvl)
            down += [ModuleShape(self.level_channels(lvl), h, w)] * self.temporal_per_level
        return tuple(down + down[::-1])


@dataclass(frozen=True)
class DenoiserParams:
    spec: DenoiserSpec
    tensors: dict[str, np.ndarray] = field(repr=False)
    frozen: bool = False

    def __post_init__(self):
        for arr in self.tensors.values():
            arr.setflags(write=False)

    def freeze(self) -> "DenoiserParams":
        return replace(self, frozen=True)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.tensors):
            arr = self.tensors[name]
            h.update(name.encode())
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()


def _param_shapes(spec: DenoiserSpec) -> dict[str, tuple[int, ...]]:
    c0 = spec.level_channels(0)
    shapes: dict[str, tuple[int, ...]] = {
        "stem.w": (c0, spec.img_channels),
        "stem.b": (c0,),
        "head.w": (spec.img_channels, c0),
        "head.b": (spec.img_channels,),
        "cond.table": (spec.cond_vocab, spec.time_dim),
    }
    for lvl in range(spec.n_levels):
        c = spec.level_channels(lvl)
        shapes[f"lvl{lvl}.temb.w"] = (c, spec.time_dim)
        shapes[f"lvl{lvl}.temb.b"] = (c,)
        for half in ("mixdown", "mixup"):
            shapes[f"lvl{lvl}.{half}.w1"] = (c, c)
            shapes[f"lvl{lvl}.{half}.b1"] = (c,)
            shapes[f"lvl{lvl}.{half}.w2"] = (c, c)
            shapes[f"lvl{lvl}.{half}.b2"] = (c,)
        if lvl > 0:
            c_prev = spec.level_channels(lvl - 1)
            shapes[f"lvl{lvl}.down.w"] = (c, c_prev)
            shapes[f"lvl{lvl}.down.b"] = (c,)
            shapes[f"lvl{lvl}.up.w"] = (c_prev, c)
            shapes[f"lvl{lvl}.up.b"] = (c_prev,)
    for j, mod in enumerate(spec.temporal_modules()):
        for proj in ("wq", "wk", "wv"):
            shapes[f"attn{j}.{proj}"] = (mod.channels, mod.channels)
    return shapes


def init_params(spec: DenoiserSpec, seed: int) -> DenoiserParams:
    """Fan-in-scaled normal weights, zero biases; deterministic per seed."""
    rng = tensor.make_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in sorted(_param_shapes(spec).items()):
        if name.endswith(".b") or name.endswith((".b1", ".b2")):
            tensors[name] = tensor.as_real(np.zeros(shape))
        else:
            fan_in = shape[-1]
            tensors[name] = tensor.as_real(
                rng.standard_normal(shape) / np.sqrt(fan_in)
            )
    return DenoiserParams(spec=spec, tensors=tensors, frozen=False)


def time_embedding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal embedding of the integer timestep (half sin, half cos)."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = float(t) * freqs
    return tensor.as_real(np.concatenate([np.sin(angles), np.cos(angles)]))


def _validate_embeddings(spec: DenoiserSpec, m: MotionEmbeddingSet, n_frames: int) -> None:
    expect = spec.temporal_modules()
    if m.module_shapes != expect:
        raise ValueError(
            f"embedding set module shapes {m.module_shapes} do not match the "
            f"denoiser spec's {expect}"
        )
    if m.n_frames != n_frames:
        raise ValueError(
            f"embedding set frame count {m.n_frames} does not match input frames "
            f"{n_frames}"
        )


def _linear(h, p, w_name: str, b_name: str):
    return ad.add(ad.matmul(h, ad.permute(p[w_name], (1, 0))), p[b_name])


def _mixer(h, p, prefix: str):
    return _linear(ad.tanh(_linear(h, p, f"{prefix}.w1", f"{prefix}.b1")), p, f"{prefix}.w2", f"{prefix}.b2")


def _pool_fm(h, height: int, width: int):
    n, c = h.value.shape[1], h.value.shape[2]
    x = ad.permute(ad.reshape(h, (height, width, n, c)), (2, 3, 0, 1))
    x = ad.avg_pool_2x2(x)
    x = ad.permute(x, (2, 3, 0, 1))
    return ad.reshape(x, ((height // 2) * (width // 2), n, c))


def _upsample_fm(h, height: int, width: int):
    n, c = h.value.shape[1], h.value.shape[2]
    x = ad.permute(ad.reshape(h, (height, width, n, c)), (2, 3, 0, 1))
    x = ad.upsample_nearest_2x(x)
    x = ad.permute(x, (2, 3, 0, 1))
    return ad.reshape(x, ((height * 2) * (width * 2), n, c))


def forward_graph(
    param_nodes: dict[str, ad.Node],
    spec: DenoiserSpec,
    x: ad.Node,
    t: int,
    cond: int,
    m_nodes=None,
    module_mask=None,
):
    """Graph-level forward; x is frame-major (H*W, N, C_img).

    `m_nodes` is an optional list of (m_qk, m_v) Node pairs, one per temporal
    module; `module_mask` (debugging only) disables injection per module.
    """
    p = param_nodes
    n_mod = len(spec.temporal_modules())
    if module_mask is None:
        module_mask = [True] * n_mod

    emb = ad.reshape(
        ad.add(ad.constant(time_embedding(t, spec.time_dim)), ad.take_row(p["cond.table"], cond)),
        (1, spec.time_dim),
    )

    def temporal(h, j):
        mod = spec.temporal_modules()[j]
        m_qk = m_v = None
        if m_nodes is not None and module_mask[j]:
            m_qk, m_v = m_nodes[j]
        return ad.add(
            h,
            attention.attention_nodes(
                h, p[f"attn{j}.wq"], p[f"attn{j}.wk"], p[f"attn{j}.wv"],
                mod.channels, m_qk=m_qk, m_v=m_v,
            ),
        )

    h = _linear(x, p, "stem.w", "stem.b")
    module_idx = 0
    skips = []
    for lvl in range(spec.n_levels):
        hgt, wid = spec.level_size(lvl)
        if lvl > 0:
            h = _pool_fm(h, hgt * 2, wid * 2)
            h = _linear(h, p, f"lvl{lvl}.down.w", f"lvl{lvl}.down.b")
        e = _linear(emb, p, f"lvl{lvl}.temb.w", f"lvl{lvl}.temb.b")
        h = ad.add(h, ad.reshape(e, (1, 1, spec.level_channels(lvl))))
        h = ad.add(h, _mixer(h, p, f"lvl{lvl}.mixdown"))
        for _ in range(spec.temporal_per_level):
            h = temporal(h, module_idx)
            module_idx += 1
        skips.append(h)
    for lvl in reversed(range(spec.n_levels)):
        hgt, wid = spec.level_size(lvl)
        if lvl < spec.n_levels - 1:
            h = _upsample_fm(h, hgt // 2, wid // 2)
            h = _linear(h, p, f"lvl{lvl + 1}.up.w", f"lvl{lvl + 1}.up.b")
            h = ad.add(h, skips[lvl])
        h = ad.add(h, _mixer(h, p, f"lvl{lvl}.mixup"))
        for _ in range(spec.temporal_per_level):
            h = temporal(h, module_idx)
            module_idx += 1
    return _linear(h, p, "head.w", "head.b")


def param_nodes(params: DenoiserParams, trainable: bool = False) -> dict[str, ad.Node]:
    make = ad.parameter if trainable else ad.constant
    return {name: make(arr) for name, arr in params.tensors.items()}


def forward(
    params: DenoiserParams,
    x_t: np.ndarray,
    t: int,
    cond: int,
    m: MotionEmbeddingSet | None = None,
    module_mask=None,
) -> np.ndarray:
    """Predict the noise for a video tensor (1, C_img, N, H, W)."""
    x_t = np.asarray(x_t)
    spec = params.spec
    want = (1, spec.img_channels, spec.frames, spec.height, spec.width)
    if x_t.shape != want:
        raise ValueError(f"forward: input shape {x_t.shape} != spec shape {want}")
    if t < 1:
        raise ValueError(f"forward: timestep must be >= 1, got {t}")
    if not 0 <= cond < spec.cond_vocab:
        raise ValueError(f"forward: cond id {cond} outside vocabulary [0,{spec.cond_vocab})")
    m_nodes = None
    if m is not None:
        _validate_embeddings(spec, m, spec.frames)
        m_nodes = [
            (ad.constant(qk), ad.constant(v)) for qk, v in zip(m.m_qk, m.m_v)
        ]
    f = attention.to_frame_major(tensor.as_real(x_t))
    out = forward_graph(
        param_nodes(params), spec, ad.constant(f), t, cond,
        m_nodes=m_nodes, module_mask=module_mask,
    )
    return attention.from_frame_major(out.value, spec.height, spec.width)


def save_params(params: DenoiserParams, path: str) -> None:
    """MDEN0001: magic; spec header; frozen flag; sorted named float64 blobs."""
    w = formats.Writer()
    w.magic(MAGIC)
    spec = params.spec
    w.u32(spec.base_channels)
    w.u32(spec.height)
    w.u32(spec.width)
    w.u32(spec.frames)
    w.u32(len(spec.channel_mults))
    for mult in spec.channel_mults:
        w.u32(mult)
    w.u32(spec.temporal_per_level)
    w.u32(spec.cond_vocab)
    w.u32(spec.time_dim)
    w.u32(spec.img_channels)
    w.u8(1 if params.frozen else 0)
    w.u32(len(params.tensors))
    for name in sorted(params.tensors):
        arr = params.tensors[name]
        enc = name.encode()
        w.u32(len(enc))
        w.buf += enc
        w.u32(arr.ndim)
        for extent in arr.shape:
            w.u32(extent)
        w.array(arr, np.float64)
    formats.atomic_write(path, w.getvalue())


def load_params(path: str) -> DenoiserParams:
    r = formats.read_file(path)
    r.expect_magic(MAGIC)
    base, height, width, frames = (r.extent(k) for k in ("base", "height", "width", "frames"))
    n_levels = r.extent("level count")
    mults = tuple(r.extent("channel mult") for _ in range(n_levels))
    tpl, vocab, tdim, cimg = (
        r.extent("temporal per level"), r.extent("cond vocab"),
        r.extent("time dim"), r.extent("img channels"),
    )
    frozen = bool(r.u8())
    try:
        spec = DenoiserSpec(
            base_channels=base, height=height, width=width, frames=frames,
            channel_mults=mults, temporal_per_level=tpl, cond_vocab=vocab,
            time_dim=tdim, img_channels=cimg,
        )
    except ValueError as exc:
        raise FormatError(f"{path}: header spec invalid ({exc})") from exc
    n_params = r.u32()
    expected = _param_shapes(spec)
    if n_params != len(expected):
        raise FormatError(
            f"{path}: header lists {n_params} tensors, spec requires {len(expected)}"
        )
    tensors: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        name_len = r.u32()
        if name_len > 256:
            raise FormatError(f"{path}: implausible tensor name length {name_len}")
        name = r.take(name_len).decode("utf-8", errors="replace")
        rank = r.u32()
        if rank > 8:
            raise FormatError(f"{path}: implausible tensor rank {rank} for {name!r}")
        shape = tuple(r.extent("tensor extent") for _ in range(rank))
        if name not in expected or shape != expected[name]:
            raise FormatError(
                f"{path}: tensor {name!r} with shape {shape} does not match the "
                f"spec's expected {expected.get(name)}"
            )
        tensors[name] = tensor.as_real(r.array(shape, np.float64))
    r.expect_end()
    if set(tensors) != set(expected):
        raise FormatError(f"{path}: tensor set incomplete or duplicated")
    return DenoiserParams(spec=spec, tensors=tensors, frozen=frozen)
