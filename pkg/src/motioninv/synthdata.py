"""Deterministic toy-video generator with exact ground-truth trajectories.

Scenes are anti-aliased shapes (squares/discs) over a smooth random-Fourier
background texture. The motion script fully determines geometry — camera pan
(screen-space content velocity, px/frame), zoom about the canvas center, and
per-object trajectories — while the appearance seed only picks colors and
texture coefficients. Rasterization is 4x supersampled then box-downsampled so
sub-pixel motion survives.

Also owns the MVID0001 video file format (float32 payload) and a per-frame
PPM export for eyeballing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import formats
from . import tensor
from .errors import FormatError

MAGIC = b"MVID0001"
SUPERSAMPLE = 4


@dataclass(frozen=True)
class ObjectSpec:
    shape: str  # "square" or "disc"
    size: float  # half-extent (square) or radius (disc), px
    velocity: tuple[float, float]  # px/frame, (vx, vy)
    start: tuple[float, float]  # (x, y) at frame 0

    def __post_init__(self):
        if self.shape not in ("square", "disc"):
            raise ValueError(f"object shape must be square or disc, got {self.shape!r}")
        if self.size <= 0:
            raise ValueError("object size must be positive")


@dataclass(frozen=True)
class CameraSpec:
    pan: tuple[float, float] = (0.0, 0.0)  # content velocity on screen, px/frame
    zoom: float = 1.0  # scale factor per frame about the canvas center

    def __post_init__(self):
        if self.zoom <= 0:
            raise ValueError("zoom rate must be positive")


@dataclass(frozen=True)
class MotionScript:
    frames: int
    height: int
    width: int
    camera: CameraSpec = CameraSpec()
    objects: tuple[ObjectSpec, ...] = ()

    def __post_init__(self):
        if self.frames < 1 or self.height < 4 or self.width < 4:
            raise ValueError("script needs frames >= 1 and canvas >= 4x4")
        for i, obj in enumerate(self.objects):
            for t in range(self.frames):
                cx, cy = self.screen_center(obj, t)
                r = obj.size * self.scale(t)
                if not (
                    cx - r >= 1.0
                    and cy - r >= 1.0
                    and cx + r <= self.width - 1.0
                    and cy + r <= self.height - 1.0
                ):
                    raise ValueError(
                        f"object {i} leaves the canvas at frame {t} "
                        f"(center=({cx:.2f},{cy:.2f}), extent={r:.2f})"
                    )

    def scale(self, t: int) -> float:
        return self.camera.zoom ** t

    def screen_center(self, obj: ObjectSpec, t: int) -> tuple[float, float]:
        """World position -> screen: zoom about center, then content pan."""
        cx = self.width / 2.0
        cy = self.height / 2.0
        s = self.scale(t)
        wx = obj.start[0] + obj.velocity[0] * t
        wy = obj.start[1] + obj.velocity[1] * t
        return (
            cx + s * (wx - cx) + self.camera.pan[0] * t,
            cy + s * (wy - cy) + self.camera.pan[1] * t,
        )


@dataclass(frozen=True)
class GroundTruth:
    """Per object, per frame: sub-pixel screen-space center."""

    positions: tuple[np.ndarray, ...] = field(repr=False)  # each (N, 2) as (x, y)

    @property
    def n_objects(self) -> int:
        return len(self.positions)


class _Texture:
    """Smooth periodic-free random-Fourier field per color channel.

    The frequency band is chosen so a 16px canvas shows several strong local
    extrema (block-matching trackers need them)."""

    def __init__(self, rng: np.random.Generator, n_waves: int = 16,
                 lo: float = 0.10, hi: float = 0.55):
        self.lo = lo
        self.hi = hi
        self.freq = rng.uniform(0.5, 2.4, size=(3, n_waves, 2))
        self.phase = rng.uniform(0.0, 2.0 * np.pi, size=(3, n_waves))
        amp = rng.uniform(0.3, 1.0, size=(3, n_waves))
        # each cos contributes amp^2/2 variance; normalize the field std
        field_std = np.sqrt(np.sum(amp * amp / 2.0, axis=1, keepdims=True))
        self.amp = 0.9 * amp / field_std

    def sample(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """xs, ys (H, W) world coords -> (3, H, W) values in [lo, hi]."""
        out = np.empty((3,) + xs.shape)
        for c in range(3):
            acc = np.zeros_like(xs)
            for j in range(self.freq.shape[1]):
                acc += self.amp[c, j] * np.cos(
                    self.freq[c, j, 0] * xs + self.freq[c, j, 1] * ys + self.phase[c, j]
                )
            out[c] = (acc + 1.0) / 2.0
        return self.lo + (self.hi - self.lo) * np.clip(out, 0.0, 1.0)


def render(script: MotionScript, appearance_seed: int) -> tuple[np.ndarray, GroundTruth]:
    """Rasterize a script; returns ((1,3,N,H,W) video in [0,1], GroundTruth).

    The appearance seed picks texture coefficients and object colors only;
    geometry (and therefore the ground truth) comes from the script alone.
    """
    rng = tensor.make_rng(appearance_seed)
    texture = _Texture(rng)
    n_obj = max(len(script.objects), 1)
    colors = rng.uniform(0.6, 1.0, size=(n_obj, 3))
    dim = rng.integers(0, 2, size=n_obj)
    colors[dim == 1] *= 0.15  # some objects dark against the background
    # contrasting core dot gives every object an interior feature to track
    core_colors = np.where(
        colors.mean(axis=1, keepdims=True) > 0.5, colors * 0.2, 0.85 + 0.15 * colors
    )

    h, w, n = script.height, script.width, script.frames
    ss = SUPERSAMPLE
    ys, xs = np.meshgrid(
        (np.arange(h * ss) + 0.5) / ss, (np.arange(w * ss) + 0.5) / ss, indexing="ij"
    )
    cx, cy = w / 2.0, h / 2.0
    video = np.empty((1, 3, n, h, w))
    for t in range(n):
        s = script.scale(t)
        # inverse map: screen -> world, for background sampling
        wx = cx + (xs - script.camera.pan[0] * t - cx) / s
        wy = cy + (ys - script.camera.pan[1] * t - cy) / s
        frame = texture.sample(wx, wy)
        for i, obj in enumerate(script.objects):
            ox, oy = script.screen_center(obj, t)
            r = obj.size * s
            if obj.shape == "square":
                mask = (np.abs(xs - ox) <= r) & (np.abs(ys - oy) <= r)
            else:
                mask = (xs - ox) ** 2 + (ys - oy) ** 2 <= r * r
            for c in range(3):
                frame[c][mask] = colors[i, c]
        pooled = frame.reshape(3, h, ss, w, ss).mean(axis=(2, 4))
        video[0, :, t] = pooled
    truth = GroundTruth(
        positions=tuple(
            tensor.as_real([script.screen_center(obj, t) for t in range(n)])
            for obj in script.objects
        )
    )
    return tensor.as_real(np.clip(video, 0.0, 1.0)), truth


def save_video(video: np.ndarray, path: str) -> None:
    """MVID0001: magic; u32 1, C, N, H, W; float32 payload."""
    video = np.asarray(video)
    if video.ndim != 5 or video.shape[0] != 1:
        raise ValueError(f"save_video: expected (1,C,N,H,W), got {video.shape}")
    w = formats.Writer()
    w.magic(MAGIC)
    for extent in video.shape:
        w.u32(extent)
    w.array(video, np.float32)
    formats.atomic_write(path, w.getvalue())


def load_video(path: str) -> np.ndarray:
    """Reads an MVID file; returns float array in the default dtype."""
    r = formats.read_file(path)
    r.expect_magic(MAGIC)
    lead = r.u32()
    if lead != 1:
        raise FormatError(f"{path}: leading extent must be 1, got {lead}")
    shape = (1,) + tuple(r.extent(k) for k in ("channels", "frames", "height", "width"))
    data = r.array(shape, np.float32)
    r.expect_end()
    return tensor.as_real(data)


def export_ppm(video: np.ndarray, prefix: str) -> list[str]:
    """One binary PPM per frame, values scaled from [0,1]."""
    video = np.asarray(video)
    paths = []
    n = video.shape[2]
    for t in range(n):
        frame = np.clip(video[0, :, t], 0.0, 1.0)
        rgb = (np.transpose(frame, (1, 2, 0)) * 255.0 + 0.5).astype(np.uint8)
        header = f"P6 {rgb.shape[1]} {rgb.shape[0]} 255\n".encode()
        path = f"{prefix}_{t:03d}.ppm"
        formats.atomic_write(path, header + rgb.tobytes())
        paths.append(path)
    return paths


def _pan_scripts(frames: int, h: int, w: int) -> list[tuple[str, MotionScript]]:
    directions = {"right": (1, 0), "left": (-1, 0), "down": (0, 1), "up": (0, -1)}
    out = []
    for name, (dx, dy) in directions.items():
        # speed 1 keeps a small disc inside a 16px canvas for 8 frames
        start = (w / 2.0 - dx * (frames - 1) / 2.0, h / 2.0 - dy * (frames - 1) / 2.0)
        out.append((
            f"pan_{name}_1",
            MotionScript(
                frames=frames, height=h, width=w,
                camera=CameraSpec(pan=(float(dx), float(dy))),
                objects=(ObjectSpec("disc", 2.0, (0.0, 0.0), start),),
            ),
        ))
        out.append((
            f"pan_{name}_2",
            MotionScript(
                frames=frames, height=h, width=w,
                camera=CameraSpec(pan=(2.0 * dx, 2.0 * dy)),
            ),
        ))
    return out


def _zoom_scripts(frames: int, h: int, w: int) -> list[tuple[str, MotionScript]]:
    out = []
    for name, rate in (("in", 1.05), ("out", 1.0 / 1.05)):
        for shape in ("disc", "square"):
            off = 2.5 if shape == "disc" else -2.5
            out.append((
                f"zoom_{name}_{shape}",
                MotionScript(
                    frames=frames, height=h, width=w,
                    camera=CameraSpec(zoom=rate),
                    objects=(ObjectSpec(shape, 2.0, (0.0, 0.0), (w / 2.0 + off, h / 2.0)),),
                ),
            ))
    return out


_EIGHT_DIRS = (
    ("e", (1, 0)), ("w", (-1, 0)), ("s", (0, 1)), ("n", (0, -1)),
    ("se", (1, 1)), ("nw", (-1, -1)), ("ne", (1, -1)), ("sw", (-1, 1)),
)


def _translation_scripts(frames: int, h: int, w: int) -> list[tuple[str, MotionScript]]:
    out = []
    for name, (dx, dy) in _EIGHT_DIRS:
        for shape in ("square", "disc"):
            for size in (1.5, 2.5):
                start = (
                    w / 2.0 - dx * (frames - 1) / 2.0,
                    h / 2.0 - dy * (frames - 1) / 2.0,
                )
                out.append((
                    f"move_{name}_{shape}_{size:g}",
                    MotionScript(
                        frames=frames, height=h, width=w,
                        objects=(ObjectSpec(shape, size, (float(dx), float(dy)), start),),
                    ),
                ))
        # same direction, start offset perpendicular to the motion
        start = (
            w / 2.0 - dx * (frames - 1) / 2.0 - dy * 2.0,
            h / 2.0 - dy * (frames - 1) / 2.0 + dx * 2.0,
        )
        out.append((
            f"move_{name}_offset",
            MotionScript(
                frames=frames, height=h, width=w,
                objects=(ObjectSpec("disc", 1.5, (float(dx), float(dy)), start),),
            ),
        ))
    return out


def default_scripts(frames: int = 8, height: int = 16, width: int = 16) -> dict[str, MotionScript]:
    """The pretraining corpus: 64 scripts over pans, zooms, translations,
    statics, and one two-object scene."""
    scripts: list[tuple[str, MotionScript]] = []
    scripts += _pan_scripts(frames, height, width)          # 8
    scripts += _zoom_scripts(frames, height, width)         # 4
    scripts += _translation_scripts(frames, height, width)  # 40
    for shape in ("square", "disc"):
        for size in (1.5, 2.5, 3.5):
            scripts.append((
                f"static_{shape}_{size:g}",
                MotionScript(
                    frames=frames, height=height, width=width,
                    objects=(ObjectSpec(shape, size, (0.0, 0.0), (width / 2.0, height / 2.0)),),
                ),
            ))                                              # 6
    scripts.append((
        "two_object",
        MotionScript(
            frames=frames, height=height, width=width,
            objects=(
                ObjectSpec("square", 1.5, (1.0, 0.0), (width * 0.25, height * 0.3)),
                ObjectSpec("disc", 1.5, (-1.0, 0.0), (width * 0.75, height * 0.7)),
            ),
        ),
    ))                                                      # 1
    scripts.extend((
        ("static_background", MotionScript(frames=frames, height=height, width=width)),
        ("pan_se_1", MotionScript(
            frames=frames, height=height, width=width, camera=CameraSpec(pan=(1.0, 1.0)))),
        ("pan_nw_1", MotionScript(
            frames=frames, height=height, width=width, camera=CameraSpec(pan=(-1.0, -1.0)))),
        ("zoom_in_slow", MotionScript(
            frames=frames, height=height, width=width, camera=CameraSpec(zoom=1.02))),
        ("zoom_out_slow", MotionScript(
            frames=frames, height=height, width=width, camera=CameraSpec(zoom=1.0 / 1.02))),
    ))                                                      # 5 -> 64 total
    catalog = dict(scripts)
    assert len(catalog) == 64, f"corpus script count drifted: {len(catalog)}"
    return catalog


def held_out_scripts(frames: int = 8, height: int = 16, width: int = 16) -> dict[str, MotionScript]:
    """Inversion targets deliberately absent from the pretraining corpus."""
    return {
        "pan_right_hold": MotionScript(
            frames=frames, height=height, width=width,
            camera=CameraSpec(pan=(1.0, 0.0)),
            objects=(ObjectSpec("square", 2.0, (0.0, 0.0),
                                (width / 2.0 - (frames - 1) / 2.0, height * 0.35)),),
        ),
        "pan_left_hold": MotionScript(
            frames=frames, height=height, width=width,
            camera=CameraSpec(pan=(-1.0, 0.0)),
            objects=(ObjectSpec("square", 2.0, (0.0, 0.0),
                                (width / 2.0 + (frames - 1) / 2.0, height * 0.65)),),
        ),
    }


def script_catalog(frames: int = 8, height: int = 16, width: int = 16) -> dict[str, MotionScript]:
    catalog = default_scripts(frames, height, width)
    catalog.update(held_out_scripts(frames, height, width))
    return catalog


def corpus_videos(
    frames: int = 8, height: int = 16, width: int = 16, appearance_seeds=(0, 1, 2, 3)
) -> list[tuple[np.ndarray, int]]:
    """Rendered corpus as (video, cond) pairs; cond = appearance-seed index."""
    out = []
    for script in default_scripts(frames, height, width).values():
        for cond, seed in enumerate(appearance_seeds):
            video, _ = render(script, seed)
            out.append((video, cond))
    return out
