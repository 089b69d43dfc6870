"""Motion-transfer evaluation: a deterministic block-matching point tracker,
the tracklet-correlation motion fidelity score, pairwise temporal consistency
over pluggable frame features, and the Gaussian Fréchet distance.

Tracklet correlation is the frame-mean cosine between per-frame displacement
vectors; two zero displacements count as cosine 1, exactly one zero as 0.
The fidelity score sums the best-match averages in both directions, so
identical sets score 2.0 and a direction-reversed copy of a single tracklet
scores -2.0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import tensor

PATCH_RADIUS = 2  # 5x5 patches
SEARCH_RADIUS = 4
DEFAULT_TRACK_POINTS = 16
MIN_POINT_SEPARATION = 3


@dataclass(frozen=True)
class Tracklet:
    """One tracked point: per-frame (x, y) positions."""

    positions: np.ndarray = field(repr=False)  # (N, 2)

    def __post_init__(self):
        p = self.positions
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 2:
            raise ValueError(f"tracklet positions must be (N>=2, 2), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("tracklet positions must be finite")

    @property
    def displacements(self) -> np.ndarray:
        return self.positions[1:] - self.positions[:-1]

    @property
    def n_frames(self) -> int:
        return len(self.positions)


def _grayscale(video: np.ndarray) -> np.ndarray:
    video = np.asarray(video)
    if video.ndim != 5 or video.shape[0] != 1:
        raise ValueError(f"track: expected video (1,C,N,H,W), got {video.shape}")
    return video[0].mean(axis=0)  # (N, H, W)


def _seed_points(gray0: np.ndarray, k: int) -> list[tuple[int, int]]:
    """Up to k local-contrast extrema of frame 1, greedily spaced apart."""
    h, w = gray0.shape
    r = PATCH_RADIUS
    # |pixel - local 5x5 mean| as the extremeness score
    padded = np.pad(gray0, r, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (2 * r + 1, 2 * r + 1))
    score = np.abs(gray0 - windows.mean(axis=(2, 3)))
    score = score[r : h - r, r : w - r]  # keep own patch in-bounds
    ys, xs = np.unravel_index(np.argsort(-score, axis=None, kind="stable"), score.shape)
    picked: list[tuple[int, int]] = []
    for y, x in zip(ys + r, xs + r):
        if any(max(abs(int(y) - py), abs(int(x) - px)) < MIN_POINT_SEPARATION for py, px in picked):
            continue
        picked.append((int(y), int(x)))
        if len(picked) == k:
            break
    return picked


def _best_match(prev: np.ndarray, cur: np.ndarray, y: int, x: int) -> tuple[int, int]:
    """Integer displacement minimizing 5x5 SSD; ties -> smaller |d|, then
    row-major candidate order."""
    h, w = cur.shape
    r = PATCH_RADIUS
    ref = prev[y - r : y + r + 1, x - r : x + r + 1]
    best = None
    for dy in range(-SEARCH_RADIUS, SEARCH_RADIUS + 1):
        ny = y + dy
        if ny - r < 0 or ny + r >= h:
            continue
        for dx in range(-SEARCH_RADIUS, SEARCH_RADIUS + 1):
            nx = x + dx
            if nx - r < 0 or nx + r >= w:
                continue
            cand = cur[ny - r : ny + r + 1, nx - r : nx + r + 1]
            cost = float(np.sum((cand - ref) ** 2))
            key = (cost, dy * dy + dx * dx, dy, dx)
            if best is None or key < best[0]:
                best = (key, dy, dx)
    if best is None:  # point cornered so tightly no candidate fits; stay put
        return 0, 0
    return best[1], best[2]


def track(video: np.ndarray, k: int = DEFAULT_TRACK_POINTS) -> list[Tracklet]:
    """Follow up to k frame-1 intensity extrema by block matching.

    Expects pixel values in [0,1]. Low-texture videos may yield fewer than k
    tracklets; that is documented behavior, not an error. Tracks that get
    pinned against the canvas (their content left the frame, so matches turn
    into texture self-similarity noise) are culled; if every track would be
    culled, all are kept so the result is never empty.
    """
    gray = _grayscale(video)
    n, h, w = gray.shape
    if n < 2:
        raise ValueError("track: need at least 2 frames")
    seeds = _seed_points(gray[0], k)
    tracklets = []
    surviving = []
    r = PATCH_RADIUS
    for y0, x0 in seeds:
        pos = np.empty((n, 2))
        pos[0] = (x0, y0)
        y, x = y0, x0
        pinned = False
        for t in range(1, n):
            dy, dx = _best_match(gray[t - 1], gray[t], y, x)
            y += dy
            x += dx
            pos[t] = (x, y)
            if y in (r, h - 1 - r) or x in (r, w - 1 - r):
                pinned = True
        tracklet = Tracklet(positions=tensor.as_real(pos))
        tracklets.append(tracklet)
        if not pinned:
            surviving.append(tracklet)
    return surviving if surviving else tracklets


def tracklet_correlation(a: Tracklet, b: Tracklet) -> float:
    """Frame-mean cosine between displacement vectors (zero conventions above)."""
    da, db = a.displacements, b.displacements
    if len(da) != len(db):
        raise ValueError(f"tracklet frame counts differ: {a.n_frames} vs {b.n_frames}")
    na = np.linalg.norm(da, axis=1)
    nb = np.linalg.norm(db, axis=1)
    both_zero = (na == 0.0) & (nb == 0.0)
    either_zero = (na == 0.0) | (nb == 0.0)
    denom = np.where(either_zero, 1.0, na * nb)
    cos = np.sum(da * db, axis=1) / denom
    cos = np.where(both_zero, 1.0, np.where(either_zero, 0.0, cos))
    return float(cos.mean())


def motion_fidelity(reference: Sequence[Tracklet], output: Sequence[Tracklet]) -> float:
    """Symmetric best-match average of tracklet correlations, in [-2, 2]."""
    if not reference or not output:
        raise ValueError("motion_fidelity: both tracklet sets must be nonempty")
    n_ref = reference[0].n_frames
    for t in list(reference) + list(output):
        if t.n_frames != n_ref:
            raise ValueError(
                f"motion_fidelity: mixed tracklet frame counts ({t.n_frames} vs {n_ref})"
            )
    corr = np.array(
        [[tracklet_correlation(r, o) for o in output] for r in reference]
    )  # (n, m)
    return float(corr.max(axis=0).mean() + corr.max(axis=1).mean())


def pooled_frame_features(frame: np.ndarray, grid: int = 4) -> np.ndarray:
    """Default extractor: grid x grid average-pooled pixels, flattened."""
    frame = np.asarray(frame)
    c, h, w = frame.shape
    if h % grid or w % grid:
        raise ValueError(f"frame size {h}x{w} not divisible by pooling grid {grid}")
    pooled = frame.reshape(c, grid, h // grid, grid, w // grid).mean(axis=(2, 4))
    return pooled.reshape(-1)


def video_features(video: np.ndarray, extractor: Callable | None = None) -> np.ndarray:
    video = np.asarray(video)
    extractor = extractor or pooled_frame_features
    return np.stack([extractor(video[0, :, t]) for t in range(video.shape[2])])


def temporal_consistency(video: np.ndarray, feature_extractor: Callable | None = None) -> float:
    """Mean cosine similarity of frame features over all unordered pairs.

    A zero-norm feature makes its pairs contribute 0 (still counted).
    """
    feats = video_features(video, feature_extractor)
    n = len(feats)
    if n < 2:
        raise ValueError("temporal_consistency: need at least 2 frames")
    norms = np.linalg.norm(feats, axis=1)
    total = 0.0
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            count += 1
            if norms[i] == 0.0 or norms[j] == 0.0:
                continue
            total += float(feats[i] @ feats[j] / (norms[i] * norms[j]))
    return total / count


def frechet_distance_from_stats(
    mu_a: np.ndarray, sigma_a: np.ndarray, mu_b: np.ndarray, sigma_b: np.ndarray,
    eps: float = 1e-6,
) -> float:
    """|mu_a-mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)), regularized diagonals."""
    mu_a = np.atleast_1d(np.asarray(mu_a, dtype=np.float64))
    mu_b = np.atleast_1d(np.asarray(mu_b, dtype=np.float64))
    sigma_a = np.atleast_2d(np.asarray(sigma_a, dtype=np.float64))
    sigma_b = np.atleast_2d(np.asarray(sigma_b, dtype=np.float64))
    reg = eps * np.eye(len(mu_a))
    sigma_a = sigma_a + reg
    sigma_b = sigma_b + reg
    covmean = scipy.linalg.sqrtm(sigma_a @ sigma_b)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(sigma_a + sigma_b - 2.0 * covmean))
    return max(value, 0.0)


def frechet_distance(features_a: np.ndarray, features_b: np.ndarray) -> float:
    """Gaussian Fréchet distance between two feature-vector sets (rows)."""
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(
            f"frechet_distance: expected (n,d)/(m,d) with equal d, got {a.shape}, {b.shape}"
        )
    if len(a) < 2 or len(b) < 2:
        raise ValueError("frechet_distance: need at least 2 samples per set")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("frechet_distance: features must be finite")
    return frechet_distance_from_stats(
        a.mean(axis=0), np.cov(a, rowvar=False), b.mean(axis=0), np.cov(b, rowvar=False)
    )


def format_report(entries: Sequence[tuple[str, float, Sequence[str]]]) -> str:
    """Line-oriented report: metric name, value, input paths (tab-separated)."""
    lines = []
    for name, value, paths in entries:
        lines.append("\t".join([name, f"{value:.10g}", *paths]))
    return "\n".join(lines) + "\n"
