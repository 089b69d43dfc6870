"""Dense array kernels: dtype policy, seeded RNG, shape-checked numpy wrappers.

Tensors throughout the package are contiguous numpy arrays, float64 in the
reference path (float32 available via `set_default_dtype` for speed; tests run
the 64-bit path). All randomness goes through `make_rng`, which pins numpy's
Philox bit generator — a counter-based generator, so a given seed reproduces
the same stream bitwise within this implementation.

Broadcasting is numpy's "extent 1 expands, ranks align from the right"
semantics and nothing more; no op promotes ranks beyond prepending 1s.
"""

from __future__ import annotations

import numpy as np

_DEFAULT_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """Switch the computation dtype; only float64 and float32 are supported."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dt}; use float64 or float32")
    _DEFAULT_DTYPE = dt.type


def get_default_dtype():
    return _DEFAULT_DTYPE


def as_real(values) -> np.ndarray:
    """Coerce to a contiguous array of the current default dtype.

    0-d inputs stay 0-d (ascontiguousarray would promote them to 1-d).
    """
    arr = np.asarray(values, dtype=_DEFAULT_DTYPE)
    return np.ascontiguousarray(arr) if arr.ndim else arr


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator over the Philox4x64-10 counter-based bit generator."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def randn(shape, seed: int) -> np.ndarray:
    """Standard-normal fill, deterministic per (shape, seed)."""
    return as_real(make_rng(seed).standard_normal(shape))


def _check_broadcast(a_shape, b_shape, op: str):
    try:
        return np.broadcast_shapes(a_shape, b_shape)
    except ValueError:
        raise ValueError(
            f"{op}: shapes {tuple(a_shape)} and {tuple(b_shape)} do not broadcast"
        ) from None


def add(a, b) -> np.ndarray:
    _check_broadcast(np.shape(a), np.shape(b), "add")
    return np.add(a, b)


def sub(a, b) -> np.ndarray:
    _check_broadcast(np.shape(a), np.shape(b), "sub")
    return np.subtract(a, b)


def mul(a, b) -> np.ndarray:
    _check_broadcast(np.shape(a), np.shape(b), "mul")
    return np.multiply(a, b)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched matrix product [..,p,q] x [..,q,r] -> [..,p,r].

    Leading batch extents must match or broadcast from 1.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(
            f"matmul: operands must be at least rank 2, got {a.shape} and {b.shape}"
        )
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(
            f"matmul: inner extents differ for shapes {a.shape} and {b.shape}"
        )
    _check_broadcast(a.shape[:-2], b.shape[:-2], "matmul (batch dims)")
    return np.matmul(a, b)


def softmax(x: np.ndarray, axis: int) -> np.ndarray:
    """Stable softmax along `axis` (max-subtraction before exponentiation)."""
    x = np.asarray(x)
    if not -x.ndim <= axis < x.ndim:
        raise ValueError(f"softmax: axis {axis} invalid for shape {x.shape}")
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def reshape(x: np.ndarray, shape) -> np.ndarray:
    return np.reshape(x, shape)


def permute_axes(x: np.ndarray, order) -> np.ndarray:
    return np.transpose(x, order)


def mean_over(x: np.ndarray, axes=None) -> np.ndarray:
    return np.mean(x, axis=axes)


def avg_pool_2x2(x: np.ndarray) -> np.ndarray:
    """2x2 average pooling over the last two axes (extents must be even)."""
    x = np.asarray(x)
    h, w = x.shape[-2], x.shape[-1]
    if h % 2 or w % 2:
        raise ValueError(f"avg_pool_2x2: last two extents must be even, got {x.shape}")
    r = x.reshape(x.shape[:-2] + (h // 2, 2, w // 2, 2))
    return r.mean(axis=(-3, -1))


def upsample_nearest_2x(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbor 2x upsampling over the last two axes."""
    return np.repeat(np.repeat(np.asarray(x), 2, axis=-2), 2, axis=-1)
