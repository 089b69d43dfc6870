"""Minimal reverse-mode tape over numpy arrays.

Each op records a `Node` whose backward closure maps the upstream gradient to
per-parent gradients. Subgraphs that cannot reach a trainable leaf record no
closure at all, so inference-only forward passes carry almost no overhead.
The recorded graph is acyclic by construction (nodes only reference already
existing parents).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import tensor


class Node:
    """One value in the recorded computation graph.

    `value` is a numpy array; `parents` and the backward closure are only kept
    when a gradient can flow through this node.
    """

    __slots__ = ("value", "parents", "requires_grad", "grad", "_backward")

    def __init__(self, value, parents=(), backward=None, requires_grad=False):
        self.value = np.asarray(value)
        self.parents: tuple[Node, ...] = tuple(parents)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._backward: Callable | None = backward


def constant(value) -> Node:
    return Node(tensor.as_real(value))


def parameter(value) -> Node:
    """Trainable leaf; `backward` populates `.grad` on it."""
    return Node(tensor.as_real(value), requires_grad=True)


def _lift(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def _make(value, parents: Sequence[Node], backward) -> Node:
    if any(p.requires_grad for p in parents):
        return Node(value, parents=parents, backward=backward, requires_grad=True)
    return Node(value)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape` (sum over expanded axes)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if keep:
        g = g.sum(axis=keep, keepdims=True)
    return g


def add(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    out = tensor.add(a.value, b.value)

    def backward(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return _make(out, (a, b), backward)


def sub(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    out = tensor.sub(a.value, b.value)

    def backward(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)

    return _make(out, (a, b), backward)


def mul(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    out = tensor.mul(a.value, b.value)

    def backward(g):
        return (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        )

    return _make(out, (a, b), backward)


def scale(a, c: float) -> Node:
    a = _lift(a)
    c = float(c)
    return _make(a.value * c, (a,), lambda g: (g * c,))


def matmul(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    out = tensor.matmul(a.value, b.value)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.value, -1, -2))
        gb = np.matmul(np.swapaxes(a.value, -1, -2), g)
        return _unbroadcast(ga, a.value.shape), _unbroadcast(gb, b.value.shape)

    return _make(out, (a, b), backward)


def softmax(a, axis: int) -> Node:
    a = _lift(a)
    y = tensor.softmax(a.value, axis)

    def backward(g):
        dot = np.sum(g * y, axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _make(y, (a,), backward)


def tanh(a) -> Node:
    a = _lift(a)
    y = np.tanh(a.value)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def reshape(a, shape) -> Node:
    a = _lift(a)
    orig = a.value.shape
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def permute(a, order) -> Node:
    a = _lift(a)
    order = tuple(order)
    inverse = tuple(np.argsort(order))
    return _make(
        np.transpose(a.value, order), (a,), lambda g: (np.transpose(g, inverse),)
    )


def mean(a, axes=None) -> Node:
    """Mean over `axes` (all axes when None); reduced axes are dropped."""
    a = _lift(a)
    if axes is None:
        axes = tuple(range(a.value.ndim))
    elif isinstance(axes, int):
        axes = (axes,)
    else:
        axes = tuple(axes)
    out = np.mean(a.value, axis=axes)
    count = int(np.prod([a.value.shape[i] for i in axes])) if axes else 1
    kept = tuple(
        1 if i in set(ax % a.value.ndim for ax in axes) else s
        for i, s in enumerate(a.value.shape)
    )

    def backward(g):
        return (np.broadcast_to(g.reshape(kept), a.value.shape) / count,)

    return _make(out, (a,), backward)


def avg_pool_2x2(a) -> Node:
    a = _lift(a)
    out = tensor.avg_pool_2x2(a.value)

    def backward(g):
        return (np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) / 4.0,)

    return _make(out, (a,), backward)


def upsample_nearest_2x(a) -> Node:
    a = _lift(a)
    out = tensor.upsample_nearest_2x(a.value)

    def backward(g):
        h, w = g.shape[-2] // 2, g.shape[-1] // 2
        r = g.reshape(g.shape[:-2] + (h, 2, w, 2))
        return (r.sum(axis=(-3, -1)),)

    return _make(out, (a,), backward)


def take_row(table, index: int) -> Node:
    """Select one leading-axis row; backward scatters into that row."""
    table = _lift(table)
    index = int(index)
    out = np.array(table.value[index])

    def backward(g):
        full = np.zeros_like(table.value)
        full[index] = g
        return (full,)

    return _make(out, (table,), backward)


def _toposort(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Node) -> None:
    """Populate `.grad` on every requires-grad node reachable from `loss`.

    `loss` must be scalar (shape ()).
    """
    if loss.value.shape != ():
        raise ValueError(f"backward: loss must be scalar, got shape {loss.value.shape}")
    if not loss.requires_grad:
        return
    order = _toposort(loss)
    loss.grad = np.ones((), dtype=loss.value.dtype)
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node._backward(node.grad)):
            if not parent.requires_grad or g is None:
                continue
            if parent.grad is None:
                parent.grad = np.array(g, dtype=parent.value.dtype)
            else:
                parent.grad = parent.grad + g


def grad(loss: Node, leaves: Sequence[Node]) -> list[np.ndarray]:
    """Gradients of a scalar loss for each leaf; disconnected leaves get zeros."""
    backward(loss)
    return [
        leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
        for leaf in leaves
    ]
