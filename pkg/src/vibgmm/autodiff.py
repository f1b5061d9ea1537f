"""Dense float64 tensors with a dynamic reverse-mode gradient tape.

The tape is rebuilt on every forward pass (define-by-run). Operations record
a node only while a ``Tape`` is active and at least one operand is tracked,
so evaluation outside a tape costs nothing extra. Supported broadcasting is
deliberately narrow: scalar-with-tensor, and adding a row vector to each row
of a matrix (bias addition). Everything else must shape-match exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class TapeError(RuntimeError):
    """backward() called on a tensor that is not attached to an active tape."""


class NumericsError(RuntimeError):
    """A value that must be finite came out NaN or infinite."""


_ACTIVE_TAPE = None


class Tensor:
    """A dense float64 array, optionally tracked for gradients.

    Leaf tensors created with ``requires_grad=True`` receive a ``.grad``
    buffer when ``backward`` runs. Tensors produced by ops under an active
    tape carry a ``tape_id`` referencing their producing node.
    """

    __slots__ = ("data", "grad", "requires_grad", "tape", "tape_id")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.tape = None
        self.tape_id = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # operator sugar; constants (floats, ndarrays) are wrapped untracked
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class _Node:
    __slots__ = ("out", "inputs", "bwd")

    def __init__(self, out, inputs, bwd):
        self.out = out
        self.inputs = inputs
        self.bwd = bwd


class Tape:
    """Ordered record of operations; reverse order is a valid topological
    order by construction, so backward visits each node exactly once."""

    def __init__(self):
        self.nodes = []
        self._prev = None

    def __enter__(self):
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        return False

    def __len__(self):
        return len(self.nodes)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(t):
    if t.requires_grad:
        return True
    return t.tape is not None and t.tape is _ACTIVE_TAPE


def _record(out, inputs, bwd):
    if _ACTIVE_TAPE is not None and any(_tracked(t) for t in inputs):
        out.tape = _ACTIVE_TAPE
        out.tape_id = len(_ACTIVE_TAPE.nodes)
        _ACTIVE_TAPE.nodes.append(_Node(out, inputs, bwd))
    return out


def record_custom_op(out_data, inputs, bwd):
    """Record a fused operation with a hand-written backward rule.

    ``bwd(g)`` must return one gradient array (or None) per input, in order.
    """
    return _record(Tensor(out_data), tuple(inputs), bwd)


def backward(loss):
    """Populate ``.grad`` on every tracked tensor reachable from ``loss``.

    ``loss`` must be a scalar produced under a still-live tape.
    """
    if loss.size != 1:
        raise TapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    tape = loss.tape
    if tape is None or loss.tape_id is None:
        raise TapeError("tensor is detached from any tape; nothing to differentiate")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes[: loss.tape_id + 1]):
        g = node.out.grad
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.bwd(g)):
            if gi is None or not (t.requires_grad or t.tape is tape):
                continue
            # never mutate gi in place: it may alias g or a broadcast view
            t.grad = gi if t.grad is None else t.grad + gi


# ---------------------------------------------------------------------------
# primitive operations


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data)

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _record(out, (a, b), bwd)


def _binary_mode(a, b):
    """Classify a supported add/sub/mul broadcast: 'same', 'b_scalar',
    'a_scalar', or 'b_row' (row-vector against matrix rows)."""
    if a.shape == b.shape:
        return "same"
    if b.size == 1:
        return "b_scalar"
    if a.size == 1:
        return "a_scalar"
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return "b_row"
    raise ShapeError(f"unsupported operand shapes {a.shape} and {b.shape}")


def _reduce_to(g, mode, shape):
    if mode == "same":
        return g
    if mode == "scalar":
        return np.asarray(g.sum()).reshape(shape)
    return g.sum(axis=0)  # row vector


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    mode = _binary_mode(a, b)
    out = Tensor(a.data + b.data)

    def bwd(g):
        if mode == "same":
            return g, g
        if mode == "b_scalar":
            return g, _reduce_to(g, "scalar", b.shape)
        if mode == "a_scalar":
            return _reduce_to(g, "scalar", a.shape), g
        return g, g.sum(axis=0)

    return _record(out, (a, b), bwd)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    mode = _binary_mode(a, b)
    out = Tensor(a.data - b.data)

    def bwd(g):
        if mode == "same":
            return g, -g
        if mode == "b_scalar":
            return g, _reduce_to(-g, "scalar", b.shape)
        if mode == "a_scalar":
            return _reduce_to(g, "scalar", a.shape), -g
        return g, -g.sum(axis=0)

    return _record(out, (a, b), bwd)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    mode = _binary_mode(a, b)
    if mode == "b_row":
        raise ShapeError(f"mul: unsupported operand shapes {a.shape} and {b.shape}")
    out = Tensor(a.data * b.data)

    def bwd(g):
        ga, gb = g * b.data, g * a.data
        if mode == "b_scalar":
            gb = _reduce_to(gb, "scalar", b.shape)
        elif mode == "a_scalar":
            ga = _reduce_to(ga, "scalar", a.shape)
        return ga, gb

    return _record(out, (a, b), bwd)


def neg(t):
    t = as_tensor(t)
    out = Tensor(-t.data)
    return _record(out, (t,), lambda g: (-g,))


def exp(t):
    t = as_tensor(t)
    out = Tensor(np.exp(t.data))
    return _record(out, (t,), lambda g: (g * out.data,))


def log(t):
    t = as_tensor(t)
    if np.any(t.data <= 0.0):
        raise ValueError("log: operand has non-positive entries")
    out = Tensor(np.log(t.data))
    return _record(out, (t,), lambda g: (g / t.data,))


def relu(t):
    t = as_tensor(t)
    out = Tensor(np.maximum(t.data, 0.0))
    return _record(out, (t,), lambda g: (g * (t.data > 0.0),))


def sigmoid(t):
    t = as_tensor(t)
    out = Tensor(expit(t.data))
    return _record(out, (t,), lambda g: (g * out.data * (1.0 - out.data),))


def square(t):
    t = as_tensor(t)
    out = Tensor(t.data * t.data)
    return _record(out, (t,), lambda g: (2.0 * t.data * g,))


def clamp_min(t, lo):
    """Elementwise max(t, lo); gradient is zero at and below the floor."""
    t = as_tensor(t)
    out = Tensor(np.maximum(t.data, lo))
    return _record(out, (t,), lambda g: (g * (t.data > lo),))


def clip(t, lo, hi):
    """Clamp into [lo, hi]; gradient passes only strictly inside the band."""
    t = as_tensor(t)
    out = Tensor(np.clip(t.data, lo, hi))
    return _record(out, (t,), lambda g: (g * ((t.data > lo) & (t.data < hi)),))


def cols(t, start, stop):
    """Contiguous column slice of a matrix."""
    t = as_tensor(t)
    if t.ndim != 2:
        raise ShapeError(f"cols expects a matrix, got shape {t.shape}")
    out = Tensor(np.ascontiguousarray(t.data[:, start:stop]))

    def bwd(g):
        full = np.zeros_like(t.data)
        full[:, start:stop] = g
        return (full,)

    return _record(out, (t,), bwd)


def _check_axis(t, axis):
    if t.size == 0:
        raise ShapeError("reduction over an empty tensor")
    if axis is not None:
        if not -t.ndim <= axis < t.ndim:
            raise ShapeError(f"axis {axis} out of range for shape {t.shape}")
        if t.shape[axis] == 0:
            raise ShapeError(f"reduction over empty axis {axis}")


def tsum(t, axis=None):
    t = as_tensor(t)
    _check_axis(t, axis)
    out = Tensor(t.data.sum(axis=axis))

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, t.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis), t.shape),)

    return _record(out, (t,), bwd)


def tmean(t, axis=None):
    t = as_tensor(t)
    _check_axis(t, axis)
    n = t.size if axis is None else t.shape[axis]
    out = Tensor(t.data.mean(axis=axis))

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / n, t.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis) / n, t.shape),)

    return _record(out, (t,), bwd)


def logsumexp(t, axis=None):
    """log(sum(exp(t))) computed with max subtraction so large inputs
    neither overflow nor lose the dominant term."""
    t = as_tensor(t)
    _check_axis(t, axis)
    if axis is None:
        m = t.data.max()
        shifted = np.exp(t.data - m)
        total = shifted.sum()
        out = Tensor(m + np.log(total))

        def bwd(g):
            return (g * shifted / total,)

    else:
        m = t.data.max(axis=axis, keepdims=True)
        shifted = np.exp(t.data - m)
        total = shifted.sum(axis=axis, keepdims=True)
        out = Tensor((m + np.log(total)).squeeze(axis=axis))

        def bwd(g):
            return (np.expand_dims(g, axis) * shifted / total,)

    return _record(out, (t,), bwd)


def require_finite(t, context):
    """Raise NumericsError (with a short diagnostic) on NaN/Inf entries."""
    data = t.data if isinstance(t, Tensor) else t
    bad = ~np.isfinite(data)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise NumericsError(
            f"{context}: {int(bad.sum())} non-finite value(s), "
            f"first at index {tuple(int(i) for i in idx)}"
        )
    return t
