"""Dense float64 tensors with taped reverse-mode gradients.

Every primitive the encoder and loss need is implemented here with its exact
analytic backward rule, recorded as a closure on a Tape that is replayed in
reverse.  The tape is rebuilt each training step; there is no graph pruning,
an op whose output never reaches the loss simply back-propagates zeros.
All values are float64 and single-threaded execution is bit-reproducible.
"""
from __future__ import annotations

import numpy as np

from .errors import DataError

NORM_EPS = 1e-12


class SegmentSpec:
    """Offsets delimiting variable-length segments over a flat axis."""

    def __init__(self, offsets):
        offsets = np.asarray(offsets, dtype=np.int64)
        if offsets.ndim != 1 or len(offsets) == 0 or offsets[0] != 0:
            raise DataError("segment offsets must be 1-D and start at 0")
        if np.any(np.diff(offsets) < 0):
            raise DataError("segment offsets must be non-decreasing")
        self.offsets = offsets

    @classmethod
    def from_lengths(cls, lengths):
        offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
        np.cumsum(np.asarray(lengths, dtype=np.int64), out=offsets[1:])
        return cls(offsets)

    @property
    def count(self) -> int:
        return len(self.offsets) - 1

    @property
    def total(self) -> int:
        return int(self.offsets[-1])

    @property
    def starts(self) -> np.ndarray:
        return self.offsets[:-1]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def check_covers(self, flat_length, allow_empty=True):
        if self.total != flat_length:
            raise DataError(
                f"segments cover {self.total} elements, tensor has {flat_length}"
            )
        if not allow_empty and np.any(self.lengths == 0):
            empty = int(np.flatnonzero(self.lengths == 0)[0])
            raise DataError(f"segment {empty} is empty")


class Tensor:
    """A float64 array plus an optional gradient buffer of identical shape."""

    __slots__ = ("values", "grad", "tape")

    def __init__(self, values, tape=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.tape = tape
        self.grad = np.zeros_like(self.values) if tape is not None else None

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    def item(self) -> float:
        return float(self.values)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, taped={self.tape is not None})"


class Tape:
    """Recorded operation sequence; backward() replays it in reverse."""

    def __init__(self):
        self._ops = []

    def leaf(self, values) -> Tensor:
        return Tensor(values, tape=self)

    def record(self, backward_fn):
        self._ops.append(backward_fn)

    def backward(self, out: Tensor):
        if out.tape is not self:
            raise DataError("output tensor does not belong to this tape")
        if out.values.shape != ():
            raise DataError("backward requires a scalar output")
        out.grad[...] = 1.0
        for op in reversed(self._ops):
            op()


def constant(values) -> Tensor:
    return Tensor(values)


def _tape_of(*tensors):
    for t in tensors:
        if t.tape is not None:
            return t.tape
    return None


def _make(values, tape) -> Tensor:
    return Tensor(values, tape=tape)


def _accum(t: Tensor, g):
    if t.grad is not None:
        t.grad += g


def _check_same_shape(a: Tensor, b: Tensor, op):
    if a.values.shape != b.values.shape:
        raise DataError(f"{op}: shape mismatch {a.values.shape} vs {b.values.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    tape = _tape_of(a, b)
    out = _make(a.values + b.values, tape)
    if tape:
        def backward():
            _accum(a, out.grad)
            _accum(b, out.grad)
        tape.record(backward)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    tape = _tape_of(a, b)
    out = _make(a.values - b.values, tape)
    if tape:
        def backward():
            _accum(a, out.grad)
            _accum(b, -out.grad)
        tape.record(backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")
    tape = _tape_of(a, b)
    out = _make(a.values * b.values, tape)
    if tape:
        def backward():
            _accum(a, out.grad * b.values)
            _accum(b, out.grad * a.values)
        tape.record(backward)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    tape = a.tape
    out = _make(a.values * c, tape)
    if tape:
        def backward():
            _accum(a, out.grad * c)
        tape.record(backward)
    return out


def add_scalar(a: Tensor, c: float) -> Tensor:
    tape = a.tape
    out = _make(a.values + c, tape)
    if tape:
        def backward():
            _accum(a, out.grad)
        tape.record(backward)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DataError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    tape = _tape_of(a, b)
    out = _make(a.values @ b.values, tape)
    if tape:
        def backward():
            _accum(a, out.grad @ b.values.T)
            _accum(b, a.values.T @ out.grad)
        tape.record(backward)
    return out


def matvec(a: Tensor, v: Tensor) -> Tensor:
    if a.ndim != 2 or v.ndim != 1 or a.shape[1] != v.shape[0]:
        raise DataError(f"matvec: incompatible shapes {a.shape} and {v.shape}")
    tape = _tape_of(a, v)
    out = _make(a.values @ v.values, tape)
    if tape:
        def backward():
            _accum(a, np.outer(out.grad, v.values))
            _accum(v, a.values.T @ out.grad)
        tape.record(backward)
    return out


def dot(u: Tensor, v: Tensor) -> Tensor:
    if u.ndim != 1 or v.ndim != 1:
        raise DataError("dot expects 1-D tensors")
    _check_same_shape(u, v, "dot")
    tape = _tape_of(u, v)
    out = _make(np.dot(u.values, v.values), tape)
    if tape:
        def backward():
            _accum(u, out.grad * v.values)
            _accum(v, out.grad * u.values)
        tape.record(backward)
    return out


def rowwise_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner product of two (n, d) tensors, giving (n,)."""
    _check_same_shape(a, b, "rowwise_dot")
    tape = _tape_of(a, b)
    out = _make(np.einsum("ij,ij->i", a.values, b.values), tape)
    if tape:
        def backward():
            g = out.grad[:, None]
            _accum(a, g * b.values)
            _accum(b, g * a.values)
        tape.record(backward)
    return out


def scale_rows(a: Tensor, s: Tensor) -> Tensor:
    """Multiply each row of (n, d) `a` by the matching entry of (n,) `s`."""
    if a.ndim != 2 or s.ndim != 1 or a.shape[0] != s.shape[0]:
        raise DataError(f"scale_rows: incompatible shapes {a.shape} and {s.shape}")
    tape = _tape_of(a, s)
    out = _make(a.values * s.values[:, None], tape)
    if tape:
        def backward():
            _accum(a, out.grad * s.values[:, None])
            _accum(s, np.einsum("ij,ij->i", out.grad, a.values))
        tape.record(backward)
    return out


def gather_rows(table: Tensor, idx) -> Tensor:
    """Select rows of a (n, d) table; backward scatter-adds with duplicates."""
    idx = np.asarray(idx, dtype=np.int64)
    tape = table.tape
    out = _make(table.values[idx], tape)
    if tape:
        def backward():
            if table.grad is not None:
                np.add.at(table.grad, idx, out.grad)
        tape.record(backward)
    return out


def segment_sum(x: Tensor, segments: SegmentSpec) -> Tensor:
    """Sum contiguous row segments of (total, d) into (count, d)."""
    segments.check_covers(x.shape[0], allow_empty=False)
    tape = x.tape
    out = _make(np.add.reduceat(x.values, segments.starts, axis=0)
                if segments.count else np.zeros((0,) + x.shape[1:]), tape)
    if tape:
        def backward():
            _accum(x, np.repeat(out.grad, segments.lengths, axis=0))
        tape.record(backward)
    return out


def repeat_interleave(x: Tensor, k: int) -> Tensor:
    """Repeat each entry of a 1-D tensor k times."""
    if x.ndim != 1:
        raise DataError("repeat_interleave expects a 1-D tensor")
    tape = x.tape
    out = _make(np.repeat(x.values, k), tape)
    if tape:
        def backward():
            _accum(x, out.grad.reshape(x.shape[0], k).sum(axis=1))
        tape.record(backward)
    return out


def elu(x: Tensor) -> Tensor:
    """Exponential linear unit, alpha = 1: x for x > 0, exp(x) - 1 otherwise."""
    tape = x.tape
    pos = x.values > 0
    out = _make(np.where(pos, x.values, np.expm1(np.minimum(x.values, 0.0))), tape)
    if tape:
        def backward():
            _accum(x, out.grad * np.where(pos, 1.0, np.exp(np.minimum(x.values, 0.0))))
        tape.record(backward)
    return out


def segment_softmax(logits: Tensor, segments: SegmentSpec) -> Tensor:
    """Softmax within each segment, max-shifted for numerical stability."""
    if logits.ndim != 1:
        raise DataError("segment_softmax expects 1-D logits")
    segments.check_covers(logits.shape[0], allow_empty=False)
    tape = logits.tape
    if segments.count == 0:
        return _make(np.zeros(0), tape)
    lengths = segments.lengths
    shifted = logits.values - np.repeat(
        np.maximum.reduceat(logits.values, segments.starts), lengths)
    e = np.exp(shifted)
    y = e / np.repeat(np.add.reduceat(e, segments.starts), lengths)
    out = _make(y, tape)
    if tape:
        def backward():
            gy = out.grad * y
            _accum(logits, gy - y * np.repeat(
                np.add.reduceat(gy, segments.starts), lengths))
        tape.record(backward)
    return out


def l2_normalize(x: Tensor) -> Tensor:
    """Normalize a vector, or each row of a matrix, to unit Euclidean norm."""
    if x.ndim == 1:
        sq = np.dot(x.values, x.values)
        norms = np.sqrt(sq)
        if norms < NORM_EPS:
            raise DataError("cannot normalize near-zero vector")
    elif x.ndim == 2:
        norms = np.sqrt(np.einsum("ij,ij->i", x.values, x.values))
        if np.any(norms < NORM_EPS):
            bad = int(np.flatnonzero(norms < NORM_EPS)[0])
            raise DataError(f"cannot normalize near-zero vector at row {bad}")
        norms = norms[:, None]
    else:
        raise DataError("l2_normalize expects a 1-D or 2-D tensor")
    tape = x.tape
    y = x.values / norms
    out = _make(y, tape)
    if tape:
        def backward():
            if x.ndim == 1:
                proj = np.dot(y, out.grad)
            else:
                proj = np.einsum("ij,ij->i", y, out.grad)[:, None]
            _accum(x, (out.grad - y * proj) / norms)
        tape.record(backward)
    return out


def euclidean_distance(u: Tensor, v: Tensor) -> Tensor:
    """L2 distance of two vectors (scalar) or of paired rows ((n,)); the
    gradient is (u - v)/d, taken as zero where d = 0."""
    _check_same_shape(u, v, "euclidean_distance")
    tape = _tape_of(u, v)
    diff = u.values - v.values
    if u.ndim == 1:
        d = np.sqrt(np.dot(diff, diff))
    elif u.ndim == 2:
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    else:
        raise DataError("euclidean_distance expects 1-D or 2-D tensors")
    out = _make(d, tape)
    if tape:
        def backward():
            if u.ndim == 1:
                gd = out.grad / d * diff if d > 0 else np.zeros_like(diff)
            else:
                safe = np.where(d > 0, d, 1.0)
                gd = (np.where(d > 0, out.grad / safe, 0.0))[:, None] * diff
            _accum(u, gd)
            _accum(v, -gd)
        tape.record(backward)
    return out


def hinge(x: Tensor) -> Tensor:
    """max(x, 0) with subgradient 0 at the kink."""
    tape = x.tape
    pos = x.values > 0
    out = _make(np.where(pos, x.values, 0.0), tape)
    if tape:
        def backward():
            _accum(x, out.grad * pos)
        tape.record(backward)
    return out


def sum_all(x: Tensor) -> Tensor:
    tape = x.tape
    out = _make(x.values.sum(), tape)
    if tape:
        def backward():
            _accum(x, np.full_like(x.values, float(out.grad)))
        tape.record(backward)
    return out


def mean_tensors(tensors) -> Tensor:
    """Elementwise mean of equal-shaped tensors."""
    acc = tensors[0]
    for t in tensors[1:]:
        acc = add(acc, t)
    return scale(acc, 1.0 / len(tensors))


def finite_difference_check(fn, point, epsilon=1e-5) -> float:
    """Compare fn's analytic gradient at `point` against central differences.

    `fn` maps a Tensor to a scalar Tensor.  Returns the max per-coordinate
    relative error |a - n| / max(1e-8, |a| + |n|).  The caller is responsible
    for choosing a point where fn is smooth.
    """
    point = np.asarray(point, dtype=np.float64)
    tape = Tape()
    x = tape.leaf(point)
    tape.backward(fn(x))
    analytic = x.grad.ravel()

    flat = point.ravel()
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + epsilon
        f_plus = fn(constant(bumped.reshape(point.shape))).item()
        bumped[i] = flat[i] - epsilon
        f_minus = fn(constant(bumped.reshape(point.shape))).item()
        numeric[i] = (f_plus - f_minus) / (2.0 * epsilon)

    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
