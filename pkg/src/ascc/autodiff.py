"""Dense float64 tensors with taped reverse-mode automatic differentiation.

The op set is deliberately small: just enough to express embedding lookups,
convex mixing of word vectors, bag-of-words and convolutional classifiers,
cross-entropy, KL divergence, and entropy regularizers.

Ops executed inside a ``Tape`` context record themselves in execution order,
which is already a topological order of the graph. ``Tape.backward`` replays
the records in reverse and accumulates gradients into every tensor that
requires them. Tapes are rebuilt per forward pass (sentence lengths vary),
and each tape is confined to the thread that created it.
"""

from __future__ import annotations

import threading

import numpy as np

EPS_LOG = 1e-12  # lower clamp for safe_log inputs


class ShapeMismatchError(ValueError):
    """Operand shapes do not conform to an op's contraction/broadcast rules."""


class NonFiniteError(ArithmeticError):
    """An op produced (or would propagate) non-finite values."""


class TapeError(RuntimeError):
    """Tape misuse: no active tape, non-scalar loss, reused tape, ..."""


class Tensor:
    """Dense n-d float64 array, optionally tracked for gradients.

    ``grad`` is lazily allocated the first time a backward pass reaches the
    tensor and accumulates across passes until ``zero_grad``.
    """

    __slots__ = ("values", "requires_grad", "grad")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        return float(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; everything routes through the taped ops below.
    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scalar_mul(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise TypeError("tensor division only supports python scalars")
        return scalar_mul(self, 1.0 / float(other))

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class _Record:
    __slots__ = ("output", "inputs", "backward_fn")

    def __init__(self, output, inputs, backward_fn):
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn


_LOCAL = threading.local()


def _tape_stack() -> list:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of executed ops.

    Records are appended in execution order, so the list is topologically
    sorted by construction; backward walks it in exact reverse order. A tape
    supports a single backward pass; build a fresh graph for the next one.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._done = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise TapeError("tape context exited out of order")
        stack.pop()
        return False

    def __len__(self) -> int:
        return len(self._records)

    def clear(self) -> None:
        """Drop all records, freeing every non-leaf node they reference."""
        self._records.clear()
        self._done = False

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor that
        requires grad and is reachable from ``loss``."""
        if not isinstance(loss, Tensor):
            raise TapeError("backward expects a Tensor loss")
        if loss.values.shape != ():
            raise TapeError(
                f"backward requires a scalar loss, got shape {loss.values.shape}"
            )
        if not self._records:
            raise TapeError("backward on an empty tape")
        if self._done:
            raise TapeError("tape already backpropagated; build a fresh graph")
        if not loss.requires_grad:
            raise TapeError("loss does not depend on any tracked tensor")
        self._done = True
        loss.accumulate_grad(np.ones((), dtype=np.float64))
        for rec in reversed(self._records):
            g = rec.output.grad
            if g is None:
                continue
            for t, p in zip(rec.inputs, rec.backward_fn(g)):
                if p is not None:
                    t.accumulate_grad(p)


def backward(loss: Tensor) -> None:
    """Backward through the innermost active tape."""
    tape = active_tape()
    if tape is None:
        raise TapeError("backward requires an active tape")
    tape.backward(loss)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _finish(op: str, out_values: np.ndarray, inputs: tuple, backward_fn) -> Tensor:
    if not np.isfinite(out_values).all():
        raise NonFiniteError(f"{op}: produced non-finite values")
    out = Tensor(out_values)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape._records.append(_Record(out, inputs, backward_fn))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# Primitive ops


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        out = a.values + b.values
    except ValueError:
        raise ShapeMismatchError(f"add: cannot broadcast {a.shape} with {b.shape}")

    def backward_fn(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )

    return _finish("add", out, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        out = a.values - b.values
    except ValueError:
        raise ShapeMismatchError(f"sub: cannot broadcast {a.shape} with {b.shape}")

    def backward_fn(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(-g, b.shape) if b.requires_grad else None,
        )

    return _finish("sub", out, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        out = a.values * b.values
    except ValueError:
        raise ShapeMismatchError(f"mul: cannot broadcast {a.shape} with {b.shape}")
    av, bv = a.values, b.values

    def backward_fn(g):
        return (
            _unbroadcast(g * bv, a.shape) if a.requires_grad else None,
            _unbroadcast(g * av, b.shape) if b.requires_grad else None,
        )

    return _finish("mul", out, (a, b), backward_fn)


def scalar_mul(a: Tensor, c: float) -> Tensor:
    a = _lift(a)
    c = float(c)

    def backward_fn(g):
        return (g * c if a.requires_grad else None,)

    return _finish("scalar_mul", a.values * c, (a,), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeMismatchError(
            f"matmul: expects 2-d operands, got {a.shape} and {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"matmul: inner dimensions differ, {a.shape} @ {b.shape}"
        )
    av, bv = a.values, b.values

    def backward_fn(g):
        return (
            g @ bv.T if a.requires_grad else None,
            av.T @ g if b.requires_grad else None,
        )

    return _finish("matmul", av @ bv, (a, b), backward_fn)


def relu(a: Tensor) -> Tensor:
    a = _lift(a)
    av = a.values

    def backward_fn(g):
        return (np.where(av > 0, g, 0.0) if a.requires_grad else None,)

    return _finish("relu", np.maximum(av, 0.0), (a,), backward_fn)


def tanh(a: Tensor) -> Tensor:
    a = _lift(a)
    out = np.tanh(a.values)

    def backward_fn(g):
        return (g * (1.0 - out * out) if a.requires_grad else None,)

    return _finish("tanh", out, (a,), backward_fn)


def exp(a: Tensor) -> Tensor:
    a = _lift(a)
    out = np.exp(a.values)

    def backward_fn(g):
        return (g * out if a.requires_grad else None,)

    return _finish("exp", out, (a,), backward_fn)


def safe_log(a: Tensor) -> Tensor:
    """log of the input clamped below at EPS_LOG; gradient is zero in the
    clamped region (the clamp is flat there)."""
    a = _lift(a)
    clamped = np.maximum(a.values, EPS_LOG)
    inside = a.values >= EPS_LOG

    def backward_fn(g):
        return (np.where(inside, g / clamped, 0.0) if a.requires_grad else None,)

    return _finish("safe_log", np.log(clamped), (a,), backward_fn)


def sum(a: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001 - numpy-style name
    a = _lift(a)
    shape = a.shape
    out = a.values.sum(axis=axis)

    def backward_fn(g):
        if not a.requires_grad:
            return (None,)
        if axis is None:
            return (np.broadcast_to(g, shape),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape),)

    return _finish("sum", out, (a,), backward_fn)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    a = _lift(a)
    shape = a.shape
    n = a.values.size if axis is None else shape[axis]
    out = a.values.mean(axis=axis)

    def backward_fn(g):
        if not a.requires_grad:
            return (None,)
        if axis is None:
            return (np.broadcast_to(g / n, shape),)
        return (np.broadcast_to(np.expand_dims(g / n, axis), shape),)

    return _finish("mean", out, (a,), backward_fn)


def max_over_axis(a: Tensor, axis: int) -> Tensor:
    """Maximum along one axis; gradient routes to the first argmax (ties
    broken by lowest index for determinism)."""
    a = _lift(a)
    av = a.values
    if av.ndim == 0:
        raise ShapeMismatchError("max_over_axis: scalar input has no axes")
    out = av.max(axis=axis)
    idx = np.expand_dims(av.argmax(axis=axis), axis)

    def backward_fn(g):
        if not a.requires_grad:
            return (None,)
        buf = np.zeros_like(av)
        np.put_along_axis(buf, idx, np.expand_dims(g, axis), axis)
        return (buf,)

    return _finish("max_over_axis", out, (a,), backward_fn)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = tuple(_lift(t) for t in tensors)
    if not tensors:
        raise ShapeMismatchError("concat: needs at least one input")
    try:
        out = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatchError(f"concat: {e}")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def backward_fn(g):
        parts = np.split(g, offsets, axis=axis)
        return tuple(
            p if t.requires_grad else None for t, p in zip(tensors, parts)
        )

    return _finish("concat", out, tensors, backward_fn)


def reshape(a: Tensor, shape) -> Tensor:
    a = _lift(a)
    old = a.shape
    try:
        out = a.values.reshape(shape)
    except ValueError:
        raise ShapeMismatchError(
            f"reshape: cannot view {old} (size {a.size}) as {tuple(shape)}"
        )

    def backward_fn(g):
        return (g.reshape(old) if a.requires_grad else None,)

    return _finish("reshape", out, (a,), backward_fn)


def row_softmax(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along the last axis.

    ``mask`` (boolean, same shape) marks the valid slots: masked-out entries
    behave as minus-infinity logits and come out exactly zero, so they carry
    no probability mass and receive no gradient. Every row needs at least one
    valid slot.
    """
    a = _lift(a)
    x = a.values
    if x.ndim == 0:
        raise ShapeMismatchError("row_softmax: scalar input has no rows")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeMismatchError(
                f"row_softmax: mask shape {mask.shape} differs from input {x.shape}"
            )
        if not mask.any(axis=-1).all():
            raise ShapeMismatchError("row_softmax: a row has no unmasked slot")
        x = np.where(mask, x, -np.inf)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)  # exp(-inf) underflows to exactly 0
    s = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        if not a.requires_grad:
            return (None,)
        dot = (g * s).sum(axis=-1, keepdims=True)
        return (s * (g - dot),)

    return _finish("row_softmax", s, (a,), backward_fn)


def gather_rows(a: Tensor, indices) -> Tensor:
    """Select rows of a 2-d tensor; duplicate indices accumulate gradient."""
    a = _lift(a)
    if a.values.ndim != 2:
        raise ShapeMismatchError(f"gather_rows: expects a 2-d tensor, got {a.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeMismatchError("gather_rows: indices must be 1-d")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeMismatchError(
            f"gather_rows: index out of range for {a.shape[0]} rows"
        )

    def backward_fn(g):
        if not a.requires_grad:
            return (None,)
        buf = np.zeros_like(a.values)
        np.add.at(buf, idx, g)
        return (buf,)

    return _finish("gather_rows", a.values[idx], (a,), backward_fn)


_OP_TABLE = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "sub": sub,
    "scalar_mul": scalar_mul,
    "relu": relu,
    "tanh": tanh,
    "exp": exp,
    "safe_log": safe_log,
    "sum": sum,
    "mean": mean,
    "max_over_axis": max_over_axis,
    "concat": concat,
    "reshape": reshape,
    "row_softmax": row_softmax,
    "gather_rows": gather_rows,
}


def forward_op(op: str, *inputs, **kwargs) -> Tensor:
    """Dispatch-style entry point over the primitive op table."""
    try:
        fn = _OP_TABLE[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}; known: {sorted(_OP_TABLE)}")
    return fn(*inputs, **kwargs)
