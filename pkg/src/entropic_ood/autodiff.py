"""Minimal reverse-mode differentiation over float64 matrices.

A :class:`Tape` records each primitive as it runs. ``tape.backward(loss)``
walks the record in exact reverse order and accumulates vector-Jacobian
products into ``Var.grad``. Broadcasting is limited to row vectors
(``1 x C``), column vectors (``R x 1``) and scalars (``1 x 1``).

    >>> tape = Tape()
    >>> x = tape.leaf([[1.0, 2.0]])
    >>> y = sum_all(x * x)
    >>> tape.backward(y)
    >>> x.grad.tolist()
    [[2.0, 4.0]]
"""

import numpy as np

from . import numeric
from .errors import NumericalError, ShapeError


class Var:
    __slots__ = ("value", "grad", "tape", "trainable", "name")
    __array_priority__ = 1000

    def __init__(self, value, tape, trainable=True, name=None):
        self.value = value
        self.grad = None
        self.tape = tape
        self.trainable = trainable
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape}, name={self.name!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(self.tape.lift(other)))

    def __rsub__(self, other):
        return add(self.tape.lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a Var is not supported")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(self.tape.lift(other), self)

    @property
    def T(self):
        return transpose(self)


class Tape:
    """Ordered record of primitive applications.

    Not thread-safe; use one tape per forward/backward pass.
    """

    def __init__(self):
        self.ops = []
        self.diagnostics = {"floor_hits": 0}

    def leaf(self, value, name=None):
        return Var(numeric.as_matrix(value, name or "leaf"), self, True, name)

    def constant(self, value, name=None):
        return Var(numeric.as_matrix(value, name or "constant"), self, False, name)

    def lift(self, x):
        if isinstance(x, Var):
            if x.tape is not self:
                raise ValueError("Var belongs to a different tape")
            return x
        return self.constant(np.asarray(x, dtype=np.float64))

    def record(self, value, parents, vjp, name):
        if not np.all(np.isfinite(value)):
            raise NumericalError(f"{name}: produced a non-finite value")
        out = Var(value, self, any(p.trainable for p in parents), name)
        if out.trainable:
            self.ops.append((out, parents, vjp))
        return out

    def backward(self, out):
        if out.value.shape != (1, 1):
            raise ShapeError(f"backward needs a 1x1 output, got {out.value.shape}")
        out.grad = np.ones((1, 1))
        for node, parents, vjp in reversed(self.ops):
            if node.grad is None:
                continue
            grads = vjp(node.grad)
            for p, g in zip(parents, grads):
                if not p.trainable or g is None:
                    continue
                p.grad = g if p.grad is None else p.grad + g


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("at least one argument must be a Var")


def _broadcast_ok(a_shape, b_shape):
    rb, cb = b_shape
    ra, ca = a_shape
    return (rb == ra or rb == 1) and (cb == ca or cb == 1)


def _unbroadcast(g, shape):
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _binary_operands(a, b, opname):
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    if not _broadcast_ok(a.shape, b.shape):
        if _broadcast_ok(b.shape, a.shape):
            a, b = b, a
        else:
            raise ShapeError(f"{opname}: incompatible shapes {a.shape} and {b.shape}")
    return tape, a, b


def add(a, b):
    tape, a, b = _binary_operands(a, b, "add")

    def vjp(g):
        return g, _unbroadcast(g, b.shape)

    return tape.record(a.value + b.value, (a, b), vjp, "add")


def mul(a, b):
    tape, a, b = _binary_operands(a, b, "mul")

    def vjp(g):
        return g * b.value, _unbroadcast(g * a.value, b.shape)

    return tape.record(a.value * b.value, (a, b), vjp, "mul")


def neg(a):
    return a.tape.record(-a.value, (a,), lambda g: (-g,), "neg")


def matmul(a, b):
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

    def vjp(g):
        return g @ b.value.T, a.value.T @ g

    return tape.record(a.value @ b.value, (a, b), vjp, "matmul")


def transpose(a):
    return a.tape.record(a.value.T.copy(), (a,), lambda g: (g.T,), "transpose")


def sqrt(a):
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.value)
    return a.tape.record(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def log(a):
    # record() turns -inf/nan into a NumericalError
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.value)
    return a.tape.record(out, (a,), lambda g: (g / a.value,), "log")


def exp(a):
    with np.errstate(over="ignore"):
        out = np.exp(a.value)
    return a.tape.record(out, (a,), lambda g: (g * out,), "exp")


def absolute(a):
    return a.tape.record(np.abs(a.value), (a,), lambda g: (g * np.sign(a.value),), "abs")


def relu(a):
    mask = a.value > 0
    return a.tape.record(a.value * mask, (a,), lambda g: (g * mask,), "relu")


def tanh(a):
    out = np.tanh(a.value)
    return a.tape.record(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def clamp_min(a, floor):
    """``max(a, floor)``; gradient is zero where the floor is active.

    The number of floored entries is added to ``tape.diagnostics['floor_hits']``.
    """
    mask = a.value > floor
    a.tape.diagnostics["floor_hits"] += int(a.value.size - mask.sum())
    return a.tape.record(np.where(mask, a.value, floor), (a,), lambda g: (g * mask,), "clamp_min")


def row_sum(a):
    """Sum across columns: ``B x N -> B x 1``."""
    return a.tape.record(
        a.value.sum(axis=1, keepdims=True),
        (a,),
        lambda g: (np.broadcast_to(g, a.shape).copy(),),
        "row_sum",
    )


def row_mean(a):
    n = a.shape[1]
    return row_sum(a) * (1.0 / n)


def sum_all(a):
    return a.tape.record(
        np.array([[a.value.sum()]]),
        (a,),
        lambda g: (np.full(a.shape, g[0, 0]),),
        "sum_all",
    )


def mean_all(a):
    return sum_all(a) * (1.0 / a.value.size)


def pick(a, index):
    """Select one column per row: ``out[b] = a[b, index[b]]`` as ``B x 1``."""
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (a.shape[0],):
        raise ShapeError(f"pick: need {a.shape[0]} indices, got shape {index.shape}")
    rows = np.arange(a.shape[0])

    def vjp(g):
        out = np.zeros(a.shape)
        out[rows, index] = g[:, 0]
        return (out,)

    return a.tape.record(a.value[rows, index][:, None], (a,), vjp, "pick")


def softmax(a):
    """Row-wise softmax; the probabilities are a standalone node."""
    p = numeric.stable_softmax(a.value)

    def vjp(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return a.tape.record(p, (a,), vjp, "softmax")


def normalize_rows(a):
    """Row-wise ``x / (|x| + 1e-12)``."""
    x = a.value
    r = np.linalg.norm(x, axis=1, keepdims=True)
    s = r + numeric.NORM_EPS

    def vjp(g):
        dot = (x * g).sum(axis=1, keepdims=True)
        safe_r = np.where(r > 0, r, 1.0)
        return (g / s - x * dot / (s * s * safe_r),)

    return a.tape.record(x / s, (a,), vjp, "normalize_rows")


def pairwise_euclidean(features, prototypes):
    """Differentiable ``B x N`` distance matrix (see :func:`numeric.pairwise_euclidean`)."""
    tape = _tape_of(features, prototypes)
    features, prototypes = tape.lift(features), tape.lift(prototypes)
    diff = numeric.pairwise_differences(features.value, prototypes.value)
    dist = np.sqrt(np.einsum("bnf,bnf->bn", diff, diff) + numeric.DIST_EPS)

    def vjp(g):
        w = (g / dist)[:, :, None] * diff
        return w.sum(axis=1), -w.sum(axis=0)

    return tape.record(dist, (features, prototypes), vjp, "pairwise_euclidean")


def finite_diff_check(scalar_fn, params, step=1e-5, floor=1e-8):
    """Compare tape gradients with central differences.

    ``scalar_fn(tape, *vars)`` must build a ``1 x 1`` Var from leaf Vars wrapping
    ``params``. Returns the maximum over all parameter entries of
    ``|a - b| / max(|a|, |b|, floor)``.

    Central differences carry roughly ``eps * |f| / step`` of rounding noise,
    so entries whose true gradient is far below that (saturated softmax rows,
    directions the loss is invariant to) need a larger ``floor``.
    """
    params = [numeric.as_matrix(p).copy() for p in params]
    tape = Tape()
    leaves = [tape.leaf(p) for p in params]
    tape.backward(scalar_fn(tape, *leaves))
    analytic = [np.zeros(p.shape) if v.grad is None else v.grad for p, v in zip(params, leaves)]

    def value_at(values):
        t = Tape()
        out = scalar_fn(t, *[t.leaf(v) for v in values])
        val = float(out.value[0, 0])
        if not np.isfinite(val):
            raise NumericalError("finite_diff_check: non-finite function value")
        return val

    worst = 0.0
    for k, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += step
            minus[k][idx] -= step
            numeric_grad = (value_at(plus) - value_at(minus)) / (2.0 * step)
            a = analytic[k][idx]
            err = abs(a - numeric_grad) / max(abs(a), abs(numeric_grad), floor)
            worst = max(worst, err)
    return worst
