"""Dense float64 reverse-mode autodiff with re-differentiable backward passes.

Every operation records onto the innermost active :class:`Tape`. Backward
rules are written in terms of the same recorded operations, so gradients
produced with ``create_graph=True`` are themselves differentiable, which is
what lets a meta-gradient flow through an unrolled optimizer step.

Shape rules are deliberately narrow: matrices are 2-D, vectors 1-D, scalars
0-D. Elementwise binary ops broadcast only a scalar, a ``(1, m)`` row against
``(n, m)``, or an ``(n, 1)`` column against ``(n, m)``.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError, TapeError


def _tune_allocator():
    # Tape-based training churns many short-lived medium arrays; keeping them
    # on the malloc heap (instead of per-allocation mmap) lets freed blocks be
    # reused without fresh page faults, which dominate on small machines.
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 1 << 29)  # M_MMAP_THRESHOLD
    except Exception:
        pass


_tune_allocator()

_STATE = threading.local()


def _tape_stack():
    stack = getattr(_STATE, "tapes", None)
    if stack is None:
        stack = []
        _STATE.tapes = stack
    return stack


def active_tape():
    """Innermost open tape, or None when nothing is recording."""
    stack = _tape_stack()
    return stack[-1] if stack else None


def _grad_enabled():
    return getattr(_STATE, "grad_enabled", True)


@contextmanager
def no_grad():
    """Suspend recording; values are still computed."""
    prev = _grad_enabled()
    _STATE.grad_enabled = False
    try:
        yield
    finally:
        _STATE.grad_enabled = prev


class Tensor:
    """Dense float64 value, optionally attached to a tape record."""

    __slots__ = ("values", "requires_grad", "node")

    def __init__(self, values, requires_grad=False):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.node = None

    @property
    def shape(self):
        return self.values.shape

    def item(self):
        if self.values.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def detach(self):
        """Copy-free view with no tape connection; contributes zero gradient."""
        out = Tensor(self.values)
        return out

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class TapeRecord:
    """One recorded operation: operands, output, and its local gradient rule."""

    op: str
    inputs: tuple
    output: "Tensor"
    vjp: callable
    recompute: callable
    tape: "Tape"
    index: int


@dataclass
class Tape:
    """Ordered record of operations; a context manager that enables recording.

    Gradients must be taken while the tape is open: on exit every recorded
    output is detached, which breaks the record/tensor reference cycles so
    tape memory is reclaimed immediately by reference counting.
    """

    records: list = field(default_factory=list)

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise TapeError("tape exited out of order")
        stack.pop()
        for rec in self.records:
            rec.output.node = None
        return False

    def replay_values(self):
        """Recompute every record's output from its operands' current values.

        With unchanged inputs the result is bit-for-bit identical to the
        originally recorded forward pass.
        """
        return [rec.recompute() for rec in self.records]


def _attached(t, tape):
    return t.requires_grad or (t.node is not None and t.node.tape is tape)


def _emit(op, out_values, inputs, vjp, recompute):
    out = Tensor(out_values)
    tape = active_tape()
    if tape is None or not _grad_enabled():
        return out
    if not any(_attached(t, tape) for t in inputs):
        return out
    rec = TapeRecord(op, tuple(inputs), out, vjp, recompute, tape, len(tape.records))
    tape.records.append(rec)
    out.node = rec
    out.requires_grad = True
    return out


def grad(output, wrt, create_graph=False):
    """Gradients of a scalar output with respect to each tensor in ``wrt``.

    Tensors not reachable from the output contribute a zero gradient. With
    ``create_graph=True`` the returned gradients are recorded on the active
    tape, so they can be differentiated again.
    """
    if output.values.size != 1:
        raise ContractError(f"grad of non-scalar output with shape {output.shape}")
    if output.node is None:
        raise TapeError("grad of an output that is detached from any tape")
    tape = output.node.tape
    grads = {id(output): Tensor(np.ones_like(output.values))}
    for rec in reversed(tape.records[: output.node.index + 1]):
        g_out = grads.get(id(rec.output))
        if g_out is None:
            continue
        if create_graph:
            input_grads = rec.vjp(g_out)
        else:
            with no_grad():
                input_grads = rec.vjp(g_out)
        for t, g in zip(rec.inputs, input_grads):
            if g is None or not _attached(t, tape):
                continue
            prev = grads.get(id(t))
            if prev is None:
                grads[id(t)] = g
            elif create_graph:
                grads[id(t)] = add(prev, g)
            else:
                grads[id(t)] = Tensor(prev.values + g.values)
    return [grads.get(id(w)) or Tensor(np.zeros_like(w.values)) for w in wrt]


# ---------------------------------------------------------------------------
# elementwise / broadcasting helpers

_BCAST_OPS = ("add", "sub", "mul", "div")


def _check_broadcast(op, a, b):
    sa, sb = a.shape, b.shape
    if sa == sb or sa == () or sb == ():
        return
    if len(sa) == 2 and len(sb) == 2:
        rows_ok = sa[0] == sb[0] or sa[0] == 1 or sb[0] == 1
        cols_ok = sa[1] == sb[1] or sa[1] == 1 or sb[1] == 1
        if rows_ok and cols_ok:
            return
    raise ShapeError(f"{op}: operand shapes {sa} and {sb} do not conform")


def _unbroadcast(g, shape):
    """Reduce a broadcast-shaped gradient back to an operand's shape."""
    if g.shape == shape:
        return g
    if shape == ():
        return reshape(tensor_sum(g), ())
    axes = [i for i in range(len(shape)) if shape[i] == 1 and g.shape[i] != 1]
    out = g
    for ax in axes:
        out = tensor_sum(out, axis=ax, keepdims=True)
    return out


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("add", a, b)
    return _emit(
        "add",
        a.values + b.values,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        lambda: a.values + b.values,
    )


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("sub", a, b)
    return _emit(
        "sub",
        a.values - b.values,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(neg(g), b.shape)),
        lambda: a.values - b.values,
    )


def neg(a):
    a = _as_tensor(a)
    return _emit("neg", -a.values, (a,), lambda g: (neg(g),), lambda: -a.values)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("mul", a, b)
    return _emit(
        "mul",
        a.values * b.values,
        (a, b),
        lambda g: (_unbroadcast(mul(g, b), a.shape), _unbroadcast(mul(g, a), b.shape)),
        lambda: a.values * b.values,
    )


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("div", a, b)
    return _emit(
        "div",
        a.values / b.values,
        (a, b),
        lambda g: (
            _unbroadcast(div(g, b), a.shape),
            _unbroadcast(neg(div(mul(g, a), mul(b, b))), b.shape),
        ),
        lambda: a.values / b.values,
    )


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: operand shapes {a.shape} and {b.shape} do not conform")
    return _emit(
        "matmul",
        a.values @ b.values,
        (a, b),
        lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g)),
        lambda: a.values @ b.values,
    )


def transpose(a):
    a = _as_tensor(a)
    if len(a.shape) != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {a.shape}")
    return _emit("transpose", a.values.T, (a,), lambda g: (transpose(g),), lambda: a.values.T)


def relu(a):
    a = _as_tensor(a)
    mask = Tensor((a.values > 0).astype(np.float64))
    return _emit(
        "relu",
        np.maximum(a.values, 0.0),
        (a,),
        lambda g: (mul(g, mask),),
        lambda: np.maximum(a.values, 0.0),
    )


def _sigmoid_values(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a):
    a = _as_tensor(a)
    out_values = _sigmoid_values(a.values)

    def vjp(g):
        s = vjp.out
        return (mul(g, mul(s, sub(Tensor(1.0), s))),)

    out = _emit("sigmoid", out_values, (a,), vjp, lambda: _sigmoid_values(a.values))
    vjp.out = out
    return out


def log(a):
    a = _as_tensor(a)
    return _emit("log", np.log(a.values), (a,), lambda g: (div(g, a),), lambda: np.log(a.values))


def sqrt(a):
    a = _as_tensor(a)

    def vjp(g):
        return (div(g, mul(Tensor(2.0), vjp.out)),)

    out = _emit("sqrt", np.sqrt(a.values), (a,), vjp, lambda: np.sqrt(a.values))
    vjp.out = out
    return out


def softmax(a):
    """Row-wise softmax of a matrix; each output row sums to 1."""
    a = _as_tensor(a)
    if len(a.shape) != 2:
        raise ShapeError(f"softmax: expected a matrix, got shape {a.shape}")

    def forward(x):
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        s = vjp.out
        inner = tensor_sum(mul(g, s), axis=1, keepdims=True)
        return (mul(s, sub(g, inner)),)

    out = _emit("softmax", forward(a.values), (a,), vjp, lambda: forward(a.values))
    vjp.out = out
    return out


def tensor_sum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    in_shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            kd_shape = list(in_shape)
            kd_shape[axis] = 1
            g = reshape(g, tuple(kd_shape))
        elif axis is None and g.shape != ():
            g = reshape(g, ())
        return (mul(Tensor(np.ones(in_shape)), g),)

    return _emit(
        "sum",
        np.sum(a.values, axis=axis, keepdims=keepdims),
        (a,),
        vjp,
        lambda: np.sum(a.values, axis=axis, keepdims=keepdims),
    )


def tensor_mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    count = a.values.size if axis is None else a.shape[axis]
    if count == 0:
        raise ContractError("mean of an empty tensor")
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def max_over_rows(a):
    """Column-wise max over the rows of a matrix: (n, m) -> (1, m)."""
    a = _as_tensor(a)
    if len(a.shape) != 2 or a.shape[0] == 0:
        raise ShapeError(f"max_over_rows: expected a nonempty matrix, got shape {a.shape}")
    arg = np.argmax(a.values, axis=0)
    indicator = np.zeros_like(a.values)
    indicator[arg, np.arange(a.shape[1])] = 1.0
    ind_t = Tensor(indicator)
    ones_col = Tensor(np.ones((a.shape[0], 1)))
    return _emit(
        "max_over_rows",
        a.values.max(axis=0, keepdims=True),
        (a,),
        lambda g: (mul(ind_t, matmul(ones_col, g)),),
        lambda: a.values.max(axis=0, keepdims=True),
    )


def concat(tensors, axis):
    """Concatenate matrices along axis 0 or 1."""
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: no operands")
    other = 1 - axis
    ref = tensors[0].shape
    for t in tensors:
        if len(t.shape) != 2 or t.shape[other] != ref[other]:
            raise ShapeError(f"concat: operand shapes {ref} and {t.shape} do not conform")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def vjp(g):
        return tuple(narrow(g, axis, int(offsets[i]), sizes[i]) for i in range(len(tensors)))

    return _emit(
        "concat",
        np.concatenate([t.values for t in tensors], axis=axis),
        tuple(tensors),
        vjp,
        lambda: np.concatenate([t.values for t in tensors], axis=axis),
    )


def narrow(a, axis, start, length):
    """Contiguous slice of ``length`` entries along ``axis``."""
    a = _as_tensor(a)
    if len(a.shape) != 2 or start < 0 or start + length > a.shape[axis]:
        raise ShapeError(f"narrow: slice [{start}:{start + length}) invalid for shape {a.shape} axis {axis}")

    def fwd(x):
        return x[:, start : start + length].copy() if axis == 1 else x[start : start + length, :].copy()

    def vjp(g):
        before = list(a.shape)
        before[axis] = start
        after = list(a.shape)
        after[axis] = a.shape[axis] - start - length
        parts = []
        if before[axis] > 0:
            parts.append(Tensor(np.zeros(before)))
        parts.append(g)
        if after[axis] > 0:
            parts.append(Tensor(np.zeros(after)))
        return (concat(parts, axis) if len(parts) > 1 else g,)

    return _emit("narrow", fwd(a.values), (a,), vjp, lambda: fwd(a.values))


def reshape(a, shape):
    a = _as_tensor(a)
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != a.values.size:
        raise ShapeError(f"reshape: cannot view shape {a.shape} as {shape}")
    in_shape = a.shape
    return _emit(
        "reshape",
        a.values.reshape(shape),
        (a,),
        lambda g: (reshape(g, in_shape),),
        lambda: a.values.reshape(shape),
    )


def slice_rows(a, rows):
    """Gather rows of a matrix by index; duplicates allowed."""
    a = _as_tensor(a)
    rows = np.asarray(rows, dtype=np.intp)
    if len(a.shape) != 2 or (rows.size and (rows.min() < 0 or rows.max() >= a.shape[0])):
        raise ShapeError(f"slice_rows: indices invalid for shape {a.shape}")
    n = a.shape[0]
    return _emit(
        "slice_rows",
        a.values[rows],
        (a,),
        lambda g: (scatter_rows(g, rows, n),),
        lambda: a.values[rows],
    )


def scatter_rows(a, rows, n_rows):
    """Scatter-add rows into a zero matrix with ``n_rows`` rows."""
    a = _as_tensor(a)
    rows = np.asarray(rows, dtype=np.intp)
    if len(a.shape) != 2 or rows.shape != (a.shape[0],):
        raise ShapeError(f"scatter_rows: {rows.shape} indices for shape {a.shape}")
    unique = np.unique(rows).size == rows.size  # direct assignment is much faster than add.at

    def fwd(x):
        out = np.zeros((n_rows, x.shape[1]))
        if unique:
            out[rows] = x
        else:
            np.add.at(out, rows, x)
        return out

    return _emit("scatter_rows", fwd(a.values), (a,), lambda g: (slice_rows(g, rows),), lambda: fwd(a.values))


def submatrix(a, rows, cols=None):
    """Gather a sub-block ``a[rows][:, cols]``; ``cols=None`` keeps all columns."""
    a = _as_tensor(a)
    rows = np.asarray(rows, dtype=np.intp)
    if cols is None:
        return slice_rows(a, rows)
    cols = np.asarray(cols, dtype=np.intp)
    shape = a.shape

    def fwd(x):
        return x[np.ix_(rows, cols)]

    return _emit(
        "submatrix",
        fwd(a.values),
        (a,),
        lambda g: (scatter_submatrix(g, rows, cols, shape),),
        lambda: fwd(a.values),
    )


def scatter_submatrix(a, rows, cols, shape):
    a = _as_tensor(a)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    if a.shape != (rows.size, cols.size):
        raise ShapeError(f"scatter_submatrix: block shape {a.shape} vs {rows.size}x{cols.size} indices")
    unique = np.unique(rows).size == rows.size and np.unique(cols).size == cols.size

    def fwd(x):
        out = np.zeros(shape)
        if unique:
            out[np.ix_(rows, cols)] = x
        else:
            np.add.at(out, np.ix_(rows, cols), x)
        return out

    return _emit(
        "scatter_submatrix",
        fwd(a.values),
        (a,),
        lambda g: (submatrix(g, rows, cols),),
        lambda: fwd(a.values),
    )


def edges_to_matrix(params, pairs, n):
    """Scatter per-edge parameters symmetrically into an n-by-n matrix.

    ``pairs`` is a sequence of undirected edges (i, j) with i != j; entry k of
    ``params`` lands at both (i, j) and (j, i), which is how one shared weight
    per undirected edge is realized.
    """
    params = _as_tensor(params)
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    if params.shape != (pairs.shape[0],):
        raise ShapeError(f"edges_to_matrix: {params.shape} params for {pairs.shape[0]} edges")

    def fwd(x):
        out = np.zeros((n, n))
        out[pairs[:, 0], pairs[:, 1]] = x
        out[pairs[:, 1], pairs[:, 0]] = x
        return out

    return _emit(
        "edges_to_matrix",
        fwd(params.values),
        (params,),
        lambda g: (matrix_to_edges(g, pairs),),
        lambda: fwd(params.values),
    )


def matrix_to_edges(m, pairs):
    """Gather m[i, j] + m[j, i] for each undirected edge (i, j)."""
    m = _as_tensor(m)
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    if len(m.shape) != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"matrix_to_edges: expected square matrix, got {m.shape}")
    n = m.shape[0]

    def fwd(x):
        return x[pairs[:, 0], pairs[:, 1]] + x[pairs[:, 1], pairs[:, 0]]

    return _emit(
        "matrix_to_edges",
        fwd(m.values),
        (m,),
        lambda g: (edges_to_matrix(g, pairs, n),),
        lambda: fwd(m.values),
    )


def repeat_rows(a, counts):
    """Repeat row g of a (G, m) matrix counts[g] times."""
    a = _as_tensor(a)
    counts = np.asarray(counts, dtype=np.intp)
    if len(a.shape) != 2 or counts.shape != (a.shape[0],):
        raise ShapeError(f"repeat_rows: {counts.shape} counts for shape {a.shape}")
    return _emit(
        "repeat_rows",
        np.repeat(a.values, counts, axis=0),
        (a,),
        lambda g: (segment_sum_rows(g, counts),),
        lambda: np.repeat(a.values, counts, axis=0),
    )


def segment_sum_rows(a, counts):
    """Sum consecutive row segments of sizes ``counts``: (sum c, m) -> (G, m)."""
    a = _as_tensor(a)
    counts = np.asarray(counts, dtype=np.intp)
    if len(a.shape) != 2 or counts.sum() != a.shape[0] or (counts <= 0).any():
        raise ShapeError(f"segment_sum_rows: invalid counts for shape {a.shape}")
    bounds = np.concatenate([[0], np.cumsum(counts)])

    def fwd(x):
        return np.add.reduceat(x, bounds[:-1], axis=0) if len(counts) else np.zeros((0, x.shape[1]))

    return _emit("segment_sum_rows", fwd(a.values), (a,), lambda g: (repeat_rows(g, counts),), lambda: fwd(a.values))


def segment_max_rows(a, counts):
    """Max over consecutive row segments of sizes ``counts`` (all nonempty)."""
    a = _as_tensor(a)
    counts = np.asarray(counts, dtype=np.intp)
    if len(a.shape) != 2 or counts.sum() != a.shape[0] or (counts <= 0).any():
        raise ShapeError(f"segment_max_rows: invalid counts for shape {a.shape}")
    bounds = np.concatenate([[0], np.cumsum(counts)])
    indicator = np.zeros_like(a.values)
    for g_idx in range(len(counts)):
        block = a.values[bounds[g_idx] : bounds[g_idx + 1]]
        arg = np.argmax(block, axis=0)
        indicator[bounds[g_idx] + arg, np.arange(a.shape[1])] = 1.0
    ind_t = Tensor(indicator)

    def fwd(x):
        return np.maximum.reduceat(x, bounds[:-1], axis=0)

    return _emit(
        "segment_max_rows",
        fwd(a.values),
        (a,),
        lambda g: (mul(ind_t, repeat_rows(g, counts)),),
        lambda: fwd(a.values),
    )


def segment_mean_rows(a, counts):
    counts = np.asarray(counts, dtype=np.intp)
    inv = Tensor((1.0 / counts).reshape(-1, 1))
    return mul(segment_sum_rows(a, counts), inv)


def block_diag_matmul(blocks, a, counts):
    """Multiply constant square blocks against row segments of ``a``.

    Equivalent to ``block_diag(*blocks) @ a`` without materializing the big
    matrix. The blocks are constants: no gradient flows into them. When every
    block has the same size the product runs as one stacked 3-D matmul;
    pass a pre-stacked (G, k, k) array for ``blocks`` to reuse that stack.
    """
    a = _as_tensor(a)
    counts = np.asarray(counts, dtype=np.intp)
    if len(a.shape) != 2 or counts.sum() != a.shape[0] or len(blocks) != len(counts):
        raise ShapeError(f"block_diag_matmul: counts {counts.sum()} blocks {len(blocks)} vs shape {a.shape}")
    bounds = np.concatenate([[0], np.cumsum(counts)])
    stacked = None
    if isinstance(blocks, np.ndarray) and blocks.ndim == 3:
        stacked = blocks
    elif len(counts) and (counts == counts[0]).all():
        stacked = np.stack(blocks)

    if stacked is not None:
        k = int(counts[0]) if len(counts) else 0

        def apply(mats, x):
            g_count = len(counts)
            return np.matmul(mats, x.reshape(g_count, k, x.shape[1])).reshape(x.shape[0], x.shape[1])

        def vjp(g):
            return (block_diag_matmul(stacked.transpose(0, 2, 1), g, counts),)

        return _emit(
            "block_diag_matmul", apply(stacked, a.values), (a,), vjp, lambda: apply(stacked, a.values)
        )

    def apply(mats, x):
        out = np.empty_like(x)
        for i, m in enumerate(mats):
            out[bounds[i] : bounds[i + 1]] = m @ x[bounds[i] : bounds[i + 1]]
        return out

    transposed = None

    def vjp(g):
        nonlocal transposed
        if transposed is None:
            transposed = [m.T for m in blocks]
        return (block_diag_matmul(transposed, g, counts),)

    return _emit("block_diag_matmul", apply(blocks, a.values), (a,), vjp, lambda: apply(blocks, a.values))


# ---------------------------------------------------------------------------
# optimizer steps


def sgd_step_differentiable(params, grads, step_size):
    """One plain gradient step returning new tape-attached tensors.

    The originals are untouched; differentiating through the returned tensors
    reaches back to both the parameters and the gradients.
    """
    if len(params) != len(grads):
        raise ShapeError(f"sgd step: {len(params)} params vs {len(grads)} grads")
    out = []
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"sgd step: param shape {p.shape} vs grad shape {g.shape}")
        out.append(sub(p, mul(g, float(step_size))))
    return out


@dataclass
class AdamState:
    """Per-parameter Adam accumulators. Not differentiable through."""

    step_size: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: list = None
    v: list = None
    t: int = 0

    @classmethod
    def for_params(cls, params, step_size, beta1=0.9, beta2=0.999, eps=1e-8):
        state = cls(step_size=step_size, beta1=beta1, beta2=beta2, eps=eps)
        state.m = [np.zeros_like(p.values) for p in params]
        state.v = [np.zeros_like(p.values) for p in params]
        return state


def adam_step(state, params, grads):
    """Standard Adam update applied in place to ``params`` values.

    Only valid for leaf tensors between tapes; nothing is recorded, so no
    gradient can flow through this update.
    """
    if state.m is None or state.v is None:
        raise ContractError("adam_step: state not initialized; use AdamState.for_params")
    if len(state.m) != len(params) or len(params) != len(grads):
        raise ShapeError(f"adam_step: {len(params)} params vs {len(grads)} grads vs state {len(state.m)}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        gv = g.values if isinstance(g, Tensor) else np.asarray(g, dtype=np.float64)
        if state.m[i].shape != p.values.shape or gv.shape != p.values.shape:
            raise ShapeError(f"adam_step: param shape {p.values.shape} vs grad shape {gv.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * gv
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * gv * gv
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.values -= state.step_size * m_hat / (np.sqrt(v_hat) + state.eps)
    return params
