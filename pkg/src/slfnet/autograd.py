"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every numeric value in the package flows through :class:`Tensor`.  Ops
executed while a :class:`ComputationRecord` is active append one entry
each; replaying the record in reverse yields gradients for any set of
named parameters.  With no active record the same ops run as plain
forward computation, which is what decoding and evaluation use.

Shape discipline is strict: elementwise ops require identical shapes,
the only broadcasting allowed is scalar-with-tensor, and every other
alignment (column repeats, gathers, stacks) is an explicit op.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ContractError, DimensionError, DomainError

Array = np.ndarray

_tls = threading.local()


def _active_record():
    return getattr(_tls, "record", None)


class Tensor:
    """n-dimensional array of 64-bit floats, row-major.

    Tensors are values: ops never modify an existing tensor's buffer.
    Optimizers replace the whole ``data`` attribute between steps, which
    is safe because gradient closures capture the forward-time arrays.
    """

    __slots__ = ("data",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=np.float64)
        # ascontiguousarray would promote 0-d scalars to 1-D; avoid it
        # unless the layout actually needs fixing.
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


@dataclass
class TapeEntry:
    """One executed primitive: the output it produced, the input tensors,
    and a closure mapping d(loss)/d(output) to per-input gradients."""

    out: Tensor
    inputs: tuple[Tensor, ...]
    grad_fn: Callable[[Array], tuple]


class ComputationRecord:
    """Execution-ordered log of primitive ops for one logical thread.

    The list is topological by construction (an op's inputs exist before
    the op runs), so a single reverse sweep visits each entry once.
    """

    def __init__(self):
        self.ops: list[TapeEntry] = []

    def __enter__(self) -> "ComputationRecord":
        stack = getattr(_tls, "stack", None)
        if stack is None:
            stack = _tls.stack = []
        stack.append(self)
        _tls.record = self
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tls.stack
        stack.pop()
        _tls.record = stack[-1] if stack else None
        return False

    def __len__(self) -> int:
        return len(self.ops)


def record_op(out_data: Array, inputs: tuple[Tensor, ...], grad_fn) -> Tensor:
    """Wrap ``out_data`` in a Tensor and log the op on the active record.

    Extension point for fused primitives defined outside this module
    (the LSTM kernels use it)."""
    out = Tensor(out_data)
    rec = _active_record()
    if rec is not None:
        rec.ops.append(TapeEntry(out, inputs, grad_fn))
    return out


def backward(loss: Tensor, record: ComputationRecord,
             params: Mapping[str, Tensor]) -> dict[str, Array]:
    """Gradients of a scalar loss for every named parameter.

    Parameters that do not lie on any path to the loss get a zero
    gradient of their own shape.
    """
    if loss.shape != ():
        raise ContractError(
            f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, Array] = {id(loss): np.ones(())}
    for entry in reversed(record.ops):
        g = grads.pop(id(entry.out), None)
        if g is None:
            continue
        input_grads = entry.grad_fn(g)
        for t, gi in zip(entry.inputs, input_grads):
            if gi is None:
                continue
            acc = grads.get(id(t))
            grads[id(t)] = gi if acc is None else acc + gi
    return {
        name: np.asarray(grads.get(id(p), np.zeros_like(p.data)))
        for name, p in params.items()
    }


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _pair_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape or a.shape == () or b.shape == ():
        return
    raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ "
                         "and neither is a scalar")


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    # Only scalar-vs-tensor broadcasting exists, so either shapes match
    # or the target is a scalar.
    if shape == () and g.shape != ():
        return np.sum(g)
    return g


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _pair_shapes(a, b, "add")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return _unbroadcast(g, ad.shape), _unbroadcast(g, bd.shape)

    return record_op(ad + bd, (a, b), grad_fn)


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _pair_shapes(a, b, "sub")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return _unbroadcast(g, ad.shape), _unbroadcast(-g, bd.shape)

    return record_op(ad - bd, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _pair_shapes(a, b, "mul")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return record_op(ad * bd, (a, b), grad_fn)


def neg(a) -> Tensor:
    a = _coerce(a)

    def grad_fn(g):
        return (-g,)

    return record_op(-a.data, (a,), grad_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the 1-D/2-D shape combinations.

    (m,k)@(k,n), (m,k)@(k,), (k,)@(k,n) and (k,)@(k,) are supported;
    anything else is a dimension error naming both shapes.
    """
    a, b = _coerce(a), _coerce(b)
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise DimensionError(
            f"matmul: operands must be 1-D or 2-D, got {a.shape} and {b.shape}")
    inner_a = ad.shape[-1]
    inner_b = bd.shape[0]
    if inner_a != inner_b:
        raise DimensionError(
            f"matmul: inner dimensions disagree for shapes {a.shape} "
            f"and {b.shape}")

    def grad_fn(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if ad.ndim == 2 and bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        if ad.ndim == 1 and bd.ndim == 2:
            return bd @ g, np.outer(ad, g)
        return g * bd, g * ad

    return record_op(ad @ bd, (a, b), grad_fn)


def _stable_sigmoid(x: Array) -> Array:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = _coerce(a)
    out = _stable_sigmoid(np.atleast_1d(a.data)).reshape(a.shape)

    def grad_fn(g):
        return (g * out * (1.0 - out),)

    return record_op(out, (a,), grad_fn)


def tanh(a) -> Tensor:
    a = _coerce(a)
    out = np.tanh(a.data)

    def grad_fn(g):
        return (g * (1.0 - out * out),)

    return record_op(out, (a,), grad_fn)


def exp(a) -> Tensor:
    a = _coerce(a)
    out = np.exp(a.data)

    def grad_fn(g):
        return (g * out,)

    return record_op(out, (a,), grad_fn)


def log(a) -> Tensor:
    """Natural log; defined for strictly positive inputs."""
    a = _coerce(a)
    ad = a.data

    def grad_fn(g):
        return (g / ad,)

    return record_op(np.log(ad), (a,), grad_fn)


def softmax(v: Tensor) -> Tensor:
    """Stable softmax of a 1-D tensor (max subtraction before exp)."""
    v = _coerce(v)
    if v.data.ndim != 1:
        raise DimensionError(f"softmax expects a 1-D tensor, got {v.shape}")
    if v.size == 0:
        raise DomainError("softmax of an empty vector is undefined")
    shifted = v.data - np.max(v.data)
    e = np.exp(shifted)
    out = e / np.sum(e)

    def grad_fn(g):
        return (out * (g - np.dot(g, out)),)

    return record_op(out, (v,), grad_fn)


def softmax_rows(m: Tensor) -> Tensor:
    """Row-wise stable softmax of a 2-D tensor."""
    m = _coerce(m)
    if m.data.ndim != 2:
        raise DimensionError(f"softmax_rows expects 2-D, got {m.shape}")
    if m.data.shape[1] == 0:
        raise DomainError("softmax over zero columns is undefined")
    shifted = m.data - np.max(m.data, axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=1, keepdims=True)

    def grad_fn(g):
        dot = np.sum(g * out, axis=1, keepdims=True)
        return (out * (g - dot),)

    return record_op(out, (m,), grad_fn)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate 1-D or 2-D tensors along ``axis``, preserving order."""
    if len(parts) == 0:
        raise DomainError("concat of zero parts is undefined")
    parts = [_coerce(p) for p in parts]
    ndim = parts[0].data.ndim
    if ndim not in (1, 2) or not 0 <= axis < ndim:
        raise DimensionError(
            f"concat: axis {axis} invalid for {ndim}-D tensors")
    for p in parts[1:]:
        if p.data.ndim != ndim:
            raise DimensionError(
                f"concat: mixed ranks {parts[0].shape} and {p.shape}")
        for d in range(ndim):
            if d != axis and p.shape[d] != parts[0].shape[d]:
                raise DimensionError(
                    f"concat: extents differ off the concat axis: "
                    f"{parts[0].shape} vs {p.shape}")
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        slicer = [slice(None)] * ndim
        outs = []
        for i in range(len(sizes)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            outs.append(g[tuple(slicer)])
        return tuple(outs)

    return record_op(np.concatenate([p.data for p in parts], axis=axis),
                     tuple(parts), grad_fn)


def sum_all(a) -> Tensor:
    a = _coerce(a)
    shape = a.shape

    def grad_fn(g):
        return (np.full(shape, float(g)),)

    return record_op(np.asarray(np.sum(a.data)), (a,), grad_fn)


def mean_all(a) -> Tensor:
    a = _coerce(a)
    shape = a.shape
    n = a.size

    def grad_fn(g):
        return (np.full(shape, float(g) / n),)

    return record_op(np.asarray(np.mean(a.data)), (a,), grad_fn)


def transpose(a: Tensor) -> Tensor:
    a = _coerce(a)
    if a.data.ndim != 2:
        raise DimensionError(f"transpose expects 2-D, got {a.shape}")

    def grad_fn(g):
        return (g.T,)

    return record_op(a.data.T, (a,), grad_fn)


def ravel(a: Tensor) -> Tensor:
    a = _coerce(a)
    shape = a.shape

    def grad_fn(g):
        return (g.reshape(shape),)

    return record_op(a.data.reshape(-1), (a,), grad_fn)


def col(a: Tensor, i: int) -> Tensor:
    """Column ``i`` of a 2-D tensor as a 1-D tensor."""
    a = _coerce(a)
    if a.data.ndim != 2:
        raise DimensionError(f"col expects 2-D, got {a.shape}")
    shape = a.shape

    def grad_fn(g):
        z = np.zeros(shape)
        z[:, i] = g
        return (z,)

    return record_op(a.data[:, i].copy(), (a,), grad_fn)


def gather_cols(a: Tensor, indices: Sequence[int]) -> Tensor:
    """Select columns by index (repeats allowed); gradient scatter-adds."""
    a = _coerce(a)
    if a.data.ndim != 2:
        raise DimensionError(f"gather_cols expects 2-D, got {a.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    shape = a.shape

    def grad_fn(g):
        z = np.zeros(shape)
        np.add.at(z.T, idx, g.T)
        return (z,)

    return record_op(a.data[:, idx], (a,), grad_fn)


def stack_cols(vectors: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length as the columns of a 2-D tensor."""
    if len(vectors) == 0:
        raise DomainError("stack_cols of zero vectors is undefined")
    vectors = [_coerce(v) for v in vectors]
    n = vectors[0].size
    for v in vectors:
        if v.data.ndim != 1 or v.size != n:
            raise DimensionError(
                f"stack_cols: all parts must be 1-D of length {n}, "
                f"got {v.shape}")

    def grad_fn(g):
        return tuple(g[:, j].copy() for j in range(len(vectors)))

    return record_op(np.stack([v.data for v in vectors], axis=1),
                     tuple(vectors), grad_fn)


def repeat_col(v: Tensor, n: int) -> Tensor:
    """Tile a 1-D tensor as ``n`` identical columns (explicit broadcast)."""
    v = _coerce(v)
    if v.data.ndim != 1:
        raise DimensionError(f"repeat_col expects 1-D, got {v.shape}")

    def grad_fn(g):
        return (np.sum(g, axis=1),)

    return record_op(np.repeat(v.data[:, None], n, axis=1), (v,), grad_fn)


def embedding_cols(table: Tensor, indices: Sequence[int]) -> Tensor:
    """Rows of a (V, d) table, transposed to a (d, L) column matrix."""
    table = _coerce(table)
    if table.data.ndim != 2:
        raise DimensionError(f"embedding_cols expects 2-D, got {table.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    shape = table.shape

    def grad_fn(g):
        z = np.zeros(shape)
        np.add.at(z, idx, g.T)
        return (z,)

    return record_op(np.ascontiguousarray(table.data[idx, :].T),
                     (table,), grad_fn)


def element(a: Tensor, index) -> Tensor:
    """One entry of a tensor as a scalar tensor."""
    a = _coerce(a)
    shape = a.shape

    def grad_fn(g):
        z = np.zeros(shape)
        z[index] = g
        return (z,)

    return record_op(np.asarray(a.data[index]), (a,), grad_fn)


def bce_with_logits_mean(logits: Tensor, targets: Array) -> Tensor:
    """Mean binary cross-entropy of 1-D logits against 0/1 targets.

    Computed in the softplus form, which stays finite for any logit.
    """
    logits = _coerce(logits)
    z = logits.data
    y = np.asarray(targets, dtype=np.float64)
    if z.ndim != 1 or y.shape != z.shape:
        raise DimensionError(
            f"bce_with_logits_mean: logits {logits.shape} vs targets {y.shape}")
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size

    def grad_fn(g):
        return ((_stable_sigmoid(z) - y) * (float(g) / n),)

    return record_op(np.asarray(np.mean(per)), (logits,), grad_fn)


def cross_entropy_with_scores(scores: Tensor, target: Array) -> Tensor:
    """Cross-entropy between softmax(scores) and a fixed target
    distribution, evaluated through the log-sum-exp form."""
    scores = _coerce(scores)
    s = scores.data
    t = np.asarray(target, dtype=np.float64)
    if s.ndim != 1 or t.shape != s.shape:
        raise DimensionError(
            f"cross_entropy_with_scores: scores {scores.shape} vs "
            f"target {t.shape}")
    m = np.max(s)
    lse = m + np.log(np.sum(np.exp(s - m)))
    out = lse * np.sum(t) - np.dot(t, s)
    probs = np.exp(s - lse)

    def grad_fn(g):
        return ((probs - t) * float(g),)

    return record_op(np.asarray(out), (scores,), grad_fn)


@dataclass
class GradCheckEntry:
    name: str
    max_rel_error: float
    worst_index: int
    analytic_at_worst: float
    numeric_at_worst: float
    passed: bool


@dataclass
class GradCheckReport:
    tolerance: float
    step: float
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    def failures(self) -> list[GradCheckEntry]:
        return sorted((e for e in self.entries if not e.passed),
                      key=lambda e: -e.max_rel_error)


def grad_check(f, params: Mapping[str, Tensor], step: float = 1e-5,
               tolerance: float = 1e-4,
               corrupt: tuple[str, float] | None = None,
               refine: bool = False) -> GradCheckReport:
    """Compare tape gradients of ``f(params)`` against central differences.

    ``f`` must be a deterministic scalar function of the parameter
    tensors (it is evaluated twice up front to verify that).  The
    relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).

    ``refine`` combines the central differences at ``step`` and
    ``step/2`` (Richardson), cancelling the h^2 truncation term.  That
    costs twice the evaluations but lets a step large enough to beat
    cancellation noise stay accurate at high-curvature coordinates.

    ``corrupt`` adds a constant to one parameter's analytic gradient
    before comparison; it exists so the checker's failure path can be
    tested (fault injection), never for real runs.
    """
    if step <= 0:
        raise DomainError("grad_check needs step > 0")
    first = float(f(params).data)
    second = float(f(params).data)
    if first != second:
        raise ContractError(
            "grad_check needs a deterministic function: two evaluations "
            f"returned {first!r} and {second!r}")

    record = ComputationRecord()
    with record:
        loss = f(params)
    analytic = backward(loss, record, params)
    if corrupt is not None:
        name, delta = corrupt
        analytic[name] = analytic[name] + delta

    def central(flat, i, h):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(params).data)
        flat[i] = orig - h
        fm = float(f(params).data)
        flat[i] = orig
        return (fp - fm) / (2.0 * h)

    report = GradCheckReport(tolerance=tolerance, step=step)
    for name, p in params.items():
        flat = p.data.ravel()
        ana = analytic[name].ravel()
        worst = 0.0
        worst_i = 0
        worst_a = worst_n = 0.0
        for i in range(flat.size):
            num = central(flat, i, step)
            if refine:
                num = (4.0 * central(flat, i, step / 2.0) - num) / 3.0
            denom = max(abs(ana[i]), abs(num), 1e-8)
            rel = abs(ana[i] - num) / denom
            if rel > worst:
                worst, worst_i = rel, i
                worst_a, worst_n = float(ana[i]), num
        report.entries.append(GradCheckEntry(
            name=name, max_rel_error=worst, worst_index=worst_i,
            analytic_at_worst=worst_a, numeric_at_worst=worst_n,
            passed=worst <= tolerance))
    return report
