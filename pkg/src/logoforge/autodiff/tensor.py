"""Dense tensors with taped reverse-mode differentiation.

Every primitive op computes its forward value eagerly with numpy and, when a
GradTape is active, records a vjp closure. The vjp closures are written in
terms of the primitives themselves, so running a backward pass while the tape
is still recording yields gradient tensors that are differentiable again --
that is the whole double-backprop story: the first backward pass is just more
ops on the tape.

Training runs in float32; gradient-check tests construct float64 tensors and
the ops follow the input dtype. Value-creating ops validate finiteness;
pure data-movement ops (reshape, transpose, gather/scatter) cannot create
NaN/Inf and skip the check.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf, which is an error state by contract."""


class Tensor:
    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=np.float32):
        # explicit dtype wins; everything defaults to float32 so training
        # never silently promotes to float64
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # operator sugar; all math goes through the module-level primitives
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other, self)))

    def __rsub__(self, other):
        return add(_as_tensor(other, self), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, pow_const(_as_tensor(other, self), -1.0))

    def __rtruediv__(self, other):
        return mul(_as_tensor(other, self), pow_const(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, c):
        return pow_const(self, c)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)


class OpRecord:
    __slots__ = ("out", "inputs", "vjp", "name")

    def __init__(self, out, inputs, vjp, name):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp
        self.name = name


class GradTape:
    """Ordered record of executed differentiable ops.

    Acts as a context manager; ops executed inside record themselves when any
    input requires grad. Backward walks the records in exact reverse execution
    order, which is a valid topological order because every op's output is
    created before anything that consumes it.
    """

    def __init__(self):
        self.records: list[OpRecord] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def __len__(self):
        return len(self.records)


_TAPES: list[GradTape] = []
_RECORDING = [True]


@contextlib.contextmanager
def no_record():
    """Suspend tape recording (values still computed)."""
    _RECORDING.append(False)
    try:
        yield
    finally:
        _RECORDING.pop()


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def _make(data, name: str) -> Tensor:
    """Wrap an op result, enforcing the everything-finite invariant."""
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by op '{name}'")
    t = Tensor.__new__(Tensor)
    t.data = data
    t.requires_grad = False
    return t


def _move(data) -> Tensor:
    """Wrap the result of a data-movement op (cannot create non-finite values)."""
    t = Tensor.__new__(Tensor)
    t.data = data
    t.requires_grad = False
    return t


def _record(out: Tensor, inputs: Sequence[Tensor], vjp: Callable, name: str):
    if _RECORDING[-1] and _TAPES and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPES[-1].records.append(OpRecord(out, tuple(inputs), vjp, name))
    return out


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _as_tensor(b, a)
    out = _make(a.data + b.data, "add")

    def vjp(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _record(out, (a, b), vjp, "add")


def neg(a: Tensor) -> Tensor:
    out = _move(-a.data)
    return _record(out, (a,), lambda g: (neg(g),), "neg")


def mul(a: Tensor, b) -> Tensor:
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _as_tensor(b, a)
    out = _make(a.data * b.data, "mul")

    def vjp(g):
        return (_unbroadcast(mul(g, b), a.data.shape), _unbroadcast(mul(g, a), b.data.shape))

    return _record(out, (a, b), vjp, "mul")


def pow_const(a: Tensor, c: float) -> Tensor:
    c = float(c)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = _make(a.data ** np.asarray(c, dtype=a.data.dtype), "pow_const")

    def vjp(g):
        return (mul(g, mul(pow_const(a, c - 1.0), c)),)

    return _record(out, (a,), vjp, "pow_const")


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = _make(np.exp(a.data), "exp")
    return _record(out, (a,), lambda g: (mul(g, out),), "exp")


def log(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore", divide="ignore"):
        out = _make(np.log(a.data), "log")
    return _record(out, (a,), lambda g: (mul(g, pow_const(a, -1.0)),), "log")


def tanh(a: Tensor) -> Tensor:
    out = _make(np.tanh(a.data), "tanh")

    def vjp(g):
        return (mul(g, add(1.0, neg(mul(out, out)))),)

    return _record(out, (a,), vjp, "tanh")


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    s = a.data.dtype.type(slope)
    out = _move(np.maximum(a.data, a.data * s) if slope else np.maximum(a.data, 0))

    def vjp(g):
        # piecewise-constant slope mask, treated as a constant in the vjp
        mask = np.where(a.data > 0, a.data.dtype.type(1.0), s)
        return (mul(g, _move(mask)),)

    return _record(out, (a,), vjp, "leaky_relu")


def softplus(a: Tensor) -> Tensor:
    # stable log(1 + exp(x)) = max(x, 0) + log1p(exp(-|x|))
    x = a.data
    out = _make(np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x))), "softplus")

    def vjp(g):
        # d softplus = sigmoid(x), built from tanh for stability
        sig = mul(add(tanh(mul(a, 0.5)), 1.0), 0.5)
        return (mul(g, sig),)

    return _record(out, (a,), vjp, "softplus")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.data.shape} @ {b.data.shape}")
    out = _make(a.data @ b.data, "matmul")

    def vjp(g):
        return (matmul(g, transpose(b)), matmul(transpose(a), g))

    return _record(out, (a, b), vjp, "matmul")


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.data.ndim)))
    axes = tuple(axes)
    out = _move(np.transpose(a.data, axes))
    inv = tuple(np.argsort(axes))
    return _record(out, (a,), lambda g: (transpose(g, inv),), "transpose")


def reshape(a: Tensor, shape) -> Tensor:
    out = _move(a.data.reshape(shape))
    orig = a.data.shape
    return _record(out, (a,), lambda g: (reshape(g, orig),), "reshape")


def broadcast_to(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    out = _move(np.broadcast_to(a.data, shape))
    orig = a.data.shape
    return _record(out, (a,), lambda g: (_unbroadcast(g, orig),), "broadcast_to")


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = _make(a.data.sum(axis=axis, keepdims=keepdims, dtype=a.data.dtype), "sum")
    orig = a.data.shape

    if axis is None:
        axes = tuple(range(a.data.ndim))
    elif isinstance(axis, int):
        axes = (axis % a.data.ndim,)
    else:
        axes = tuple(ax % a.data.ndim for ax in axis)

    def vjp(g):
        if not keepdims:
            kept = list(orig)
            for ax in axes:
                kept[ax] = 1
            g = reshape(g, tuple(kept))
        return (broadcast_to(g, orig),)

    return _record(out, (a,), vjp, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.data.size
    elif isinstance(axis, int):
        n = a.data.shape[axis]
    else:
        n = int(np.prod([a.data.shape[ax] for ax in axis]))
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    out = _move(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def vjp(g):
        return tuple(narrow(g, axis, int(offsets[i]), sizes[i]) for i in range(len(tensors)))

    return _record(out, tensors, vjp, "concat")


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    out = _move(a.data[tuple(idx)])
    total = a.data.shape[axis]

    def vjp(g):
        return (pad_zeros(g, axis, start, total - start - length),)

    return _record(out, (a,), vjp, "narrow")


def pad_zeros(a: Tensor, axis: int, before: int, after: int) -> Tensor:
    widths = [(0, 0)] * a.data.ndim
    widths[axis] = (before, after)
    out = _move(np.pad(a.data, widths))
    length = a.data.shape[axis]

    def vjp(g):
        return (narrow(g, axis, before, length),)

    return _record(out, (a,), vjp, "pad_zeros")


def im2col(x: Tensor, kh: int, kw: int, stride: int, padding: int) -> Tensor:
    """Extract conv windows: (N,C,H,W) -> (N*Ho*Wo, C*kh*kw). Linear gather."""
    n, c, h, w = x.data.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    xp = x.data
    if padding > 0:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (N, C, Ho, Wo, kh, kw)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    out = _move(cols)
    shape = x.data.shape

    def vjp(g):
        return (col2im(g, shape, kh, kw, stride, padding),)

    return _record(out, (x,), vjp, "im2col")


def col2im(cols: Tensor, x_shape, kh: int, kw: int, stride: int, padding: int) -> Tensor:
    """Scatter-add conv windows back: exact adjoint of im2col."""
    n, c, h, w = x_shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if cols.data.shape != (n * ho * wo, c * kh * kw):
        raise ValueError(f"col2im shape mismatch: {cols.data.shape} for target {x_shape}")
    win = cols.data.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    hp, wp = h + 2 * padding, w + 2 * padding
    acc = np.zeros((n, c, hp, wp), dtype=cols.data.dtype)
    for i in range(kh):
        for j in range(kw):
            acc[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += win[:, :, :, :, i, j]
    if padding > 0:
        acc = acc[:, :, padding : padding + h, padding : padding + w]
    out = _move(acc)

    def vjp(g):
        return (im2col(g, kh, kw, stride, padding),)

    return _record(out, (cols,), vjp, "col2im")


def replicate_pad2d(x: Tensor, pad: int) -> Tensor:
    """Edge-replication padding of the two trailing axes."""
    if pad == 0:
        return x
    out = _move(np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="edge"))

    def vjp(g):
        return (replicate_pad2d_adjoint(g, pad),)

    return _record(out, (x,), vjp, "replicate_pad2d")


def replicate_pad2d_adjoint(g: Tensor, pad: int) -> Tensor:
    """Adjoint of replicate_pad2d: fold the replicated borders back in."""
    n, c, hp, wp = g.data.shape
    h, w = hp - 2 * pad, wp - 2 * pad
    a = g.data[:, :, pad : pad + h, :].copy()
    a[:, :, 0, :] += g.data[:, :, :pad, :].sum(axis=2)
    a[:, :, -1, :] += g.data[:, :, pad + h :, :].sum(axis=2)
    b = a[:, :, :, pad : pad + w].copy()
    b[:, :, :, 0] += a[:, :, :, :pad].sum(axis=3)
    b[:, :, :, -1] += a[:, :, :, pad + w :].sum(axis=3)
    out = _move(b)

    def vjp(gg):
        return (replicate_pad2d(gg, pad),)

    return _record(out, (g,), vjp, "replicate_pad2d_adjoint")


def stop_gradient(a: Tensor) -> Tensor:
    return Tensor(a.data.copy())


def _unbroadcast(g: Tensor, shape) -> Tensor:
    """Reduce g back to `shape` after numpy broadcasting (sum over expanded axes)."""
    if g.data.shape == tuple(shape):
        return g
    extra = g.data.ndim - len(shape)
    axes = tuple(range(extra)) + tuple(
        i + extra for i, s in enumerate(shape) if s == 1 and g.data.shape[i + extra] != 1
    )
    r = sum_(g, axis=axes, keepdims=True) if axes else g
    return reshape(r, shape)


# ---------------------------------------------------------------------------
# backward


def backward(output: Tensor, tape: GradTape, wrt: Sequence[Tensor], create_graph: bool = False) -> list[Tensor]:
    """Gradients of a scalar `output` w.r.t. each tensor in `wrt`.

    With create_graph=True the vjp ops are themselves recorded on the active
    tape, so the returned gradients can be differentiated again. Leaves that
    never appear on the tape at all are rejected as detached; leaves touched
    by the tape but unreachable from `output` get zero gradients.
    """
    if output.data.size != 1:
        raise ValueError(f"backward requires a scalar output, got shape {output.data.shape}")

    records = list(tape.records)
    seen: set[int] = {id(output)}
    for rec in records:
        seen.add(id(rec.out))
        for t in rec.inputs:
            seen.add(id(t))
    for t in wrt:
        if id(t) not in seen:
            raise ValueError("detached leaf: tensor does not appear on the tape")

    # forward reachability from wrt: skip vjps on subgraphs that cannot
    # influence any requested leaf (e.g. the generator during a critic step)
    relevant: set[int] = {id(t) for t in wrt}
    needed = []
    for rec in records:
        if any(id(t) in relevant for t in rec.inputs):
            relevant.add(id(rec.out))
            needed.append(rec)

    grads: dict[int, Tensor] = {id(output): _move(np.ones_like(output.data))}

    ctx = contextlib.nullcontext() if create_graph else no_record()
    with ctx:
        for rec in reversed(needed):
            g = grads.get(id(rec.out))
            if g is None:
                continue
            partials = rec.vjp(g)
            for inp, p in zip(rec.inputs, partials):
                if p is None or not inp.requires_grad or id(inp) not in relevant:
                    continue
                prev = grads.get(id(inp))
                grads[id(inp)] = p if prev is None else add(prev, p)

    result = []
    for t in wrt:
        g = grads.get(id(t))
        if g is None:
            g = _move(np.zeros_like(t.data))
        result.append(g)
    return result
