"""Dense float64 tensors with reverse-mode gradient accumulation.

A `Graph` is a tape: every op executed inside a ``with Graph() as g:`` block
appends one record, and ``g.backward(root)`` replays the records in exact
reverse insertion order. Ops executed with no active graph compute values
only (no-grad mode). Values are never mutated in place after a node is
created, so replay order is reproducible.

Broadcasting is deliberately narrow: same-shape, or a size-1 tensor against
anything.
"""

from __future__ import annotations

import numpy as np

from . import backend
from .errors import DomainError, NonFiniteProbe, ShapeMismatch

PROB_EPS = 1e-12  # probabilities are clamped to [PROB_EPS, 1] before any log

_graph_stack: list["Graph"] = []


class DiffTensor:
    """A value array plus a same-shape gradient slot."""

    __slots__ = ("values", "grad", "requires_grad", "needs_grad")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)
        self.requires_grad = requires_grad
        self.needs_grad = requires_grad

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def detach(self) -> "DiffTensor":
        return DiffTensor(self.values.copy(), requires_grad=False)

    def item(self) -> float:
        return float(self.values)

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"DiffTensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow_const(self, p)


def constant(values) -> DiffTensor:
    return DiffTensor(values, requires_grad=False)


def parameter(values) -> DiffTensor:
    return DiffTensor(values, requires_grad=True)


def _wrap(x) -> DiffTensor:
    if isinstance(x, DiffTensor):
        return x
    return constant(x)


class Graph:
    """Ordered op tape; backward walks it in reverse insertion order."""

    def __init__(self):
        self._records: list[tuple[DiffTensor, object]] = []

    def __enter__(self):
        _graph_stack.append(self)
        return self

    def __exit__(self, *exc):
        popped = _graph_stack.pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self._records)

    def backward(self, root: DiffTensor):
        """Accumulate d(root)/d(leaf) into every reachable leaf's grad.

        Intermediate grads are reset first, so calling backward repeatedly
        on the same graph accumulates leaf grads without double counting.
        """
        if root.values.size != 1:
            raise ShapeMismatch(f"backward root must be scalar, got shape {root.shape}")
        for out, _ in self._records:
            out.grad.fill(0.0)
        root.grad[...] = 1.0
        for out, fn in reversed(self._records):
            if out.grad.any():
                fn(out.grad)


def _active() -> Graph | None:
    return _graph_stack[-1] if _graph_stack else None


def _make(values, inputs, backward_fn) -> DiffTensor:
    """Create an op output and record it on the active graph."""
    out = DiffTensor(values)
    g = _active()
    if g is not None and any(t.needs_grad for t in inputs):
        out.needs_grad = True
        g._records.append((out, backward_fn))
    return out


def _acc(t: DiffTensor, g):
    """Accumulate a gradient contribution, reducing over broadcast axes."""
    if not t.needs_grad:
        return
    if t.values.size == 1 and np.size(g) > 1:
        t.grad += np.sum(g)
    else:
        t.grad += g.reshape(t.values.shape)


def _check_binary_shapes(a: DiffTensor, b: DiffTensor, op: str):
    if a.shape == b.shape or a.values.size == 1 or b.values.size == 1:
        return
    raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} (only same-shape or scalar broadcast)")


# ---------------------------------------------------------------------------
# elementwise ops


def add(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    _check_binary_shapes(a, b, "add")

    def bwd(gy):
        _acc(a, gy)
        _acc(b, gy)

    return _make(a.values + b.values, (a, b), bwd)


def sub(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    _check_binary_shapes(a, b, "sub")

    def bwd(gy):
        _acc(a, gy)
        _acc(b, -gy)

    return _make(a.values - b.values, (a, b), bwd)


def mul(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    _check_binary_shapes(a, b, "mul")
    av, bv = a.values, b.values

    def bwd(gy):
        _acc(a, gy * bv)
        _acc(b, gy * av)

    return _make(av * bv, (a, b), bwd)


def div(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    _check_binary_shapes(a, b, "div")
    av, bv = a.values, b.values

    def bwd(gy):
        _acc(a, gy / bv)
        _acc(b, -gy * av / (bv * bv))

    return _make(av / bv, (a, b), bwd)


def neg(a: DiffTensor) -> DiffTensor:
    def bwd(gy):
        _acc(a, -gy)

    return _make(-a.values, (a,), bwd)


def log(a: DiffTensor) -> DiffTensor:
    if np.any(a.values <= 0.0):
        raise DomainError("log of nonpositive input; clamp first")
    av = a.values

    def bwd(gy):
        _acc(a, gy / av)

    return _make(np.log(av), (a,), bwd)


def exp(a: DiffTensor) -> DiffTensor:
    ev = np.exp(a.values)

    def bwd(gy):
        _acc(a, gy * ev)

    return _make(ev, (a,), bwd)


def pow_const(a: DiffTensor, p: float) -> DiffTensor:
    p = float(p)
    if p != round(p) and np.any(a.values < 0.0):
        raise DomainError("fractional power of negative input")
    av = a.values

    def bwd(gy):
        _acc(a, gy * p * av ** (p - 1.0))

    return _make(av**p, (a,), bwd)


def clamp(a: DiffTensor, lo: float, hi: float) -> DiffTensor:
    av = a.values
    passthrough = (av >= lo) & (av <= hi)

    def bwd(gy):
        _acc(a, gy * passthrough)

    return _make(np.clip(av, lo, hi), (a,), bwd)


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "neg": neg,
    "log": log,
    "exp": exp,
    "pow-const": pow_const,
    "clamp": clamp,
}


def elementwise(op_kind: str, a: DiffTensor, b=None, **kwargs) -> DiffTensor:
    """Dispatch by op kind; binary kinds require b, unary kinds forbid it."""
    try:
        fn = _ELEMENTWISE[op_kind]
    except KeyError:
        raise ValueError(f"unknown elementwise op kind: {op_kind!r}") from None
    if op_kind in ("add", "sub", "mul", "div"):
        if b is None:
            raise ValueError(f"{op_kind} needs two operands")
        return fn(a, _wrap(b))
    if b is not None:
        raise ValueError(f"{op_kind} is unary")
    return fn(a, **kwargs)


def clamped_log(a: DiffTensor) -> DiffTensor:
    """log over probabilities: inputs clamped to [PROB_EPS, 1] first."""
    return log(clamp(a, PROB_EPS, 1.0))


# ---------------------------------------------------------------------------
# activations


def relu(a: DiffTensor) -> DiffTensor:
    av = a.values
    mask = av > 0.0

    def bwd(gy):
        _acc(a, gy * mask)

    return _make(np.where(mask, av, 0.0), (a,), bwd)


def leaky_relu(a: DiffTensor, slope: float = 0.2) -> DiffTensor:
    av = a.values
    mask = av > 0.0

    def bwd(gy):
        _acc(a, gy * np.where(mask, 1.0, slope))

    return _make(np.where(mask, av, slope * av), (a,), bwd)


def softplus(a: DiffTensor) -> DiffTensor:
    """log(1 + exp(x)), computed stably. -log(sigmoid(x)) == softplus(-x)."""
    av = a.values
    out = np.log1p(np.exp(-np.abs(av))) + np.maximum(av, 0.0)
    sig = np.empty_like(av)
    pos = av >= 0.0
    sig[pos] = 1.0 / (1.0 + np.exp(-av[pos]))
    epx = np.exp(av[~pos])
    sig[~pos] = epx / (1.0 + epx)

    def bwd(gy):
        _acc(a, gy * sig)

    return _make(out, (a,), bwd)


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum_all(a: DiffTensor) -> DiffTensor:
    def bwd(gy):
        _acc(a, np.broadcast_to(gy, a.values.shape))

    return _make(np.sum(a.values), (a,), bwd)


def mean_all(a: DiffTensor) -> DiffTensor:
    n = a.values.size

    def bwd(gy):
        _acc(a, np.broadcast_to(gy / n, a.values.shape))

    return _make(np.sum(a.values) / n, (a,), bwd)


def reshape(a: DiffTensor, shape) -> DiffTensor:
    shape = tuple(shape)
    old = a.values.shape

    def bwd(gy):
        _acc(a, gy.reshape(old))

    return _make(a.values.reshape(shape).copy(), (a,), bwd)


def bias_add_channels(x: DiffTensor, b: DiffTensor) -> DiffTensor:
    """Add a per-channel bias [C] onto [N, C, ...spatial]."""
    if x.values.ndim < 2 or b.values.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"bias_add_channels: x {x.shape} vs bias {b.shape}")
    bshape = (1, b.shape[0]) + (1,) * (x.values.ndim - 2)
    axes = (0,) + tuple(range(2, x.values.ndim))

    def bwd(gy):
        _acc(x, gy)
        _acc(b, gy.sum(axis=axes))

    return _make(x.values + b.values.reshape(bshape), (x, b), bwd)


# ---------------------------------------------------------------------------
# network ops


def conv2d(x: DiffTensor, w: DiffTensor, stride: int = 1, pad: int = 0) -> DiffTensor:
    if x.values.ndim != 4 or w.values.ndim != 4:
        raise ShapeMismatch("conv2d expects x [N,Cin,H,W] and w [Cout,Cin,k,k]")
    n, ci, h, wd = x.shape
    co, ciw, k, k2 = w.shape
    if ciw != ci:
        raise ShapeMismatch(f"conv2d channel disagreement: input {ci} vs kernel {ciw}")
    if k != k2:
        raise ShapeMismatch("conv2d kernel must be square")
    if stride < 1 or k > h + 2 * pad or k > wd + 2 * pad:
        raise ShapeMismatch(f"conv2d: kernel {k} / stride {stride} invalid for input {h}x{wd} pad {pad}")
    xv, wv = x.values, w.values
    y = backend.conv2d_forward(xv, wv, stride, pad)

    def bwd(gy):
        if x.needs_grad:
            x.grad += backend.conv2d_backward_input(gy, wv, stride, pad, h, wd)
        if w.needs_grad:
            w.grad += backend.conv2d_backward_kernel(gy, xv, stride, pad, k)

    return _make(y, (x, w), bwd)


def conv1d(x: DiffTensor, w: DiffTensor, stride: int = 1) -> DiffTensor:
    if x.values.ndim != 3 or w.values.ndim != 3:
        raise ShapeMismatch("conv1d expects x [N,Cin,L] and w [Cout,Cin,k]")
    n, ci, ln = x.shape
    co, ciw, k = w.shape
    if ciw != ci:
        raise ShapeMismatch(f"conv1d channel disagreement: input {ci} vs kernel {ciw}")
    if stride < 1 or k > ln:
        raise ShapeMismatch(f"conv1d: kernel {k} / stride {stride} invalid for length {ln}")
    xv, wv = x.values, w.values
    y = backend.conv1d_forward(xv, wv, stride)

    def bwd(gy):
        if x.needs_grad:
            x.grad += backend.conv1d_backward_input(gy, wv, stride, ln)
        if w.needs_grad:
            w.grad += backend.conv1d_backward_kernel(gy, xv, stride, k)

    return _make(y, (x, w), bwd)


def global_average_pool(x: DiffTensor) -> DiffTensor:
    """[N,C,H,W] -> [N,C] spatial mean; the channel-statistics style extractor."""
    if x.values.ndim != 4:
        raise ShapeMismatch("global_average_pool expects [N,C,H,W]")
    n, c, h, w = x.shape
    area = h * w

    def bwd(gy):
        _acc(x, np.broadcast_to(gy[:, :, None, None] / area, x.values.shape))

    return _make(x.values.mean(axis=(2, 3)), (x,), bwd)


def upsample2x_nearest(x: DiffTensor) -> DiffTensor:
    if x.values.ndim != 4:
        raise ShapeMismatch("upsample2x_nearest expects [N,C,H,W]")
    n, c, h, w = x.shape
    y = np.repeat(np.repeat(x.values, 2, axis=2), 2, axis=3)

    def bwd(gy):
        _acc(x, gy.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)))

    return _make(y, (x,), bwd)


def softmax_channels(logits: DiffTensor) -> DiffTensor:
    """Per-pixel channel softmax over [N,C,H,W], max-subtracted for stability."""
    if logits.values.ndim != 4:
        raise ShapeMismatch("softmax_channels expects [N,C,H,W]")
    z = logits.values - logits.values.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def bwd(gy):
        dot = (gy * y).sum(axis=1, keepdims=True)
        _acc(logits, y * (gy - dot))

    return _make(y, (logits,), bwd)


def gram_matrix(x: DiffTensor) -> DiffTensor:
    """Per-sample channel Gram matrices: [N,C,H,W] -> [N,C,C], normalized by H*W."""
    if x.values.ndim != 4:
        raise ShapeMismatch("gram_matrix expects [N,C,H,W]")
    n, c, h, w = x.shape
    area = h * w
    f = x.values.reshape(n, c, area)
    g = np.matmul(f, f.transpose(0, 2, 1)) / area

    def bwd(gy):
        gf = np.matmul(gy + gy.transpose(0, 2, 1), f) / area
        _acc(x, gf.reshape(n, c, h, w))

    return _make(g, (x,), bwd)


# ---------------------------------------------------------------------------
# gradient checking


def check_gradients(f, inputs, h: float = 1e-3) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` maps the given DiffTensors to a scalar DiffTensor and is re-evaluated
    from scratch at each probe, so it must be a pure function of its inputs.
    """
    if not (1e-5 <= h <= 1e-2):
        raise ValueError(f"step h={h} outside [1e-5, 1e-2]")
    for t in inputs:
        t.zero_grad()
        t.needs_grad = t.requires_grad = True
    with Graph() as g:
        out = f(*inputs)
    if out.values.size != 1:
        raise ShapeMismatch("check_gradients needs a scalar-valued function")
    if not np.isfinite(out.values).all():
        raise NonFiniteProbe("function returned non-finite value at probe point")
    g.backward(out)
    analytic = [t.grad.copy() for t in inputs]

    worst = 0.0
    for t, an in zip(inputs, analytic):
        flat = t.values.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f(*inputs).item()
            flat[i] = orig - h
            dn = f(*inputs).item()
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(dn)):
                raise NonFiniteProbe(f"non-finite probe at coordinate {i}")
            numeric = (up - dn) / (2.0 * h)
            err = abs(an.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


def zero_grads(tensors):
    for t in tensors:
        t.zero_grad()
