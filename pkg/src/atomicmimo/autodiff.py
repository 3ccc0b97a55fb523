"""Tape-based reverse-mode differentiation over a fixed primitive set.

The engine hosts all real-valued transformer parameters and activations.
Tensors are immutable views over numpy arrays; every op records its parents
and a backward closure, and :func:`backward` replays the tape in reverse
topological order.  Only first-order gradients are supported.

Two precisions are in play: float32 for training/inference throughput and
float64 for finite-difference certification (single-precision central
differences are too noisy to certify gradients against).

Inside a :func:`no_grad` block ops skip tape construction entirely, which is
the fast path used for inference.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class DiffTensor:
    """A real-valued tensor with an optional gradient slot.

    ``grad`` stays ``None`` until :func:`backward` fills it; its shape then
    matches ``values``.  Leaf tensors created with ``requires_grad=True`` are
    the trainable parameters.
    """

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, values, parents=(), backward=None, requires_grad=False):
        self.values = np.asarray(values)
        if not np.issubdtype(self.values.dtype, np.floating):
            self.values = self.values.astype(np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def size(self):
        return self.values.size

    def __repr__(self):
        return f"DiffTensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


def tensor(values, dtype=None) -> DiffTensor:
    """Wrap an array as a constant (no gradient tracking)."""
    arr = np.asarray(values, dtype=dtype)
    return DiffTensor(arr)


def param(values, dtype=None) -> DiffTensor:
    """Create a trainable leaf."""
    arr = np.array(values, dtype=dtype, copy=True)
    return DiffTensor(arr, requires_grad=True)


def _node(values, parents, backward) -> DiffTensor:
    if _grad_enabled:
        return DiffTensor(values, parents=parents, backward=backward)
    return DiffTensor(values)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- arithmetic ---------------------------------------------------------------


def add(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    out = a.values + b.values

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), bwd)


def sub(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    out = a.values - b.values

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(out, (a, b), bwd)


def mul(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    out = a.values * b.values

    def bwd(g):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)

    return _node(out, (a, b), bwd)


def scale(a: DiffTensor, c: float) -> DiffTensor:
    out = a.values * c

    def bwd(g):
        return (g * c,)

    return _node(out, (a,), bwd)


def neg(a: DiffTensor) -> DiffTensor:
    return scale(a, -1.0)


def matmul(a: DiffTensor, b: DiffTensor) -> DiffTensor:
    """Matrix product; leading batch dimensions broadcast as in numpy."""
    out = a.values @ b.values

    def bwd(g):
        ga = _unbroadcast(g @ np.swapaxes(b.values, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.values, -1, -2) @ g, b.shape)
        return ga, gb

    return _node(out, (a, b), bwd)


# -- shape ops ----------------------------------------------------------------


def reshape(a: DiffTensor, shape) -> DiffTensor:
    out = a.values.reshape(shape)

    def bwd(g):
        return (g.reshape(a.shape),)

    return _node(out, (a,), bwd)


def swapaxes(a: DiffTensor, ax1: int, ax2: int) -> DiffTensor:
    out = np.swapaxes(a.values, ax1, ax2)

    def bwd(g):
        return (np.swapaxes(g, ax1, ax2),)

    return _node(out, (a,), bwd)


def transpose(a: DiffTensor) -> DiffTensor:
    """2-D transpose."""
    if a.values.ndim != 2:
        raise ValueError("transpose expects a 2-D tensor")
    return swapaxes(a, 0, 1)


def concat(parts: Sequence[DiffTensor], axis: int = 0) -> DiffTensor:
    out = np.concatenate([p.values for p in parts], axis=axis)
    sizes = [p.values.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def bwd(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
            for i in range(len(parts))
        )

    return _node(out, tuple(parts), bwd)


def take(a: DiffTensor, indices, axis: int) -> DiffTensor:
    """Select positions along ``axis`` (gradient scatters back, zero elsewhere)."""
    idx = np.asarray(indices)
    out = np.take(a.values, idx, axis=axis)

    def bwd(g):
        ga = np.zeros_like(a.values)
        sel = (slice(None),) * (axis % a.values.ndim) + (idx,)
        np.add.at(ga, sel, g)
        return (ga,)

    return _node(out, (a,), bwd)


def gather_rows(table: DiffTensor, indices) -> DiffTensor:
    """Row lookup into a 2-D table (embedding-style)."""
    if table.values.ndim != 2:
        raise ValueError("gather_rows expects a 2-D table")
    idx = np.asarray(indices, dtype=np.intp)
    out = table.values[idx]

    def bwd(g):
        gt = np.zeros_like(table.values)
        np.add.at(gt, idx, g)
        return (gt,)

    return _node(out, (table,), bwd)


# -- reductions ---------------------------------------------------------------


def sum_(a: DiffTensor, axis=None, keepdims: bool = False) -> DiffTensor:
    out = a.values.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).astype(a.dtype, copy=False),)

    return _node(out, (a,), bwd)


def mean_(a: DiffTensor, axis=None, keepdims: bool = False) -> DiffTensor:
    if axis is None:
        count = a.size
    else:
        count = a.shape[axis]
    return scale(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


# -- nonlinearities -----------------------------------------------------------


def gelu(a: DiffTensor) -> DiffTensor:
    """Exact (erf-based) Gaussian error linear unit."""
    x = a.values
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * cdf

    def bwd(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
        return (g * (cdf + x * pdf),)

    return _node(out, (a,), bwd)


def softmax(a: DiffTensor) -> DiffTensor:
    """Softmax over the last axis, max-subtracted for stability.

    ``-inf`` entries (masked positions) get weight exactly 0 and zero
    gradient, provided every row keeps at least one finite entry.
    """
    x = a.values
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    out = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = np.sum(g * out, axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _node(out, (a,), bwd)


def layer_norm(a: DiffTensor, gain: DiffTensor, offset: DiffTensor, eps: float = 1e-5) -> DiffTensor:
    """Normalise the last axis to zero mean / unit variance, then affine."""
    x = a.values
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    out = gain.values * xhat + offset.values

    def bwd(g):
        gy = g * gain.values
        gx = inv_std * (
            gy
            - gy.mean(axis=-1, keepdims=True)
            - xhat * np.mean(gy * xhat, axis=-1, keepdims=True)
        )
        lead = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=lead)
        goffset = g.sum(axis=lead)
        return gx.astype(x.dtype, copy=False), ggain, goffset

    return _node(out, (a, gain, offset), bwd)


# -- backward pass ------------------------------------------------------------


def backward(loss: DiffTensor, params: Iterable[DiffTensor]) -> None:
    """Fill ``p.grad`` with d(loss)/dp for every p in ``params``.

    ``loss`` must be a scalar recorded on the live tape.  Parameters that do
    not influence the loss receive an all-zero gradient.
    """
    if loss.values.ndim != 0 and loss.values.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")

    params = list(params)
    order: list[DiffTensor] = []
    seen: set[int] = set()
    stack: list[tuple[DiffTensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(order):
        if node._backward is None:
            continue  # leaf or constant; any accumulated grad stays for the final read
        g = grads.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
        node._backward = None  # tape is single-use; free closures eagerly

    for p in params:
        g = grads.get(id(p))
        p.grad = np.zeros_like(p.values) if g is None else g.astype(p.dtype, copy=False)


class GradientCheckError(RuntimeError):
    """Raised when the checked function produces a non-finite value."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


def finite_diff_check(
    fn: Callable[[], DiffTensor],
    params: Sequence[DiffTensor],
    step: float = 1e-4,
) -> float:
    """Compare the tape gradient of ``fn`` against central differences.

    Returns the max over all coordinates of
    ``|analytic - numeric| / (|analytic| + |numeric| + 1e-12)``.
    Parameters should be float64; the check perturbs them in place and
    restores the original values.
    """
    if step <= 0:
        raise ValueError("step must be > 0")

    loss = fn()
    if not np.isfinite(loss.values).all():
        raise GradientCheckError("function value is not finite at the base point")
    backward(loss, params)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for pi, p in enumerate(params):
        flat = p.values.reshape(-1)
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + step
            hi = float(fn().values)
            flat[ci] = orig - step
            lo = float(fn().values)
            flat[ci] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise GradientCheckError(
                    f"non-finite function value at parameter {pi}, coordinate {ci}",
                    coordinate=(pi, ci),
                )
            numeric = (hi - lo) / (2.0 * step)
            a = analytic[pi].reshape(-1)[ci]
            rel = abs(a - numeric) / (abs(a) + abs(numeric) + 1e-12)
            worst = max(worst, rel)
    return worst
