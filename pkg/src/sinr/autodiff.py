"""Dense N-D tensors with reverse-mode automatic differentiation.

Values are 64-bit floats throughout. A :class:`Tape` records every
operation applied to tensors bound to it; :func:`backward` replays the
records in reverse to accumulate gradients. The op set is exactly what
the reconstruction pipeline needs: elementwise arithmetic with
trailing-axis broadcasting, 2-D matmul, softmax, relu, abs, exp, sin/cos,
concatenation, reshape/permute, affine maps over the last axis, 3x3
per-band spatial convolution, spatial average pooling, and piecewise
linear interpolation along the spectral axis.

Gradient accumulation is sequential over node ids, so two backward
passes over identical tapes produce bit-identical gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "DimensionError",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "softmax",
    "relu",
    "absval",
    "exp",
    "sin",
    "cos",
    "outer",
    "sum_all",
    "concat",
    "reshape",
    "permute",
    "tile_leading",
    "linear",
    "conv_spatial",
    "avg_pool_spatial",
    "interp_linear_spectral",
    "spectral_neighbors",
]

MAX_AXES = 5


class DimensionError(ValueError):
    """Raised when operand shapes do not satisfy an op's contract."""


@dataclass
class _Node:
    value: np.ndarray
    parents: tuple[int, ...]
    # Maps the node's output gradient to per-parent gradient arrays
    # (same order as `parents`); None for leaves.
    backward: Callable[[np.ndarray], tuple[np.ndarray, ...]] | None
    needs_grad: bool


class Tape:
    """Append-only record of operations forming a gradient DAG."""

    def __init__(self) -> None:
        self.nodes: list[_Node] = []

    def _record(self, value, parents, backward, needs_grad) -> "Tensor":
        self.nodes.append(_Node(value, parents, backward, needs_grad))
        return Tensor(value, self, len(self.nodes) - 1)

    def param(self, data: np.ndarray) -> "Tensor":
        """Bind a trainable leaf to the tape."""
        arr = _as_f64(data, checked=True)
        return self._record(arr, (), None, True)

    def constant(self, data: np.ndarray) -> "Tensor":
        """Bind a non-trainable leaf (no gradient flows into it)."""
        arr = _as_f64(data, checked=True)
        return self._record(arr, (), None, False)

    def backward(self, root: "Tensor") -> dict[int, np.ndarray]:
        """Accumulate gradients of a scalar root w.r.t. every reachable node.

        Returns a map node_id -> gradient array for every node that
        requires gradients. Accumulation is in fixed id order.
        """
        if root.tape is not self:
            raise ValueError("root tensor is not bound to this tape")
        if root.data.shape != (1,):
            raise DimensionError(
                f"backward expects a scalar root of shape (1,), got {root.data.shape}"
            )
        grads: dict[int, np.ndarray] = {root.node_id: np.ones(1)}
        for nid in range(root.node_id, -1, -1):
            g = grads.get(nid)
            if g is None:
                continue
            node = self.nodes[nid]
            if node.backward is None:
                continue
            parent_grads = node.backward(g)
            for pid, pg in zip(node.parents, parent_grads):
                if not self.nodes[pid].needs_grad:
                    continue
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg
        return {nid: g for nid, g in grads.items() if self.nodes[nid].needs_grad}


class Tensor:
    """Immutable dense array, optionally bound to a gradient tape."""

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape: Tape | None = None, node_id: int | None = None):
        if tape is None:
            data = _as_f64(data, checked=True)
        self.data = data
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        tag = f", node={self.node_id}" if self.tape is not None else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # Operator sugar used throughout the model code.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


def _as_f64(data, checked: bool = False) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > MAX_AXES:
        raise DimensionError(f"tensors support at most {MAX_AXES} axes, got {arr.ndim}")
    if checked and not np.all(np.isfinite(arr)):
        raise ValueError("tensor values must be finite")
    return arr


def _tape_of(*args) -> Tape:
    tape = None
    for a in args:
        if isinstance(a, Tensor) and a.tape is not None:
            if tape is None:
                tape = a.tape
            elif tape is not a.tape:
                raise ValueError("operands bound to different tapes")
    if tape is None:
        raise ValueError("at least one operand must be bound to a tape")
    return tape


def _lift(tape: Tape, x) -> Tensor:
    """Coerce scalars/arrays/untaped tensors to constants on `tape`."""
    if isinstance(x, Tensor):
        if x.tape is None:
            return tape.constant(x.data)
        return x
    return tape.constant(np.asarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# elementwise arithmetic with trailing-axis broadcasting
# ---------------------------------------------------------------------------

def _broadcast_info(sa: tuple[int, ...], sb: tuple[int, ...]):
    """Classify operand shapes: equal, b-is-suffix-of-a, or b-scalar.

    Returns (out_shape, reduce_a, reduce_b) where reduce_* collapses a
    full-shape gradient back to the operand's shape.
    """
    def identity(g):
        return g

    if sa == sb:
        return sa, identity, identity
    if sb == (1,):
        return sa, identity, lambda g: np.sum(g).reshape(1)
    if sa == (1,):
        return sb, lambda g: np.sum(g).reshape(1), identity
    if len(sb) < len(sa) and sa[len(sa) - len(sb):] == sb:
        k = len(sa) - len(sb)
        return sa, identity, lambda g: g.sum(axis=tuple(range(k)))
    if len(sa) < len(sb) and sb[len(sb) - len(sa):] == sa:
        k = len(sb) - len(sa)
        return sb, lambda g: g.sum(axis=tuple(range(k))), identity
    raise DimensionError(f"shapes {sa} and {sb} do not broadcast")


def _binary(a, b, fwd, bwd_a, bwd_b) -> Tensor:
    tape = _tape_of(a, b)
    a = _lift(tape, a)
    b = _lift(tape, b)
    _, reduce_a, reduce_b = _broadcast_info(a.shape, b.shape)
    out = fwd(a.data, b.data)
    needs = tape.nodes[a.node_id].needs_grad or tape.nodes[b.node_id].needs_grad
    ad, bd = a.data, b.data

    def backward(g):
        return reduce_a(bwd_a(g, ad, bd)), reduce_b(bwd_b(g, ad, bd))

    return tape._record(out, (a.node_id, b.node_id), backward, needs)


def add(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x / y,
                   lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y))


def neg(a) -> Tensor:
    tape = _tape_of(a)
    a = _lift(tape, a)
    return tape._record(-a.data, (a.node_id,), lambda g: (-g,),
                        tape.nodes[a.node_id].needs_grad)


# ---------------------------------------------------------------------------
# unary maps
# ---------------------------------------------------------------------------

def _unary(a, fwd, bwd) -> Tensor:
    tape = _tape_of(a)
    a = _lift(tape, a)
    out = fwd(a.data)
    ad = a.data
    return tape._record(out, (a.node_id,), lambda g: (bwd(g, ad, out),),
                        tape.nodes[a.node_id].needs_grad)


def relu(a) -> Tensor:
    # Subgradient at 0 is 0.
    return _unary(a, lambda x: np.maximum(x, 0.0),
                  lambda g, x, y: g * (x > 0.0))


def absval(a) -> Tensor:
    return _unary(a, np.abs, lambda g, x, y: g * np.sign(x))


def exp(a) -> Tensor:
    return _unary(a, np.exp, lambda g, x, y: g * y)


def sin(a) -> Tensor:
    return _unary(a, np.sin, lambda g, x, y: g * np.cos(x))


def cos(a) -> Tensor:
    return _unary(a, np.cos, lambda g, x, y: -g * np.sin(x))


def softmax(a, axis: int = -1) -> Tensor:
    """Max-stabilized softmax; each slice along `axis` sums to 1."""
    tape = _tape_of(a)
    a = _lift(tape, a)
    ax = axis if axis >= 0 else a.data.ndim + axis
    if not 0 <= ax < a.data.ndim:
        raise DimensionError(f"softmax axis {axis} out of bounds for shape {a.shape}")
    shifted = a.data - np.max(a.data, axis=ax, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=ax, keepdims=True)

    def backward(g):
        dot = np.sum(g * out, axis=ax, keepdims=True)
        return (out * (g - dot),)

    return tape._record(out, (a.node_id,), backward,
                        tape.nodes[a.node_id].needs_grad)


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------

def sum_all(a) -> Tensor:
    tape = _tape_of(a)
    a = _lift(tape, a)
    out = np.sum(a.data).reshape(1)
    shape = a.shape

    def backward(g):
        return (np.full(shape, g[0]),)

    return tape._record(out, (a.node_id,), backward,
                        tape.nodes[a.node_id].needs_grad)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tape = _tape_of(*tensors)
    ts = [_lift(tape, t) for t in tensors]
    nd = ts[0].data.ndim
    ax = axis if axis >= 0 else nd + axis
    for t in ts[1:]:
        if t.data.ndim != nd:
            raise DimensionError("concat operands must have equal rank")
        for i in range(nd):
            if i != ax and t.shape[i] != ts[0].shape[i]:
                raise DimensionError(
                    f"concat shapes {ts[0].shape} and {t.shape} differ off axis {ax}"
                )
    out = np.concatenate([t.data for t in ts], axis=ax)
    sizes = [t.shape[ax] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=ax)
            for i in range(len(ts))
        )

    needs = any(tape.nodes[t.node_id].needs_grad for t in ts)
    return tape._record(out, tuple(t.node_id for t in ts), backward, needs)


def reshape(a, shape: Sequence[int]) -> Tensor:
    tape = _tape_of(a)
    a = _lift(tape, a)
    shape = tuple(shape)
    out = a.data.reshape(shape)
    orig = a.shape

    def backward(g):
        return (g.reshape(orig),)

    return tape._record(out, (a.node_id,), backward,
                        tape.nodes[a.node_id].needs_grad)


def permute(a, axes: Sequence[int]) -> Tensor:
    tape = _tape_of(a)
    a = _lift(tape, a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(np.transpose(a.data, axes))

    def backward(g):
        return (np.ascontiguousarray(np.transpose(g, inverse)),)

    return tape._record(out, (a.node_id,), backward,
                        tape.nodes[a.node_id].needs_grad)


def tile_leading(a, lead: Sequence[int]) -> Tensor:
    """Replicate `a` over new leading axes; backward sums them out."""
    tape = _tape_of(a)
    a = _lift(tape, a)
    lead = tuple(lead)
    if a.data.ndim + len(lead) > MAX_AXES:
        raise DimensionError("tile_leading result exceeds the axis limit")
    out = np.broadcast_to(a.data, lead + a.shape).copy()
    k = len(lead)

    def backward(g):
        return (g.sum(axis=tuple(range(k))),)

    return tape._record(out, (a.node_id,), backward,
                        tape.nodes[a.node_id].needs_grad)


def outer(a, b) -> Tensor:
    """Outer product of two vectors: out[i, j] = a[i] * b[j]."""
    tape = _tape_of(a, b)
    a = _lift(tape, a)
    b = _lift(tape, b)
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise DimensionError("outer expects two 1-D operands")
    out = np.outer(a.data, b.data)
    ad, bd = a.data, b.data

    def backward(g):
        return g @ bd, g.T @ ad

    needs = tape.nodes[a.node_id].needs_grad or tape.nodes[b.node_id].needs_grad
    return tape._record(out, (a.node_id, b.node_id), backward, needs)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    tape = _tape_of(a, b)
    a = _lift(tape, a)
    b = _lift(tape, b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data
    ad, bd = a.data, b.data

    def backward(g):
        return g @ bd.T, ad.T @ g

    needs = tape.nodes[a.node_id].needs_grad or tape.nodes[b.node_id].needs_grad
    return tape._record(out, (a.node_id, b.node_id), backward, needs)


def linear(x, w, b=None) -> Tensor:
    """Affine map over the last axis, batched over all leading axes."""
    tape = _tape_of(x, w) if b is None else _tape_of(x, w, b)
    x = _lift(tape, x)
    w = _lift(tape, w)
    if w.data.ndim != 2:
        raise DimensionError("linear weight must be 2-D (in, out)")
    cin, cout = w.shape
    if x.shape[-1] != cin:
        raise DimensionError(f"linear input width {x.shape[-1]} != weight rows {cin}")
    lead = x.shape[:-1]
    xm = x.data.reshape(-1, cin)
    out = xm @ w.data
    xd, wd = xm, w.data
    parents = [x.node_id, w.node_id]
    if b is not None:
        b = _lift(tape, b)
        if b.shape != (cout,):
            raise DimensionError(f"linear bias shape {b.shape} != ({cout},)")
        out = out + b.data
        parents.append(b.node_id)

    out = out.reshape(lead + (cout,))

    def backward(g):
        gm = g.reshape(-1, cout)
        dx = (gm @ wd.T).reshape(lead + (cin,))
        dw = xd.T @ gm
        if len(parents) == 3:
            return dx, dw, gm.sum(axis=0)
        return dx, dw

    needs = any(tape.nodes[p].needs_grad for p in parents)
    return tape._record(out, tuple(parents), backward, needs)


# ---------------------------------------------------------------------------
# spatial ops over H x W x D x C fields
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray) -> np.ndarray:
    """[H,W,D,Cin] -> [H*W*D, 9*Cin] patch matrix with zero padding 1."""
    h, w, d, cin = x.shape
    xp = np.zeros((h + 2, w + 2, d, cin))
    xp[1:-1, 1:-1] = x
    cols = np.empty((h, w, d, 9, cin))
    for t in range(9):
        dh, dw = divmod(t, 3)
        cols[:, :, :, t, :] = xp[dh:dh + h, dw:dw + w]
    return cols.reshape(h * w * d, 9 * cin)


def conv_spatial(x, kernel, bias=None) -> Tensor:
    """3x3 spatial convolution applied to each spectral band independently.

    x: [H, W, D, Cin]; kernel: [3, 3, Cin, Cout]; zero padding keeps the
    spatial extent. The kernel is shared across bands.
    """
    tape = _tape_of(x, kernel) if bias is None else _tape_of(x, kernel, bias)
    x = _lift(tape, x)
    kernel = _lift(tape, kernel)
    if x.data.ndim != 4:
        raise DimensionError("conv_spatial input must be [H, W, D, C]")
    if kernel.data.ndim != 4 or kernel.shape[:2] != (3, 3):
        raise DimensionError("conv_spatial kernel must be [3, 3, Cin, Cout]")
    h, w, d, cin = x.shape
    if kernel.shape[2] != cin:
        raise DimensionError(
            f"kernel input channels {kernel.shape[2]} != data channels {cin}"
        )
    cout = kernel.shape[3]
    cols = _im2col(x.data)
    kmat = kernel.data.reshape(9 * cin, cout)
    out = cols @ kmat
    parents = [x.node_id, kernel.node_id]
    if bias is not None:
        bias = _lift(tape, bias)
        if bias.shape != (cout,):
            raise DimensionError(f"conv bias shape {bias.shape} != ({cout},)")
        out = out + bias.data
        parents.append(bias.node_id)
    out = out.reshape(h, w, d, cout)
    # dx of a stride-1 same-padded correlation is itself a correlation
    # with the spatially rotated, channel-transposed kernel
    krot = np.ascontiguousarray(
        kernel.data[::-1, ::-1].transpose(0, 1, 3, 2)
    ).reshape(9 * cout, cin)

    def backward(g):
        gm = g.reshape(h * w * d, cout)
        dk = (cols.T @ gm).reshape(3, 3, cin, cout)
        dx = (_im2col(g) @ krot).reshape(h, w, d, cin)
        if len(parents) == 3:
            return dx, dk, gm.sum(axis=0)
        return dx, dk

    needs = any(tape.nodes[p].needs_grad for p in parents)
    return tape._record(out, tuple(parents), backward, needs)


def avg_pool_spatial(x) -> Tensor:
    """Mean over the spatial axes: [H, W, D, C] -> [1, 1, D, C]."""
    tape = _tape_of(x)
    x = _lift(tape, x)
    if x.data.ndim != 4:
        raise DimensionError("avg_pool_spatial input must be [H, W, D, C]")
    h, w, d, c = x.shape
    out = x.data.mean(axis=(0, 1), keepdims=True)

    def backward(g):
        return (np.broadcast_to(g / (h * w), (h, w, d, c)).copy(),)

    return tape._record(out, (x.node_id,), backward,
                        tape.nodes[x.node_id].needs_grad)


def interp_linear_spectral(x, coords: np.ndarray) -> Tensor:
    """Piecewise-linear resampling along the spectral axis.

    x: [H, W, D, C]; coords: D' query positions in [-1, 1] on the
    cell-centered source grid. Queries outside the grid clamp to the end
    bands. Aligned queries reproduce source bands bit-exactly.
    """
    tape = _tape_of(x)
    x = _lift(tape, x)
    if x.data.ndim != 4:
        raise DimensionError("interp_linear_spectral input must be [H, W, D, C]")
    h, w, d, c = x.shape
    coords = np.asarray(coords, dtype=np.float64).ravel()
    src = -1.0 + (2.0 * np.arange(d) + 1.0) / d
    if d == 1:
        lo = np.zeros(len(coords), dtype=np.intp)
        hi = lo
        wt = np.zeros(len(coords))
    else:
        hi = np.clip(np.searchsorted(src, coords, side="left"), 1, d - 1)
        lo = hi - 1
        wt = np.clip((coords - src[lo]) / (src[hi] - src[lo]), 0.0, 1.0)
        # collapse endpoint weights so exact grid hits and clamped
        # out-of-range queries copy a source band bitwise
        at_hi = wt == 1.0
        lo = np.where(at_hi, hi, lo)
        wt = np.where(at_hi, 0.0, wt)
        hi = np.where(wt == 0.0, lo, hi)

    a = x.data[:, :, lo, :]
    if d == 1:
        out = a.copy()
    else:
        wts = wt[None, None, :, None]
        out = (1.0 - wts) * a + wts * x.data[:, :, hi, :]
        same = lo == hi
        if np.any(same):
            out[:, :, same, :] = a[:, :, same, :]

    def backward(g):
        dx = np.zeros((h, w, d, c))
        wts = wt[None, None, :, None]
        ga = g * (1.0 - wts)
        gb = g * wts
        for k in range(len(coords)):
            dx[:, :, lo[k], :] += ga[:, :, k, :]
            if hi[k] != lo[k]:
                dx[:, :, hi[k], :] += gb[:, :, k, :]
        return (dx,)

    return tape._record(out, (x.node_id,), backward,
                        tape.nodes[x.node_id].needs_grad)


def spectral_neighbors(x) -> Tensor:
    """Stack each band with its reflected spectral neighbors.

    [H, W, D, C] -> [H, W, D, 3C] holding (band-1, band, band+1) features;
    indices reflect at the ends (D == 1 repeats the single band).
    """
    tape = _tape_of(x)
    x = _lift(tape, x)
    if x.data.ndim != 4:
        raise DimensionError("spectral_neighbors input must be [H, W, D, C]")
    h, w, d, c = x.shape
    idx = np.arange(d)
    prev = np.abs(idx - 1)
    nxt = idx + 1
    if d > 1:
        nxt[-1] = d - 2
    else:
        prev[:] = 0
        nxt = idx.copy()
    out = np.concatenate(
        [x.data[:, :, prev, :], x.data, x.data[:, :, nxt, :]], axis=3
    )

    def backward(g):
        dx = g[:, :, :, c:2 * c].copy()
        for k in range(d):
            dx[:, :, prev[k], :] += g[:, :, k, :c]
            dx[:, :, nxt[k], :] += g[:, :, k, 2 * c:]
        return (dx,)

    return tape._record(out, (x.node_id,), backward,
                        tape.nodes[x.node_id].needs_grad)
