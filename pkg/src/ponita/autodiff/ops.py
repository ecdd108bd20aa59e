"""Differentiable primitives.

Every function takes DTensors (or array-likes, treated as constants) and
returns a DTensor. Adjoints are expressed with these same functions, which
is what makes ``create_graph=True`` work.
"""
import numpy as np

from .. import backend
from .tensor import DTensor

_SQRT_2PI_INV = 0.3989422804014327


# ---------------------------------------------------------------- helpers

def _as(x, like=None):
    if isinstance(x, DTensor):
        return x
    dtype = like.dtype if isinstance(like, DTensor) else None
    arr = np.asarray(x, dtype=dtype)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64 if dtype is None else dtype)
    return DTensor(arr)


def _pair(a, b):
    if not isinstance(a, DTensor):
        a = _as(a, b)
    if not isinstance(b, DTensor):
        b = _as(b, a)
    return a, b


def _tape_of(inputs):
    tape = None
    for x in inputs:
        t = x.tape
        if t is not None and t.recording:
            if tape is None:
                tape = t
            elif t is not tape:
                raise ValueError("inputs are tracked on different tapes")
    return tape


def _make(out, inputs, vjp):
    tape = _tape_of(inputs)
    if tape is None:
        return DTensor(out)
    return tape.record(out, inputs, vjp)


def _reduce_to(arr, shape):
    if arr.shape == tuple(shape):
        return arr
    lead = arr.ndim - len(shape)
    if lead < 0:
        raise ValueError(f"cannot reduce shape {arr.shape} to {shape}")
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and arr.shape[i + lead] != 1)
    out = arr.sum(axis=axes, keepdims=True) if axes else arr
    return out.reshape(shape)


def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def _shape_error(name, *shapes):
    return ValueError(f"{name}: incompatible shapes " + " and ".join(str(s) for s in shapes))


# ------------------------------------------------------------- broadcasting

def sum_to(x, shape):
    """Sum ``x`` down to a broadcast-compatible ``shape``."""
    x = _as(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x

    def vjp(g, needs):
        return (broadcast_to(g, x.shape),)

    return _make(_reduce_to(x.data, shape), (x,), vjp)


def broadcast_to(x, shape):
    x = _as(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    try:
        out = np.broadcast_to(x.data, shape)
    except ValueError:
        raise _shape_error("broadcast_to", x.shape, shape) from None

    def vjp(g, needs):
        return (sum_to(g, x.shape),)

    return _make(out, (x,), vjp)


def _bshape(name, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise _shape_error(name, a.shape, b.shape) from None


# ------------------------------------------------------------- elementwise

def add(a, b):
    a, b = _pair(a, b)
    _bshape("add", a, b)

    def vjp(g, needs):
        return (sum_to(g, a.shape) if needs[0] else None,
                sum_to(g, b.shape) if needs[1] else None)

    return _make(a.data + b.data, (a, b), vjp)


def sub(a, b):
    a, b = _pair(a, b)
    _bshape("sub", a, b)

    def vjp(g, needs):
        return (sum_to(g, a.shape) if needs[0] else None,
                sum_to(neg(g), b.shape) if needs[1] else None)

    return _make(a.data - b.data, (a, b), vjp)


def neg(a):
    a = _as(a)
    return _make(-a.data, (a,), lambda g, needs: (neg(g),))


def mul(a, b):
    a, b = _pair(a, b)
    _bshape("mul", a, b)

    def vjp(g, needs):
        return (sum_to(mul(g, b), a.shape) if needs[0] else None,
                sum_to(mul(g, a), b.shape) if needs[1] else None)

    return _make(a.data * b.data, (a, b), vjp)


def div(a, b):
    a, b = _pair(a, b)
    _bshape("div", a, b)

    def vjp(g, needs):
        ga = sum_to(div(g, b), a.shape) if needs[0] else None
        gb = sum_to(neg(div(mul(g, a), mul(b, b))), b.shape) if needs[1] else None
        return ga, gb

    return _make(a.data / b.data, (a, b), vjp)


def square(a):
    return mul(a, a)


def power(a, k):
    """Elementwise ``a ** k`` for a constant real exponent."""
    a = _as(a)
    k = float(k)
    if k == 0.0:
        return DTensor(np.ones_like(a.data))
    if k == 1.0:
        return a

    def vjp(g, needs):
        return (mul(g, mul(power(a, k - 1.0), k)),)

    return _make(np.power(a.data, k), (a,), vjp)


def exp(a):
    a = _as(a)
    return _make(np.exp(a.data), (a,), lambda g, needs: (mul(g, exp(a)),))


def log(a):
    a = _as(a)
    return _make(np.log(a.data), (a,), lambda g, needs: (div(g, a),))


def sqrt(a):
    a = _as(a)
    return _make(np.sqrt(a.data), (a,),
                 lambda g, needs: (div(mul(g, 0.5), sqrt(a)),))


def safe_inv(a):
    """1/a where a > 0, and 0 elsewhere (a is expected to be >= 0)."""
    a = _as(a)
    d = a.data
    pos = d > 0
    out = np.divide(1.0, d, out=np.zeros_like(d), where=pos)

    def vjp(g, needs):
        s = safe_inv(a)
        return (neg(mul(g, mul(s, s))),)

    return _make(out, (a,), vjp)


def relu(a):
    a = _as(a)
    mask = (a.data > 0).astype(a.dtype)
    return _make(a.data * mask, (a,), lambda g, needs: (mul(g, DTensor(mask)),))


def gelu(a):
    """Exact (erf) Gaussian error linear unit."""
    a = _as(a)
    if _tape_of((a,)) is None:
        return DTensor(backend.gelu(a.data))
    out, der = backend.gelu_pair(a.data)

    def vjp(g, needs):
        if a.tape.recording:  # double backward: keep the derivative differentiable
            return (mul(g, gelu_deriv(a)),)
        return (mul(g, DTensor(der)),)

    return _make(out, (a,), vjp)


def gelu_deriv(a):
    """Derivative of :func:`gelu`, itself differentiable."""
    a = _as(a)

    def vjp(g, needs):
        # d/dx [Phi(x) + x phi(x)] = phi(x) (2 - x^2)
        aa = mul(a, a)
        pdf = mul(exp(mul(aa, -0.5)), _SQRT_2PI_INV)
        return (mul(g, mul(pdf, sub(2.0, aa))),)

    return _make(backend.gelu_deriv(a.data), (a,), vjp)


def arccos(a):
    """arccos of ``a`` clamped to [-1, 1]; zero gradient where clamped."""
    a = _as(a)
    d = a.data
    out = np.arccos(np.clip(d, -1.0, 1.0))

    def vjp(g, needs):
        inner = relu(sub(1.0, mul(a, a)))
        return (neg(mul(g, safe_inv(sqrt(inner)))),)

    return _make(out, (a,), vjp)


def where(mask, a, b):
    """Select ``a`` where the constant boolean ``mask`` holds, else ``b``."""
    a, b = _pair(a, b)
    m = np.asarray(mask, dtype=bool)
    mf = DTensor(m.astype(a.dtype))
    nf = DTensor((~m).astype(a.dtype))

    def vjp(g, needs):
        return (sum_to(mul(g, mf), a.shape) if needs[0] else None,
                sum_to(mul(g, nf), b.shape) if needs[1] else None)

    return _make(np.where(m, a.data, b.data), (a, b), vjp)


# -------------------------------------------------------------- reductions

def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    a = _as(a)
    axes = _norm_axes(axis, a.ndim)
    kshape = tuple(1 if i in axes else s for i, s in enumerate(a.shape))

    def vjp(g, needs):
        return (broadcast_to(reshape(g, kshape), a.shape),)

    return _make(a.data.sum(axis=axes, keepdims=keepdims), (a,), vjp)


def mean(a, axis=None, keepdims=False):
    a = _as(a)
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return mul(sum(a, axis=axes, keepdims=keepdims), 1.0 / max(count, 1))


def norm(a, axis=-1, keepdims=False):
    """Euclidean norm along ``axis`` with a zero (sub)gradient at the origin."""
    a = _as(a)
    ax = axis % a.ndim
    out = np.sqrt((a.data * a.data).sum(axis=ax, keepdims=keepdims))

    def vjp(g, needs):
        n = norm(a, axis=ax, keepdims=True)
        gk = g if keepdims else reshape(g, n.shape)
        return (mul(a, mul(gk, safe_inv(n))),)

    return _make(out, (a,), vjp)


# ------------------------------------------------------------------ shapes

def reshape(a, shape):
    a = _as(a)
    shape = tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise _shape_error("reshape", a.shape, shape) from None
    if out.shape == a.shape:
        return a
    return _make(out, (a,), lambda g, needs: (reshape(g, a.shape),))


def transpose(a, axes):
    a = _as(a)
    axes = tuple(int(x) % a.ndim for x in axes)
    inv = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,),
                 lambda g, needs: (transpose(g, inv),))


def swapaxes(a, i, j):
    a = _as(a)
    axes = list(range(a.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return transpose(a, axes)


def expand_dims(a, axis):
    a = _as(a)
    return reshape(a, np.expand_dims(a.data, axis).shape)


def _is_basic(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis
               for i in items)


def getitem(a, index):
    a = _as(a)
    basic = _is_basic(index)

    def vjp(g, needs):
        return (_scatter(g, a.shape, index, basic),)

    return _make(a.data[index], (a,), vjp)


def _scatter(g, shape, index, basic):
    """Adjoint of getitem: place ``g`` into zeros of ``shape`` at ``index``."""
    out = np.zeros(shape, dtype=g.dtype)
    if basic:
        out[index] = g.data
    else:
        np.add.at(out, index, g.data)
    return _make(out, (g,), lambda gg, needs: (getitem(gg, index),))


def concat(tensors, axis=0):
    tensors = [_as(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of an empty list")
    nd = tensors[0].ndim
    ax = axis % nd
    try:
        out = np.concatenate([t.data for t in tensors], axis=ax)
    except ValueError:
        raise _shape_error("concat", *[t.shape for t in tensors]) from None
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def vjp(g, needs):
        res = []
        for k, need in enumerate(needs):
            if not need:
                res.append(None)
                continue
            idx = [slice(None)] * nd
            idx[ax] = slice(int(bounds[k]), int(bounds[k + 1]))
            res.append(getitem(g, tuple(idx)))
        return tuple(res)

    return _make(out, tuple(tensors), vjp)


def stack(tensors, axis=0):
    tensors = [_as(t) for t in tensors]
    return concat([expand_dims(t, axis) for t in tensors], axis=axis)


# ---------------------------------------------------------- index / scatter

def gather(a, index):
    """Rows ``a[index]`` along axis 0."""
    a = _as(a)
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError(f"gather: index must be 1-D, got shape {idx.shape}")
    n = a.shape[0]

    def vjp(g, needs):
        return (segment_sum(g, idx, n),)

    return _make(a.data[idx], (a,), vjp)


def segment_sum(a, index, num_segments):
    """out[s] = sum of rows a[e] with index[e] == s."""
    a = _as(a)
    idx = np.asarray(index, dtype=np.int64)
    if idx.shape != (a.shape[0],):
        raise _shape_error("segment_sum", a.shape, idx.shape)
    if a.shape[0] == 0:
        out = np.zeros((num_segments,) + a.shape[1:], dtype=a.dtype)
    else:
        out = backend.segment_sum(a.data, idx, num_segments)

    def vjp(g, needs):
        return (gather(g, idx),)

    return _make(out, (a,), vjp)


def take(a, index, axis):
    """``np.take`` along ``axis`` with a 1-D integer index."""
    a = _as(a)
    ax = axis % a.ndim
    if ax == 0:
        return gather(a, index)
    perm = [ax] + [i for i in range(a.ndim) if i != ax]
    moved = gather(transpose(a, perm), index)
    return transpose(moved, np.argsort(perm))


def edge_conv(kernel, features, senders, receivers, num_nodes):
    """Depthwise message sum: out[r] = sum_e kernel[e] * features[s] over edges r <- s."""
    k = _as(kernel)
    f = _as(features)
    if k.shape[1:] != f.shape[1:]:
        raise _shape_error("edge_conv", k.shape, f.shape)
    snd = np.asarray(senders, dtype=np.int64)
    rcv = np.asarray(receivers, dtype=np.int64)
    if snd.shape != (k.shape[0],) or rcv.shape != (k.shape[0],):
        raise _shape_error("edge_conv", k.shape, snd.shape, rcv.shape)
    if k.shape[0] == 0:
        out = np.zeros((num_nodes,) + f.shape[1:], dtype=np.result_type(k.data, f.data))
    else:
        out = backend.edge_conv(k.data, f.data, snd, rcv, num_nodes)
    n_f = f.shape[0]

    def vjp(g, needs):
        gk = mul(gather(g, rcv), gather(f, snd)) if needs[0] else None
        gf = edge_conv(k, g, rcv, snd, n_f) if needs[1] else None
        return gk, gf

    return _make(out, (k, f), vjp)


# ----------------------------------------------------------- contractions

def matmul(a, b):
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs ndim >= 2, got {a.shape} and {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise _shape_error("matmul", a.shape, b.shape) from None

    def vjp(g, needs):
        ga = sum_to(matmul(g, swapaxes(b, -1, -2)), a.shape) if needs[0] else None
        gb = sum_to(matmul(swapaxes(a, -1, -2), g), b.shape) if needs[1] else None
        return ga, gb

    return _make(out, (a, b), vjp)


def _parse_einsum(spec):
    lhs, out = spec.replace(" ", "").split("->")
    ins = lhs.split(",")
    if len(ins) != 2:
        raise ValueError("einsum supports exactly two operands")
    for s in ins + [out]:
        if len(set(s)) != len(s) or "." in s:
            raise ValueError(f"einsum: repeated indices/ellipsis unsupported in {spec!r}")
    return ins[0], ins[1], out


def einsum(spec, a, b):
    """Two-operand einsum, e.g. ``einsum('qrc,prc->pqc', K, f)``."""
    a, b = _pair(a, b)
    sa, sb, so = _parse_einsum(spec)
    if len(sa) != a.ndim or len(sb) != b.ndim:
        raise _shape_error(f"einsum {spec!r}", a.shape, b.shape)
    try:
        out = np.einsum(spec, a.data, b.data, optimize=True)
    except ValueError:
        raise _shape_error(f"einsum {spec!r}", a.shape, b.shape) from None

    def operand_grad(g, other, s_other, s_self, shape):
        keep = "".join(c for c in s_self if c in so or c in s_other)
        r = einsum(f"{so},{s_other}->{keep}", g, other)
        if keep != s_self:
            full = tuple(shape[i] if c in keep else 1 for i, c in enumerate(s_self))
            r = broadcast_to(reshape(r, full), shape)
        return r

    def vjp(g, needs):
        ga = operand_grad(g, b, sb, sa, a.shape) if needs[0] else None
        gb = operand_grad(g, a, sa, sb, b.shape) if needs[1] else None
        return ga, gb

    return _make(out, (a, b), vjp)


# --------------------------------------------------------------- composites

def layer_norm(x, scale, shift, eps=1e-5):
    """Normalise over the last (channel) axis, then apply scale and shift."""
    x = _as(x)
    mu = mean(x, axis=-1, keepdims=True)
    xc = sub(x, mu)
    var = mean(mul(xc, xc), axis=-1, keepdims=True)
    xhat = div(xc, sqrt(add(var, eps)))
    return add(mul(xhat, scale), shift)
